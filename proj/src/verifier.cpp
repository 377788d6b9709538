#include "claimcheck/verifier.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "claimcheck/error.hpp"
#include "claimcheck/prompts.hpp"

namespace claimcheck {
namespace {

constexpr const char* kVerdictMarker = "classified as";
constexpr std::size_t kMaxDocTokens = 300;

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_word_char(char c) {
  const unsigned char u = static_cast<unsigned char>(c);
  return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z');
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::string truncate_tokens(const std::string& text, std::size_t max_tokens) {
  std::istringstream ss(text);
  std::vector<std::string> tokens;
  std::string tok;
  while (tokens.size() < max_tokens && ss >> tok) tokens.push_back(tok);
  return join(tokens, " ");
}

struct ClassMatch {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t class_index = 0;
};

/// All word-bounded, case-insensitive occurrences of any class name inside
/// `haystack` (already lowercased).
std::vector<ClassMatch> find_class_matches(const std::string& haystack,
                                           const std::vector<std::string>& classes_lower) {
  std::vector<ClassMatch> matches;
  for (std::size_t ci = 0; ci < classes_lower.size(); ++ci) {
    const std::string& needle = classes_lower[ci];
    if (needle.empty()) continue;
    std::size_t pos = haystack.find(needle);
    while (pos != std::string::npos) {
      const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
      const std::size_t end = pos + needle.size();
      const bool right_ok = end >= haystack.size() || !is_word_char(haystack[end]);
      if (left_ok && right_ok) matches.push_back({pos, needle.size(), ci});
      pos = haystack.find(needle, pos + 1);
    }
  }
  return matches;
}

/// The earliest match wins; among matches overlapping it, the longest class
/// name wins (so "Mostly-true" beats the "true" embedded inside it).
const ClassMatch* pick_match(const std::vector<ClassMatch>& matches) {
  if (matches.empty()) return nullptr;
  const ClassMatch* first = &matches[0];
  for (const auto& m : matches) {
    if (m.start < first->start || (m.start == first->start && m.length > first->length)) {
      first = &m;
    }
  }
  const ClassMatch* best = first;
  for (const auto& m : matches) {
    if (m.start < first->start + first->length && m.length > best->length) {
      best = &m;
    }
  }
  return best;
}

}  // namespace

std::string format_evidence(const std::vector<Document>& evidence) {
  if (evidence.empty()) return "(none)";
  std::vector<std::string> lines;
  lines.reserve(evidence.size());
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    const Document& d = evidence[i];
    std::string body = d.title && !d.title->empty() ? *d.title + ": " + d.text : d.text;
    lines.push_back("[" + std::to_string(i + 1) + "] " +
                    truncate_tokens(body, kMaxDocTokens));
  }
  return join(lines, "\n");
}

std::string build_argument_prompt(const Claim& claim,
                                  const std::vector<Document>& evidence,
                                  Stance stance) {
  const std::string_view instruction = stance == Stance::supporting
                                           ? prompts::kStanceSupporting
                                           : prompts::kStanceRefuting;
  return prompts::render(prompts::kArgumentTemplate,
                         {{"claim", claim.text},
                          {"stance_instruction", std::string(instruction)},
                          {"documents", format_evidence(evidence)}});
}

std::string generate_argument(const Claim& claim, const std::vector<Document>& evidence,
                              Stance stance, Gateway& gateway) {
  return gateway.generate_text(std::string(prompts::kSystem),
                               build_argument_prompt(claim, evidence, stance));
}

std::string build_synthesis_prompt(const std::vector<Demonstration>& demos,
                                   const ArgumentPair& args, const Claim& claim,
                                   const std::vector<std::string>& classes) {
  if (classes.empty()) raise("ConfigError", "class list is empty");
  std::vector<std::string> class_names(classes.begin(), classes.end());
  const std::string class_list = join(class_names, ", ");

  std::vector<std::string> blocks;
  blocks.reserve(demos.size() + 1);
  for (const auto& demo : demos) {
    if (!demo.supporting_arg || !demo.refuting_arg) {
      raise("MissingArgument", demo.claim.claim_id);
    }
    blocks.push_back(prompts::render(prompts::kSynthesisBlockTemplate,
                                     {{"claim", demo.claim.text},
                                      {"supporting", *demo.supporting_arg},
                                      {"refuting", *demo.refuting_arg},
                                      {"classes", class_list},
                                      {"label", demo.label}}));
  }

  // target block: the same template cut right after the verdict marker, so
  // the model completes the label slot
  const std::string_view tpl = prompts::kSynthesisBlockTemplate;
  const std::size_t marker_pos = tpl.rfind(kVerdictMarker);
  const std::string_view target_tpl =
      tpl.substr(0, marker_pos + std::char_traits<char>::length(kVerdictMarker));
  blocks.push_back(prompts::render(target_tpl, {{"claim", claim.text},
                                                {"supporting", args.supporting},
                                                {"refuting", args.refuting},
                                                {"classes", class_list}}));
  return join(blocks, "\n\n");
}

std::pair<std::string, ParseStatus> parse_label(const std::string& completion,
                                                const std::vector<std::string>& classes,
                                                const std::string& fallback_class) {
  std::vector<std::string> classes_lower;
  classes_lower.reserve(classes.size());
  for (const auto& c : classes) classes_lower.push_back(lower(c));

  const std::string haystack = lower(completion);
  const std::size_t marker = haystack.rfind(kVerdictMarker);
  if (marker != std::string::npos) {
    const std::string tail =
        haystack.substr(marker + std::char_traits<char>::length(kVerdictMarker));
    if (const ClassMatch* m = pick_match(find_class_matches(tail, classes_lower))) {
      return {classes[m->class_index], ParseStatus::matched};
    }
  }
  if (const ClassMatch* m = pick_match(find_class_matches(haystack, classes_lower))) {
    return {classes[m->class_index], ParseStatus::matched};
  }
  return {fallback_class, ParseStatus::fallback};
}

Verdict predict_verdict(const Claim& claim, const std::vector<Demonstration>& demos,
                        const ArgumentPair& args,
                        const std::vector<std::string>& classes,
                        const std::string& fallback_class, Gateway& gateway) {
  Verdict verdict;
  verdict.claim_id = claim.claim_id;
  verdict.arguments = args;
  for (const auto& d : demos) verdict.demonstrations_used.push_back(d.claim.claim_id);

  const std::string prompt = build_synthesis_prompt(demos, args, claim, classes);
  try {
    verdict.raw_completion = gateway.generate_text(std::string(prompts::kSystem), prompt);
  } catch (const Error& e) {
    if (e.code() != "EmptyCompletion") throw;
    verdict.raw_completion.clear();  // blank answer parses to the fallback label
  }
  auto [label, status] = parse_label(verdict.raw_completion, classes, fallback_class);
  verdict.predicted_label = label;
  verdict.parse_status = status;
  return verdict;
}

std::string build_explanation_prompt(const Claim& claim, const ArgumentPair& args,
                                     const std::string& predicted_label) {
  return prompts::render(prompts::kExplanationTemplate,
                         {{"claim", claim.text},
                          {"label", predicted_label},
                          {"supporting", args.supporting},
                          {"refuting", args.refuting}});
}

std::string generate_explanation(const Claim& claim, const ArgumentPair& args,
                                 const std::string& predicted_label, Gateway& gateway) {
  return gateway.generate_text(std::string(prompts::kSystem),
                               build_explanation_prompt(claim, args, predicted_label));
}

}  // namespace claimcheck
