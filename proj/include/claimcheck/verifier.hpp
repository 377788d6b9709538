#pragma once

#include <string>
#include <utility>
#include <vector>

#include "claimcheck/corpus.hpp"
#include "claimcheck/demos.hpp"
#include "claimcheck/provider.hpp"

namespace claimcheck {

enum class Stance { supporting, refuting };
enum class ParseStatus { matched, fallback };

struct ArgumentPair {
  std::string supporting;
  std::string refuting;
  std::vector<std::string> evidence_doc_ids;  // the reranked evidence, in rank order
};

struct Verdict {
  std::string claim_id;
  std::string predicted_label;
  std::string explanation;
  ArgumentPair arguments;
  std::vector<std::string> demonstrations_used;  // claim_ids in prompt order
  std::string raw_completion;
  ParseStatus parse_status = ParseStatus::fallback;
};

/// "[i] <title>: <text>" lines, one per document in rank order. Each line is
/// whitespace-tokenised and capped at 300 tokens, which also flattens any
/// newlines inside the source text. Empty evidence renders as "(none)".
std::string format_evidence(const std::vector<Document>& evidence);

std::string build_argument_prompt(const Claim& claim,
                                  const std::vector<Document>& evidence,
                                  Stance stance);

/// One generation call; returns the trimmed completion. Evidence does not
/// leak anywhere else: only the argument prompts ever contain document text.
std::string generate_argument(const Claim& claim, const std::vector<Document>& evidence,
                              Stance stance, Gateway& gateway);

/// Demonstration blocks (each closed by its label sentence) followed by the
/// target block, which stops right after "classified as". Blocks are
/// separated by one blank line. Demos must carry both cached arguments
/// (MissingArgument otherwise).
std::string build_synthesis_prompt(const std::vector<Demonstration>& demos,
                                   const ArgumentPair& args, const Claim& claim,
                                   const std::vector<std::string>& classes);

/// Total function: case-insensitive scan for class names after the last
/// "classified as" (longest class wins on overlapping matches), then across
/// the whole completion, then the configured fallback class.
std::pair<std::string, ParseStatus> parse_label(const std::string& completion,
                                                const std::vector<std::string>& classes,
                                                const std::string& fallback_class);

/// Build the synthesis prompt, run it, parse the verdict. The explanation
/// field is left empty; fill it with generate_explanation. An empty
/// completion becomes the fallback label instead of an error.
Verdict predict_verdict(const Claim& claim, const std::vector<Demonstration>& demos,
                        const ArgumentPair& args,
                        const std::vector<std::string>& classes,
                        const std::string& fallback_class, Gateway& gateway);

std::string build_explanation_prompt(const Claim& claim, const ArgumentPair& args,
                                     const std::string& predicted_label);

/// One generation call justifying the verdict from the two arguments.
std::string generate_explanation(const Claim& claim, const ArgumentPair& args,
                                 const std::string& predicted_label, Gateway& gateway);

}  // namespace claimcheck
