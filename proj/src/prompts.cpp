#include "claimcheck/prompts.hpp"

namespace claimcheck::prompts {

const std::string_view kSystem =
    "You are a careful assistant for evidence-based fact checking. Follow the "
    "instructions exactly and answer concisely.";

const std::string_view kArgumentTemplate =
    R"(Claim: {claim}

{stance_instruction} Respond with at most 4 sentences.

Documents:
{documents})";

const std::string_view kStanceSupporting =
    "Write a concise argument that supports the claim, using only facts stated "
    "in the documents provided below. If nothing in the documents bears on the "
    "claim, reply exactly: No evidence found to support the claim.";

const std::string_view kStanceRefuting =
    "Write a concise argument that refutes the claim, using only facts stated "
    "in the documents provided below. If nothing in the documents bears on the "
    "claim, reply exactly: No evidence found to refute the claim.";

const std::string_view kSynthesisBlockTemplate =
    R"(Claim: {claim}
Supporting argument: {supporting}
Refuting argument: {refuting}
Based on the claim, its supporting and refuting arguments, it is clear that among {classes}, the claim should be classified as {label}.)";

const std::string_view kExplanationTemplate =
    R"(Claim: {claim}
Verdict: {label}
Supporting argument: {supporting}
Refuting argument: {refuting}

In at most 5 sentences, explain why the verdict follows once both arguments are weighed against each other.)";

std::string render(std::string_view tpl,
                   const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      const std::size_t close = tpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string name(tpl.substr(i + 1, close - i - 1));
        auto it = values.find(name);
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tpl[i];
    ++i;
  }
  return out;
}

}  // namespace claimcheck::prompts
