#pragma once

#include <map>
#include <string>
#include <string_view>

namespace claimcheck::prompts {

/// Fixed instruction texts. The same bytes are checked in under
/// assets/prompts/ (one trailing newline added per file); a golden test keeps
/// the two in lockstep.
extern const std::string_view kSystem;
extern const std::string_view kArgumentTemplate;
extern const std::string_view kStanceSupporting;
extern const std::string_view kStanceRefuting;
extern const std::string_view kSynthesisBlockTemplate;
extern const std::string_view kExplanationTemplate;

/// Single left-to-right pass replacing {name} with values.at(name).
/// Placeholders without a binding, and braces inside substituted values, are
/// left untouched.
std::string render(std::string_view tpl,
                   const std::map<std::string, std::string>& values);

}  // namespace claimcheck::prompts
