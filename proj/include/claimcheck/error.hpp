#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace claimcheck {

/// Exception carrying a stable machine-readable code next to the human text.
/// Codes are short PascalCase identifiers ("MissingFile", "DuplicateId", ...)
/// and are what the CLI prints on its `error:` line, so they are part of the
/// tool's contract and asserted by tests.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void raise(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

}  // namespace claimcheck
