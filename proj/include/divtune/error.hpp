#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace divtune {

// All library failures are reported as Error. `code` is a short machine
// readable tag ("invalid_request", "infeasible", ...) that the CLI and the
// HTTP service put into their error documents.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace divtune
