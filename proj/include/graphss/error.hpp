#pragma once
// Error taxonomy. ValidationError covers bad configuration, malformed input
// files, and precondition violations (CLI exit code 2); RuntimeFailure covers
// failures during computation such as divergence (CLI exit code 3).

#include <stdexcept>
#include <string>

namespace graphss {

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace graphss
