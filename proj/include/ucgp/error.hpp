#pragma once

#include <stdexcept>
#include <string>

namespace ucgp {

// Coarse failure classes; the CLI maps these onto exit codes.
enum class ErrorKind {
  config,         // malformed or inconsistent configuration / arguments
  missing_input,  // a referenced file does not exist
  runtime,        // anything that fails while doing the work
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& what) { return {ErrorKind::config, what}; }
inline Error missing_input(const std::string& what) { return {ErrorKind::missing_input, what}; }
inline Error runtime_error(const std::string& what) { return {ErrorKind::runtime, what}; }

}  // namespace ucgp
