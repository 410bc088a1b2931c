#ifndef SLM_ERRORS_HPP_
#define SLM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace slm {

// Usage / configuration problems (bad flags, invalid caps). CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

// Malformed input data (bad brackets, bad model file). CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string &msg) : std::runtime_error(msg) {}
};

// Bracketed-tree syntax errors, with 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string &msg, int line)
      : DataError(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace slm

#endif  // SLM_ERRORS_HPP_
