#pragma once

#include <stdexcept>
#include <string>

namespace protoverb {

enum class ErrorKind {
  Shape,       // dimension mismatch between operands
  Degenerate,  // zero-norm vector, empty input where content is required
  Numerical,   // NaN/Inf produced during computation
  Template,    // [MASK]/[SENTENCE] placeholder violations
  Config,      // invalid configuration or missing coverage (e.g. a label with no sentences)
  Parse,       // malformed input file
  Io,          // file system failure
  Usage,       // CLI misuse
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library. The kind drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace protoverb
