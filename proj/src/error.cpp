#include "protoverb/error.hpp"

namespace protoverb {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Degenerate: return "degenerate input";
    case ErrorKind::Numerical: return "numerical error";
    case ErrorKind::Template: return "template error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Usage: return "usage error";
  }
  return "error";
}

}  // namespace protoverb
