#include "xlprime/error.hpp"

namespace xlp {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::interrupted: return "interrupted";
  }
  return "unknown";
}

}  // namespace xlp
