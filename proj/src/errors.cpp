#include "icepred/errors.hpp"

namespace icepred {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::geometry: return "geometry error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::solver: return "solver error";
    case ErrorKind::nonconvergence: return "nonconvergence";
    case ErrorKind::missing_artifact: return "missing artifact";
    case ErrorKind::io: return "i/o error";
    case ErrorKind::internal: return "internal error";
  }
  return "unknown error";
}

}  // namespace icepred
