#include "lada/error.hpp"

namespace lada {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Bounds: return "bounds";
    case ErrorKind::State: return "state";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::DivergenceUndefined: return "divergence-undefined";
    case ErrorKind::UnreachableTarget: return "unreachable-target";
    case ErrorKind::InsufficientPool: return "insufficient-pool";
    case ErrorKind::Policy: return "policy";
    case ErrorKind::Spec: return "spec";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

}  // namespace lada
