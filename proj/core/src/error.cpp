#include "pacbandit/error.hpp"

namespace pacbandit {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::SizeLimit: return "size-limit";
    case ErrorKind::AmbiguousOptimum: return "ambiguous-optimum";
    case ErrorKind::DegenerateGap: return "degenerate-gap";
    case ErrorKind::InsufficientSamples: return "insufficient-samples";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::InvariantViolation: return "invariant-violation";
    case ErrorKind::SolverFailure: return "solver-failure";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(to_string(kind)) + ": " + message);
}

}  // namespace pacbandit
