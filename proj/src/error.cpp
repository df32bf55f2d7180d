#include "cascadesim/error.hpp"

namespace cascadesim {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidParams: return "invalid-params";
    case ErrorKind::kParseError: return "parse-error";
    case ErrorKind::kRangeError: return "range-error";
    case ErrorKind::kEmptyTrace: return "empty-trace";
    case ErrorKind::kInvalidDistribution: return "invalid-distribution";
    case ErrorKind::kInvalidTarget: return "invalid-target";
    case ErrorKind::kGridOverflow: return "grid-overflow";
    case ErrorKind::kUnderflow: return "underflow";
    case ErrorKind::kConfigInvalid: return "config-invalid";
    case ErrorKind::kConfigParse: return "config-parse";
    case ErrorKind::kTraceMissing: return "trace-missing";
    case ErrorKind::kIo: return "io-error";
    case ErrorKind::kEmptyInput: return "empty-input";
  }
  return "unknown";
}

}  // namespace cascadesim
