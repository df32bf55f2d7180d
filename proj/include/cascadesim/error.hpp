#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cascadesim {

enum class ErrorKind {
  kInvalidParams,
  kParseError,
  kRangeError,
  kEmptyTrace,
  kInvalidDistribution,
  kInvalidTarget,
  kGridOverflow,
  kUnderflow,
  kConfigInvalid,
  kConfigParse,
  kTraceMissing,
  kIo,
  kEmptyInput,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; `kind()` is stable and machine
// readable, `field()` names the offending config path or row when known.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string field = {})
      : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

}  // namespace cascadesim
