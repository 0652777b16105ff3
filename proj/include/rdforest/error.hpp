#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rdforest {

/// Machine-readable error category. The CLI prints it as a prefix and maps
/// it onto an exit code.
enum class ErrorCode {
  kDimension,
  kConfig,
  kEmptySide,
  kSingularDesign,
  kDomain,
  kNumerical,
  kBoundary,
  kPrediction,
  kGeometry,
  kMethod,
  kHarness,
  kIo,
  kParse,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define RDFOREST_DEFINE_ERROR(Name, Code)                                 \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(Code, message) {}  \
  };

RDFOREST_DEFINE_ERROR(DimensionError, ErrorCode::kDimension)
RDFOREST_DEFINE_ERROR(ConfigError, ErrorCode::kConfig)
RDFOREST_DEFINE_ERROR(EmptySideError, ErrorCode::kEmptySide)
RDFOREST_DEFINE_ERROR(SingularDesignError, ErrorCode::kSingularDesign)
RDFOREST_DEFINE_ERROR(DomainError, ErrorCode::kDomain)
RDFOREST_DEFINE_ERROR(NumericalError, ErrorCode::kNumerical)
RDFOREST_DEFINE_ERROR(BoundaryError, ErrorCode::kBoundary)
RDFOREST_DEFINE_ERROR(PredictionError, ErrorCode::kPrediction)
RDFOREST_DEFINE_ERROR(GeometryError, ErrorCode::kGeometry)
RDFOREST_DEFINE_ERROR(MethodError, ErrorCode::kMethod)
RDFOREST_DEFINE_ERROR(HarnessError, ErrorCode::kHarness)
RDFOREST_DEFINE_ERROR(IoError, ErrorCode::kIo)
RDFOREST_DEFINE_ERROR(ParseError, ErrorCode::kParse)

#undef RDFOREST_DEFINE_ERROR

}  // namespace rdforest
