#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qkd {

enum class ErrorCode {
  // signal
  TooShort,
  UnknownWavelet,
  MalformedCoeffs,
  EmptyInput,
  BadN,
  NegativeLambda,
  WindowTooLong,
  // autodiff / models
  ShapeMismatch,
  BadDropoutRate,
  NonScalarLoss,
  BadCheckpoint,
  // quantum
  BadQubitIndex,
  BadReps,
  BadThetaLength,
  NonNormalizedState,
  OutOfRange,
  // distill
  BadTemperature,
  BadLabel,
  BadAlpha,
  RowCountMismatch,
  MissingCheckpoint,
  // optim
  NonFiniteGrad,
  NonFiniteLoss,
  BadGains,
  // evalkit
  ClassTooSmall,
  LengthMismatch,
  Empty,
  IncompleteGrid,
  // io / cli
  ParseError,
  IoError,
  BadSpec,
  BadConfig,
};

std::string_view to_string(ErrorCode code);

/// True for errors that stem from invalid user-supplied settings rather than
/// from data or runtime failures. The CLI maps these to exit code 1.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace qkd
