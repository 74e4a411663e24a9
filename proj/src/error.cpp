#include "qkd/error.hpp"

namespace qkd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::UnknownWavelet: return "UnknownWavelet";
    case ErrorCode::MalformedCoeffs: return "MalformedCoeffs";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BadN: return "BadN";
    case ErrorCode::NegativeLambda: return "NegativeLambda";
    case ErrorCode::WindowTooLong: return "WindowTooLong";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadDropoutRate: return "BadDropoutRate";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::BadQubitIndex: return "BadQubitIndex";
    case ErrorCode::BadReps: return "BadReps";
    case ErrorCode::BadThetaLength: return "BadThetaLength";
    case ErrorCode::NonNormalizedState: return "NonNormalizedState";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::BadTemperature: return "BadTemperature";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::BadAlpha: return "BadAlpha";
    case ErrorCode::RowCountMismatch: return "RowCountMismatch";
    case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorCode::NonFiniteGrad: return "NonFiniteGrad";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::BadGains: return "BadGains";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::IncompleteGrid: return "IncompleteGrid";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownWavelet:
    case ErrorCode::BadN:
    case ErrorCode::NegativeLambda:
    case ErrorCode::WindowTooLong:
    case ErrorCode::BadDropoutRate:
    case ErrorCode::BadReps:
    case ErrorCode::BadThetaLength:
    case ErrorCode::BadTemperature:
    case ErrorCode::BadAlpha:
    case ErrorCode::BadGains:
    case ErrorCode::ClassTooSmall:
    case ErrorCode::BadSpec:
    case ErrorCode::BadConfig:
      return true;
    default:
      return false;
  }
}

}  // namespace qkd
