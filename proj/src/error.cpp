#include "cfcohort/error.hpp"

namespace cfcohort {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::NonNumericContinuous: return "NonNumericContinuous";
    case ErrorKind::UnknownCategory: return "UnknownCategory";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::MissingValue: return "MissingValue";
    case ErrorKind::InvalidSchema: return "InvalidSchema";
    case ErrorKind::UnbinnableFeature: return "UnbinnableFeature";
    case ErrorKind::SingleClassDataset: return "SingleClassDataset";
    case ErrorKind::ArityMismatch: return "ArityMismatch";
    case ErrorKind::TransportFailure: return "TransportFailure";
    case ErrorKind::MalformedResponse: return "MalformedResponse";
    case ErrorKind::OutOfRangeProbability: return "OutOfRangeProbability";
    case ErrorKind::MixedScheme: return "MixedScheme";
    case ErrorKind::UnknownRow: return "UnknownRow";
    case ErrorKind::UnknownSession: return "UnknownSession";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

bool is_validation_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn:
    case ErrorKind::NonNumericContinuous:
    case ErrorKind::UnknownCategory:
    case ErrorKind::EmptyDataset:
    case ErrorKind::MissingValue:
    case ErrorKind::InvalidSchema:
    case ErrorKind::SingleClassDataset:
    case ErrorKind::ArityMismatch:
    case ErrorKind::InvalidArgument:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

Error Error::with_context(std::string_view context) const {
  return Error(kind_, std::string(context) + ": " + message_);
}

}  // namespace cfcohort
