#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfcohort {

enum class ErrorKind {
  // ingestion / validation
  MissingColumn,
  NonNumericContinuous,
  UnknownCategory,
  EmptyDataset,
  MissingValue,
  InvalidSchema,
  // discretizer
  UnbinnableFeature,
  // predictor
  SingleClassDataset,
  ArityMismatch,
  TransportFailure,
  MalformedResponse,
  OutOfRangeProbability,
  // aggregation / session
  MixedScheme,
  UnknownRow,
  UnknownSession,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Validation errors are the caller's fault (bad input files, bad requests);
/// everything else is a runtime failure.
bool is_validation_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

  /// Same error, message prefixed with where it came from.
  Error with_context(std::string_view context) const;

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace cfcohort
