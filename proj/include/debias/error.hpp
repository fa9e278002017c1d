#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace debias {

// Every failure surfaced by the library carries a machine-readable kind so the
// CLI can emit {stage, kind} error records.
enum class ErrorKind {
  FileNotFound,
  MalformedRow,
  InvalidLabel,
  OutOfRange,
  EmptyInput,
  SingularSystem,
  DimensionMismatch,
  TooFewRows,
  RankDeficient,
  ZeroStdError,
  ModelVariantMismatch,
  EmptyScores,
  SingleGroup,
  MismatchedPopulations,
  SchemaError,
  ProvenanceMismatch,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  // The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace debias
