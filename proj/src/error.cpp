#include "debias/error.hpp"

namespace debias {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::InvalidLabel: return "InvalidLabel";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::ZeroStdError: return "ZeroStdError";
    case ErrorKind::ModelVariantMismatch: return "ModelVariantMismatch";
    case ErrorKind::EmptyScores: return "EmptyScores";
    case ErrorKind::SingleGroup: return "SingleGroup";
    case ErrorKind::MismatchedPopulations: return "MismatchedPopulations";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ProvenanceMismatch: return "ProvenanceMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace debias
