#pragma once

#include <stdexcept>
#include <string>

namespace qdioph {

enum class ErrorKind {
  DimensionMismatch,
  InvalidForm,
  ZeroVector,
  PointInKernel,
  NotIsotropic,
  BasePointInvalid,
  NotIsotropicPair,
  DefiniteForm,
  EmptyIntersection,
  NotGoodForm,
  KernelPoint,
  SingularForm,
  NoRationalPoints,
  DegenerateRational,
  TooFewRecords,
  NoFeasibleBall,
  ClosureFailure,
  InvalidArgument,
  Overflow,
  Config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidForm: return "InvalidForm";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::PointInKernel: return "PointInKernel";
    case ErrorKind::NotIsotropic: return "NotIsotropic";
    case ErrorKind::BasePointInvalid: return "BasePointInvalid";
    case ErrorKind::NotIsotropicPair: return "NotIsotropicPair";
    case ErrorKind::DefiniteForm: return "DefiniteForm";
    case ErrorKind::EmptyIntersection: return "EmptyIntersection";
    case ErrorKind::NotGoodForm: return "NotGoodForm";
    case ErrorKind::KernelPoint: return "KernelPoint";
    case ErrorKind::SingularForm: return "SingularForm";
    case ErrorKind::NoRationalPoints: return "NoRationalPoints";
    case ErrorKind::DegenerateRational: return "DegenerateRational";
    case ErrorKind::TooFewRecords: return "TooFewRecords";
    case ErrorKind::NoFeasibleBall: return "NoFeasibleBall";
    case ErrorKind::ClosureFailure: return "ClosureFailure";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace qdioph
