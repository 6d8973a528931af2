#pragma once

#include <stdexcept>
#include <string>

namespace speclab {

// Every failure mode carries a distinct code so the CLI can map it to an
// exit status (validation errors -> 2, numerical-stage errors -> 3).
enum class Err {
  // config / precondition violations
  ConfigParse,
  MissingField,
  NotUnimodular,
  NotHyperbolic,
  NonRealMean,
  RadiusExceedsK,
  OddWindow,
  LagTooSmall,
  BadScaling,
  BadEpsilon,
  BadWindowLength,
  TooFewSamples,
  InsufficientData,
  BoxTooSmall,
  WeightOverflow,
  BadXiGrid,
  BadTolerance,
  NonConvexCurve,
  EtaOutOfRange,
  Aliasing,
  NotQuantizable,
  SingularKernel,
  NegativeDamping,
  BadNList,
  BadAlpha,
  BadJobs,
  // numerical-stage failures
  NoGap,
  PowerIterationStall,
  EigFailure,
  CacheCorrupt,
};

inline const char* err_name(Err e) {
  switch (e) {
    case Err::ConfigParse: return "ConfigParse";
    case Err::MissingField: return "MissingField";
    case Err::NotUnimodular: return "NotUnimodular";
    case Err::NotHyperbolic: return "NotHyperbolic";
    case Err::NonRealMean: return "NonRealMean";
    case Err::RadiusExceedsK: return "RadiusExceedsK";
    case Err::OddWindow: return "OddWindow";
    case Err::LagTooSmall: return "LagTooSmall";
    case Err::BadScaling: return "BadScaling";
    case Err::BadEpsilon: return "BadEpsilon";
    case Err::BadWindowLength: return "BadWindowLength";
    case Err::TooFewSamples: return "TooFewSamples";
    case Err::InsufficientData: return "InsufficientData";
    case Err::BoxTooSmall: return "BoxTooSmall";
    case Err::WeightOverflow: return "WeightOverflow";
    case Err::BadXiGrid: return "BadXiGrid";
    case Err::BadTolerance: return "BadTolerance";
    case Err::NonConvexCurve: return "NonConvexCurve";
    case Err::EtaOutOfRange: return "EtaOutOfRange";
    case Err::Aliasing: return "Aliasing";
    case Err::NotQuantizable: return "NotQuantizable";
    case Err::SingularKernel: return "SingularKernel";
    case Err::NegativeDamping: return "NegativeDamping";
    case Err::BadNList: return "BadNList";
    case Err::BadAlpha: return "BadAlpha";
    case Err::BadJobs: return "BadJobs";
    case Err::NoGap: return "NoGap";
    case Err::PowerIterationStall: return "PowerIterationStall";
    case Err::EigFailure: return "EigFailure";
    case Err::CacheCorrupt: return "CacheCorrupt";
  }
  return "Unknown";
}

// True for codes that indicate bad inputs rather than a numerical breakdown.
inline bool is_validation_error(Err e) {
  switch (e) {
    case Err::NoGap:
    case Err::PowerIterationStall:
    case Err::EigFailure:
    case Err::CacheCorrupt:
      return false;
    default:
      return true;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}

  Err code() const { return code_; }
  bool validation() const { return is_validation_error(code_); }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Err code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace speclab
