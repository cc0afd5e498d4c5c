#include "twinsim/errors.hpp"

namespace twinsim {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnknownAsset: return "UnknownAsset";
    case Errc::AlreadyBound: return "AlreadyBound";
    case Errc::FidelityMismatch: return "FidelityMismatch";
    case Errc::UnknownAttribute: return "UnknownAttribute";
    case Errc::UnknownTwin: return "UnknownTwin";
    case Errc::CycleWouldForm: return "CycleWouldForm";
    case Errc::HasChildren: return "HasChildren";
    case Errc::MissingSourceKey: return "MissingSourceKey";
    case Errc::EmptyChildSet: return "EmptyChildSet";
    case Errc::NonNumericValue: return "NonNumericValue";
    case Errc::InvalidGraph: return "InvalidGraph";
    case Errc::MissingDuration: return "MissingDuration";
    case Errc::InvalidDistribution: return "InvalidDistribution";
    case Errc::UnsupportedDist: return "UnsupportedDist";
    case Errc::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::DegenerateComponent: return "DegenerateComponent";
    case Errc::ExtrapolationRefused: return "ExtrapolationRefused";
    case Errc::ComponentCountMismatch: return "ComponentCountMismatch";
    case Errc::EngineStopped: return "EngineStopped";
    case Errc::UnknownDevice: return "UnknownDevice";
    case Errc::UnknownLink: return "UnknownLink";
    case Errc::NoPath: return "NoPath";
    case Errc::MissingModelForLoad: return "MissingModelForLoad";
    case Errc::EmptySamples: return "EmptySamples";
    case Errc::SchemaError: return "SchemaError";
  }
  return "UnknownError";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

void raise(Errc code, const std::string& detail) { throw Error(code, detail); }

}  // namespace twinsim
