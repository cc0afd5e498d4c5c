#pragma once

#include <stdexcept>
#include <string>

namespace twinsim {

// Stable error codes surfaced by library operations. The CLI maps any
// Error to exit code 1; schema and usage problems map to exit code 2.
enum class Errc {
  DuplicateId,
  UnknownAsset,
  AlreadyBound,
  FidelityMismatch,
  UnknownAttribute,
  UnknownTwin,
  CycleWouldForm,
  HasChildren,
  MissingSourceKey,
  EmptyChildSet,
  NonNumericValue,
  InvalidGraph,
  MissingDuration,
  InvalidDistribution,
  UnsupportedDist,
  StateSpaceTooLarge,
  TooFewSamples,
  DegenerateComponent,
  ExtrapolationRefused,
  ComponentCountMismatch,
  EngineStopped,
  UnknownDevice,
  UnknownLink,
  NoPath,
  MissingModelForLoad,
  EmptySamples,
  SchemaError,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void raise(Errc code, const std::string& detail);

}  // namespace twinsim
