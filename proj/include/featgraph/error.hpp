#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace featgraph {

enum class Errc {
  MalformedDump,
  VocabGap,
  UnsortedActivations,
  DecoderShapeMismatch,
  UnknownFeature,
  NoEligibleFeatures,
  EmptyValues,
  DegenerateGraph,
  MalformedCache,
  MissingDecoder,
  DimensionTooLarge,
  TooFewPoints,
  EmptyTokenList,
  SizeMismatch,
  OverlappingPools,
  VocabMismatch,
  InvalidArgument,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

// Validation errors are caller mistakes (bad arguments or config); everything
// else is a data error. The CLI maps these to exit codes 2 and 3.
bool is_validation_error(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

// Wraps an error with the pipeline stage that raised it, preserving the code.
[[noreturn]] void rethrow_with_stage(std::string_view stage);

}  // namespace featgraph
