#include "featgraph/error.hpp"

#include <exception>

namespace featgraph {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedDump: return "MalformedDump";
    case Errc::VocabGap: return "VocabGap";
    case Errc::UnsortedActivations: return "UnsortedActivations";
    case Errc::DecoderShapeMismatch: return "DecoderShapeMismatch";
    case Errc::UnknownFeature: return "UnknownFeature";
    case Errc::NoEligibleFeatures: return "NoEligibleFeatures";
    case Errc::EmptyValues: return "EmptyValues";
    case Errc::DegenerateGraph: return "DegenerateGraph";
    case Errc::MalformedCache: return "MalformedCache";
    case Errc::MissingDecoder: return "MissingDecoder";
    case Errc::DimensionTooLarge: return "DimensionTooLarge";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::EmptyTokenList: return "EmptyTokenList";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::OverlappingPools: return "OverlappingPools";
    case Errc::VocabMismatch: return "VocabMismatch";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

bool is_validation_error(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::DimensionTooLarge:
    case Errc::TooFewPoints:
    case Errc::SizeMismatch:
    case Errc::UnknownFeature:
    case Errc::OverlappingPools:
      return true;
    default:
      return false;
  }
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), detail_(message) {}

void rethrow_with_stage(std::string_view stage) {
  try {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.detail());
  }
}

}  // namespace featgraph
