#pragma once

#include <stdexcept>
#include <string>

namespace esdc {

/// Failure categories surfaced by the library. Each value names the first
/// contract violation detected; the exception message carries the detail.
enum class ErrorCode {
    // core model
    TooFewCoordinates,
    NonMonotonic,
    IrregularSpacingDeclaredRegular,
    UnknownDimension,
    EmptySelection,
    MalformedRecord,
    // chunk store
    IoFailure,
    UnsupportedDtype,
    MissingMetadata,
    CorruptChunk,
    OutOfBounds,
    // cubing
    MissingSpatialDims,
    ConservativeOnIrregularGrid,
    TargetFinerThanSource,
    NonTemporalCube,
    DuplicateVariableName,
    IncompatibleUnits,
    // harmonisation
    NonPositiveStep,
    IrregularTimeGrid,
    SpanTooShort,
    GridMismatch,
    GapsPresent,
    WindowTooLarge,
    ParseError,
    UnknownVariable,
    DuplicateName,
    // statistics
    IrregularLatGrid,
    NonPositiveWeight,
    FewerThanTwoComplete,
    // engine
    ShapeMismatch,
    BudgetTooSmall,
    // sampling
    NotEnoughEligibleCells,
    FewerBlocksThanFolds,
    NonAnomalyInput,
    WindowExceedsDomain,
    // cli
    UnknownPreset,
    Usage,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

}  // namespace esdc
