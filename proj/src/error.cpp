#include "esdc/error.hpp"

namespace esdc {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::TooFewCoordinates: return "TooFewCoordinates";
        case ErrorCode::NonMonotonic: return "NonMonotonic";
        case ErrorCode::IrregularSpacingDeclaredRegular: return "IrregularSpacingDeclaredRegular";
        case ErrorCode::UnknownDimension: return "UnknownDimension";
        case ErrorCode::EmptySelection: return "EmptySelection";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
        case ErrorCode::MissingMetadata: return "MissingMetadata";
        case ErrorCode::CorruptChunk: return "CorruptChunk";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::MissingSpatialDims: return "MissingSpatialDims";
        case ErrorCode::ConservativeOnIrregularGrid: return "ConservativeOnIrregularGrid";
        case ErrorCode::TargetFinerThanSource: return "TargetFinerThanSource";
        case ErrorCode::NonTemporalCube: return "NonTemporalCube";
        case ErrorCode::DuplicateVariableName: return "DuplicateVariableName";
        case ErrorCode::IncompatibleUnits: return "IncompatibleUnits";
        case ErrorCode::NonPositiveStep: return "NonPositiveStep";
        case ErrorCode::IrregularTimeGrid: return "IrregularTimeGrid";
        case ErrorCode::SpanTooShort: return "SpanTooShort";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::GapsPresent: return "GapsPresent";
        case ErrorCode::WindowTooLarge: return "WindowTooLarge";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::UnknownVariable: return "UnknownVariable";
        case ErrorCode::DuplicateName: return "DuplicateName";
        case ErrorCode::IrregularLatGrid: return "IrregularLatGrid";
        case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
        case ErrorCode::FewerThanTwoComplete: return "FewerThanTwoComplete";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
        case ErrorCode::NotEnoughEligibleCells: return "NotEnoughEligibleCells";
        case ErrorCode::FewerBlocksThanFolds: return "FewerBlocksThanFolds";
        case ErrorCode::NonAnomalyInput: return "NonAnomalyInput";
        case ErrorCode::WindowExceedsDomain: return "WindowExceedsDomain";
        case ErrorCode::UnknownPreset: return "UnknownPreset";
        case ErrorCode::Usage: return "Usage";
    }
    return "UnknownError";
}

}  // namespace esdc
