#include "brainid/error.hpp"

namespace brainid {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::DegenerateGrid: return "DegenerateGrid";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::NonFiniteField: return "NonFiniteField";
    case ErrorCode::NotInvertible: return "NotInvertible";
    case ErrorCode::MissingLabelParams: return "MissingLabelParams";
    case ErrorCode::EmptyLabelSet: return "EmptyLabelSet";
    case ErrorCode::NonPositiveLambda: return "NonPositiveLambda";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::TooSmallForScales: return "TooSmallForScales";
    case ErrorCode::ZeroEstimate: return "ZeroEstimate";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NotASimplex: return "NotASimplex";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::NonPositivePixdim: return "NonPositivePixdim";
    }
    return "Unknown";
}

} // namespace brainid
