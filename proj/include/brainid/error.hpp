#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace brainid {

enum class ErrorCode {
    InvalidArgument,
    Io,
    DegenerateGrid,
    GeometryMismatch,
    ChannelMismatch,
    NonFiniteField,
    NotInvertible,
    MissingLabelParams,
    EmptyLabelSet,
    NonPositiveLambda,
    EmptyMask,
    TooSmallForScales,
    ZeroEstimate,
    SingularSystem,
    NotASimplex,
    BadMagic,
    BadHeader,
    UnsupportedDatatype,
    TruncatedData,
    NonPositivePixdim,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library surfaces as this exception; callers switch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace brainid
