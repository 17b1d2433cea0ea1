#pragma once

#include <stdexcept>
#include <string>

namespace groklab {

// Every failure in the library is reported as an Error carrying a code the
// CLI maps onto exit codes (usage vs. numerical trouble).
enum class ErrorCode {
    ShapeMismatch,
    InvalidSpec,
    InvalidArgument,
    OutOfVocabulary,
    MissingRng,
    EmptyInput,
    DegenerateEmbedding,
    UndefinedMetric,
    NonFinite,
    Io,
    UnknownPreset,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace groklab
