// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace zslforge {

enum class ErrorCode {
    empty_sentence,
    empty_story,
    unknown_class,
    not_enough_classes,
    shape_mismatch,
    not_scalar_output,
    empty_input,
    untrained_vae,
    no_negatives,
    untrained_classifier,
    config_error,
    missing_class_data,
    leakage_error,
    empty_class,
    overlap_error,
    format_error,
    io_error,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::empty_sentence: return "EmptySentence";
    case ErrorCode::empty_story: return "EmptyStory";
    case ErrorCode::unknown_class: return "UnknownClass";
    case ErrorCode::not_enough_classes: return "NotEnoughClasses";
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::not_scalar_output: return "NotScalarOutput";
    case ErrorCode::empty_input: return "EmptyInput";
    case ErrorCode::untrained_vae: return "UntrainedVae";
    case ErrorCode::no_negatives: return "NoNegatives";
    case ErrorCode::untrained_classifier: return "UntrainedClassifier";
    case ErrorCode::config_error: return "ConfigError";
    case ErrorCode::missing_class_data: return "MissingClassData";
    case ErrorCode::leakage_error: return "LeakageError";
    case ErrorCode::empty_class: return "EmptyClass";
    case ErrorCode::overlap_error: return "OverlapError";
    case ErrorCode::format_error: return "FormatError";
    case ErrorCode::io_error: return "IoError";
    }
    return "Unknown";
}

/// Library-wide exception. Every failure carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

} // namespace zslforge
