#pragma once

#include <stdexcept>
#include <string>

namespace hystkin {

// Broad failure categories. The CLI maps these onto its machine-parseable
// exit prefixes (E_IO, E_CONFIG, E_EM, E_UNREACHABLE).
enum class ErrorCategory { io, config, em, unreachable };

// Fine-grained error kinds, one per named failure mode of the library
// operations. Tests match on these.
enum class ErrorKind {
    io_failure,
    bad_format,
    missing_column,
    non_numeric_field,
    ragged_cycles,
    out_of_bounds,
    multiple_turning_points,
    invalid_split,
    bad_config,
    dimension_mismatch,
    non_finite_input,
    degenerate_density,
    too_few_points,
    singular_covariance,
    singular_input_variance,
    empty_branch,
    non_finite_target,
    unreachable,
};

constexpr ErrorCategory category_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::io_failure:
        case ErrorKind::bad_format:
        case ErrorKind::missing_column:
        case ErrorKind::non_numeric_field:
        case ErrorKind::ragged_cycles:
        case ErrorKind::out_of_bounds:
            return ErrorCategory::io;
        case ErrorKind::multiple_turning_points:
        case ErrorKind::invalid_split:
        case ErrorKind::bad_config:
        case ErrorKind::dimension_mismatch:
        case ErrorKind::non_finite_input:
        case ErrorKind::non_finite_target:
            return ErrorCategory::config;
        case ErrorKind::degenerate_density:
        case ErrorKind::too_few_points:
        case ErrorKind::singular_covariance:
        case ErrorKind::singular_input_variance:
        case ErrorKind::empty_branch:
            return ErrorCategory::em;
        case ErrorKind::unreachable:
            return ErrorCategory::unreachable;
    }
    return ErrorCategory::config;
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    ErrorCategory category() const noexcept { return category_of(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace hystkin
