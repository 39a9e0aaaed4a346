// ============================================================================
// Error types shared across the pipeline. Each maps to a CLI exit code:
// IoError -> 1, ConfigError -> 2, data errors -> 3, numeric failures -> 4.
// ============================================================================

#pragma once
#include <stdexcept>
#include <string>

namespace ppgaf {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Signal shorter than the requested prefix extension allows.
struct DeficitTooLarge : std::runtime_error {
    explicit DeficitTooLarge(const std::string& msg) : std::runtime_error(msg) {}
};

// A class became empty after balancing / filtering.
struct EmptyClass : std::runtime_error {
    explicit EmptyClass(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StateError : std::runtime_error {
    explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf encountered where training must halt with diagnostics.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TooFewPoints : std::runtime_error {
    explicit TooFewPoints(const std::string& msg) : std::runtime_error(msg) {}
};

struct SplitError : std::runtime_error {
    explicit SplitError(const std::string& msg) : std::runtime_error(msg) {}
};

// Metric has no defined value on the given inputs (single-class data etc.).
struct UndefinedMetric : std::runtime_error {
    explicit UndefinedMetric(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ppgaf
