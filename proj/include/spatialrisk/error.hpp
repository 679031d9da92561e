#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace spatialrisk {

enum class ErrorKind {
    config,       // invalid run configuration or selection
    range,        // index out of range
    schema,       // missing column, label mismatch, width mismatch
    parse,        // malformed cell, date, or document
    join,         // key sets do not line up
    derivation,   // zero denominators while deriving indicators
    state,        // object in the wrong state for the operation
    domain,       // argument outside the mathematical domain
    dimension,    // shape mismatch between operands
    singularity,  // rank-deficient system
    convergence,  // iteration cap reached
    degenerate,   // zero variance, zero scale, empty result
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "configuration error";
        case ErrorKind::range: return "range error";
        case ErrorKind::schema: return "schema error";
        case ErrorKind::parse: return "parse error";
        case ErrorKind::join: return "join error";
        case ErrorKind::derivation: return "derivation error";
        case ErrorKind::state: return "state error";
        case ErrorKind::domain: return "domain error";
        case ErrorKind::dimension: return "dimension error";
        case ErrorKind::singularity: return "singularity error";
        case ErrorKind::convergence: return "convergence error";
        case ErrorKind::degenerate: return "degenerate error";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

protected:
    struct Verbatim {};
    Error(ErrorKind kind, const std::string& what, Verbatim) : std::runtime_error(what), kind_(kind) {}

private:
    ErrorKind kind_;
};

/// Rank deficiency; carries the zero-based index of the first dependent column.
class SingularityError : public Error {
public:
    SingularityError(std::size_t column, const std::string& what)
        : Error(ErrorKind::singularity, what), column_(column) {}

    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

/// A pipeline stage failure; keeps the category of the underlying error.
class StageError : public Error {
public:
    StageError(std::string stage, ErrorKind kind, const std::string& cause)
        : Error(kind, "stage " + stage + " failed: " + cause, Verbatim{}), stage_(std::move(stage)), cause_(cause) {}

    const std::string& stage() const noexcept { return stage_; }
    const std::string& cause() const noexcept { return cause_; }

private:
    std::string stage_;
    std::string cause_;
};

/// Process exit code for an error category: 2 configuration, 3 data/schema, 4 numerical.
inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config:
        case ErrorKind::range:
            return 2;
        case ErrorKind::schema:
        case ErrorKind::parse:
        case ErrorKind::join:
        case ErrorKind::derivation:
        case ErrorKind::state:
            return 3;
        default:
            return 4;
    }
}

}  // namespace spatialrisk
