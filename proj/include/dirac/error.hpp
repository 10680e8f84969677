#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dirac {

enum class ErrorKind {
    ordering,
    parameter,
    convention,
    singularity,
    degenerate,
    dimension,
    no_solution,
    unsupported,
    config,
};

inline const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ordering: return "ordering";
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::convention: return "convention";
        case ErrorKind::singularity: return "singularity";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::no_solution: return "no_solution";
        case ErrorKind::unsupported: return "unsupported";
        case ErrorKind::config: return "config";
    }
    return "unknown";
}

/// Every failure raised by the library. Carries a machine-readable kind and
/// the name of the module that raised it.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string_view module, const std::string& message)
        : std::runtime_error(message), kind_(kind), module_(module) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& module() const noexcept { return module_; }

private:
    ErrorKind kind_;
    std::string module_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorKind kind, std::string_view module, const std::string& message) {
    throw Error(kind, module, message);
}

inline void require(bool condition, ErrorKind kind, std::string_view module, const char* message) {
    if (!condition) fail(kind, module, message);
}

}  // namespace detail
}  // namespace dirac
