#pragma once

#include <stdexcept>
#include <string>

namespace maser {

// Error taxonomy shared by the library and the CLI. Every category string is
// stable and machine-readable; the CLI prints "error: <category>: <message>".
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}
    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config-error", msg) {}
};

struct CutoffError : Error {
    explicit CutoffError(const std::string& msg) : Error("cutoff-too-small", msg) {}
};

struct InvalidStateError : Error {
    explicit InvalidStateError(const std::string& msg) : Error("invalid-state", msg) {}
};

struct StepSizeError : Error {
    explicit StepSizeError(const std::string& msg) : Error("step-size-failure", msg) {}
};

struct FitError : Error {
    explicit FitError(const std::string& msg) : Error("fit-failure", msg) {}
};

struct DegenerateDataError : Error {
    explicit DegenerateDataError(const std::string& msg) : Error("degenerate-data", msg) {}
};

struct DegenerateNullspaceError : Error {
    explicit DegenerateNullspaceError(const std::string& msg)
        : Error("degenerate-nullspace", msg) {}
};

struct ValidityError : Error {
    explicit ValidityError(const std::string& msg) : Error("validity-violated", msg) {}
};

}  // namespace maser
