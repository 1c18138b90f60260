#pragma once

#include <stdexcept>
#include <string>

namespace ambictrl {

/// Failure categories. The CLI maps these onto exit codes.
enum class ErrorKind {
    Validation,   ///< bad input data or configuration
    Domain,       ///< argument outside the operation's domain
    Convergence,  ///< a solver failed to bracket or converge
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string field, const std::string& message)
        : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    /// Name of the offending input field, empty when not applicable.
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    ErrorKind kind_;
    std::string field_;
};

[[noreturn]] inline void fail_validation(std::string field, const std::string& msg) {
    throw Error(ErrorKind::Validation, std::move(field), msg);
}

[[noreturn]] inline void fail_domain(const std::string& msg) {
    throw Error(ErrorKind::Domain, {}, msg);
}

[[noreturn]] inline void fail_convergence(const std::string& msg) {
    throw Error(ErrorKind::Convergence, {}, msg);
}

}  // namespace ambictrl
