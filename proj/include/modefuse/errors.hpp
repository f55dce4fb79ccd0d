#pragma once

#include <stdexcept>
#include <string>

namespace modefuse {

// Exit codes used by the CLI. Library errors map onto these 1:1 so a
// failure category is visible to scripts without parsing stderr.
enum class ExitCode : int {
    ok = 0,
    usage = 1,
    config = 2,
    io = 3,
    backend = 4,
    validation = 5,
};

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual ExitCode exit_code() const { return ExitCode::validation; }
};

struct ValidationError : Error {
    using Error::Error;
    ExitCode exit_code() const override { return ExitCode::validation; }
};

struct ConfigError : Error {
    using Error::Error;
    ExitCode exit_code() const override { return ExitCode::config; }
};

struct IoError : Error {
    using Error::Error;
    ExitCode exit_code() const override { return ExitCode::io; }
};

// Backend failures. The three refinements are distinguishable per contract:
// auth problems never hit the wire, transport problems were retried, and
// malformed replies mean the endpoint spoke but not in the expected dialect.
struct BackendError : Error {
    using Error::Error;
    ExitCode exit_code() const override { return ExitCode::backend; }
};

struct AuthError : BackendError {
    using BackendError::BackendError;
};

struct TransportError : BackendError {
    int attempts = 0;
    TransportError(const std::string& msg, int attempts_)
        : BackendError(msg), attempts(attempts_) {}
};

struct MalformedReplyError : BackendError {
    using BackendError::BackendError;
};

}  // namespace modefuse
