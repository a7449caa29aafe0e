#pragma once

#include <stdexcept>
#include <string>

namespace hopforge {

// Exit codes used by the CLI. Library code throws the typed errors below;
// the CLI maps them to these codes.
enum class ExitCode : int {
    ok = 0,
    failure = 1,
    config = 2,
    transport = 3,
    integrity = 4,
};

// Invalid configuration, bad arguments, or malformed requests.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Remote call failed at the transport level (timeouts, non-2xx, refused).
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& msg) : std::runtime_error(msg) {}
};

// Remote call succeeded but the response did not match the wire schema.
class ProtocolError : public TransportError {
public:
    explicit ProtocolError(const std::string& msg) : TransportError(msg) {}
};

// Referential integrity or data-format violations in corpora and datasets.
class IntegrityError : public std::runtime_error {
public:
    explicit IntegrityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Domain preconditions violated (e.g. scoring a question with no gold docs).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failures (non-finite values where finite ones are required).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace hopforge
