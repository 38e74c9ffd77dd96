#pragma once

#include <stdexcept>
#include <string>

namespace pufkit {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or parameter value; the message names the offending field.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Index outside a container or oscillator range.
class BoundsError : public Error {
public:
    using Error::Error;
};

// Mismatched lengths (bit vectors, response length vs. code size, ...).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Attempt to create something that already exists (e.g. re-enrolling an id).
class ConflictError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// All CRPs of an entity have been consumed.
class ExhaustedError : public Error {
public:
    using Error::Error;
};

// Protocol step out of order (e.g. verifying a record that was never issued).
class ProtocolError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Connection-level failure; deliberately distinct from an authentication reject.
class TransportError : public Error {
public:
    using Error::Error;
};

// An error message sent by the remote peer ({"type":"error","code":...}).
class RemoteError : public Error {
public:
    RemoteError(std::string code, const std::string& detail)
        : Error(code + ": " + detail), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

}  // namespace pufkit
