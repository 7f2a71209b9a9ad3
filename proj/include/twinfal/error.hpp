#pragma once

#include <stdexcept>
#include <string>

namespace twinfal {

// Bad input data, schema violations, malformed files. CLI exit code 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// External twin subprocess misbehaviour (handshake, framing, timeouts). CLI exit code 3.
struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace twinfal
