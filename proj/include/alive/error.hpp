#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "alive/time.hpp"

namespace alive {

/// Machine-readable failure categories surfaced across the library, the
/// HTTP service (as `error.code`) and the CLI (as exit diagnostics).
enum class ErrorCode {
    invalid_argument,
    parse_error,
    not_found_publication,
    not_found_version,
    not_found_record,
    not_found_backlink,
    rate_limited,
    invalid_state,
    storage_failure,
    corruption,
    provider_failure,
    remote_failure,
};

const char* to_string(ErrorCode code);

/// Domain error. `retry_after` is set for rate-limited operations so the
/// caller can tell the client when the request would be accepted.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}
    Error(ErrorCode code, std::string message, Date retry_after)
        : std::runtime_error(std::move(message)), code_(code), retry_after_(retry_after) {}

    ErrorCode code() const { return code_; }
    const std::optional<Date>& retry_after() const { return retry_after_; }

private:
    ErrorCode code_;
    std::optional<Date> retry_after_;
};

}  // namespace alive
