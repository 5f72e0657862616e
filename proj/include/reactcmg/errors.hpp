#pragma once

#include <stdexcept>
#include <string>

namespace reactcmg {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

/// Retrieval pool is empty after the project/time filters ran. Distinct from a
/// successful retrieval that happens to return fewer candidates than asked.
class NoCandidatesError : public Error {
public:
    explicit NoCandidatesError(const std::string& what_arg) : Error(what_arg) {}
};

/// Transient failure that survived every retry attempt (connect, timeout, 5xx).
class RetryableError : public Error {
public:
    explicit RetryableError(const std::string& what_arg) : Error(what_arg) {}
};

/// Non-retryable configuration problem: bad endpoint, HTTP 4xx, missing key.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what_arg) : Error(what_arg) {}
};

/// Input text contains one of the reserved [QUERY]/[DIFF]/[MSG] markers.
class MarkerCollisionError : public Error {
public:
    explicit MarkerCollisionError(const std::string& what_arg) : Error(what_arg) {}
};

/// Prompt token budget cannot be met even with every truncatable field emptied.
class BudgetError : public Error {
public:
    explicit BudgetError(const std::string& what_arg) : Error(what_arg) {}
};

} // namespace reactcmg
