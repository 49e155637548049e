#pragma once

#include <stdexcept>
#include <string>

namespace semform {

/// Malformed or inconsistent input data (files, ids, labels, shapes).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine was called outside its domain or degenerated.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A generation backend returned something unusable.
class ProviderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Network-level failure after the retry budget was spent.
class TransportError : public ProviderError {
public:
    TransportError(const std::string& what, int attempts, int last_status)
        : ProviderError(what), attempts_(attempts), last_status_(last_status) {}

    int attempts() const noexcept { return attempts_; }
    /// HTTP status of the last attempt, 0 when no response was received.
    int last_status() const noexcept { return last_status_; }

private:
    int attempts_;
    int last_status_;
};

}  // namespace semform
