#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace snnconv {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
    Usage = 2,     // bad arguments or configuration
    Data = 3,      // malformed files, shape mismatches, invalid models
    Internal = 4,  // broken invariant inside the engine
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_usage(std::string msg) {
    throw Error(ErrorKind::Usage, std::move(msg));
}
[[noreturn]] inline void throw_data(std::string msg) {
    throw Error(ErrorKind::Data, std::move(msg));
}
[[noreturn]] inline void throw_internal(std::string msg) {
    throw Error(ErrorKind::Internal, std::move(msg));
}

}  // namespace snnconv
