#pragma once

#include <stdexcept>
#include <string>

namespace relgat {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
    input = 2,
    numeric = 3,
    convergence = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void input_error(const std::string& what) { throw Error(ErrorKind::input, what); }
[[noreturn]] inline void numeric_error(const std::string& what) { throw Error(ErrorKind::numeric, what); }

} // namespace relgat
