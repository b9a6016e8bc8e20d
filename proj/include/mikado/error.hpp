#pragma once

#include <stdexcept>
#include <string>

namespace mikado {

enum class ErrorKind {
    structural,
    parameter,
    domain,
    resolution,
    precondition,
    hypothesis,
    unsupported,
    resource,
    internal
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

const char* kind_name(ErrorKind k);

[[noreturn]] inline void fail(ErrorKind k, const std::string& what) { throw Error(k, what); }

}  // namespace mikado
