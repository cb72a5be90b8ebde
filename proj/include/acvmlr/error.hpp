#pragma once
#include <stdexcept>
#include <string>

namespace acvmlr {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (shape mismatch, bad label, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

// Every Hessian mode was classified as a zero mode.
class DegenerateHessian : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what)
{
    if (!cond) throw ContractViolation(what);
}

} // namespace detail
} // namespace acvmlr
