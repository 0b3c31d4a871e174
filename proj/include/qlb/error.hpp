#pragma once

#include <stdexcept>
#include <string>

namespace qlb {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (bad argument, mismatched
/// metadata, off-shell momenta, ...).  These indicate bugs or bad inputs,
/// never numerical noise.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Requested a direction decomposition along a zero vector.
class DegenerateDirection : public ContractViolation {
public:
    using ContractViolation::ContractViolation;
};

/// A runtime monitor (trace drift, sector growth, positivity, entropy)
/// left its configured tolerance band.
class MonitorViolation : public Error {
public:
    using Error::Error;
};

/// File format, checksum, or metadata failure while reading/writing
/// containers.
class IoError : public Error {
public:
    using Error::Error;
};

/// Configuration file failed validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

namespace detail {
[[noreturn]] inline void fail_require(const char* expr, const std::string& msg) {
    throw ContractViolation(msg + " [" + expr + "]");
}
} // namespace detail

} // namespace qlb

#define QLB_REQUIRE(cond, msg)                                    \
    do {                                                          \
        if (!(cond)) ::qlb::detail::fail_require(#cond, (msg));   \
    } while (0)
