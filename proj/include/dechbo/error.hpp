#pragma once

#include <stdexcept>
#include <string>

namespace dechbo {

/// Caller broke a documented precondition (dimension mismatch, bad index, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Linear algebra gave up: Cholesky failed after jitter escalation, or a
/// posterior variance came out meaningfully negative.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& what, double jitter = 0.0)
        : std::runtime_error(what), jitter_(jitter) {}

    double attempted_jitter() const noexcept { return jitter_; }

private:
    double jitter_;
};

/// Invalid configuration: unknown keys, out-of-range values, logs of nonpositive numbers.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define DECHBO_REQUIRE(cond, msg)                                   \
    do {                                                            \
        if (!(cond)) throw ::dechbo::ContractViolation(msg);        \
    } while (0)

}  // namespace dechbo
