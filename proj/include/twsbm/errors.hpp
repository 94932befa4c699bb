#pragma once

#include <stdexcept>
#include <string>

namespace twsbm {

/// Invalid user-supplied configuration or parameters (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure during estimation (CLI exit code 4).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A (k,l) block whose intercept cannot be estimated: either no pairs are
/// assigned to it, or every response in it is zero.
class BlockError : public NumericalError {
public:
    enum class Kind { Empty, AllZero };

    BlockError(Kind kind, int k, int l)
        : NumericalError(describe(kind, k, l)), kind_(kind), k_(k), l_(l) {}

    Kind kind() const noexcept { return kind_; }
    int k() const noexcept { return k_; }
    int l() const noexcept { return l_; }

private:
    static std::string describe(Kind kind, int k, int l) {
        const std::string where = "(" + std::to_string(k + 1) + "," + std::to_string(l + 1) + ")";
        return kind == Kind::Empty ? "block " + where + " has no node pairs assigned"
                                   : "block " + where + " has only zero responses";
    }

    Kind kind_;
    int k_;
    int l_;
};

}  // namespace twsbm
