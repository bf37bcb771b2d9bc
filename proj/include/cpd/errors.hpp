#pragma once

#include <stdexcept>
#include <string>

namespace cpd {

/// Base for all library errors. `code()` is a stable machine-readable tag
/// (e.g. "topology_not_disk", "non_bijective_flattening").
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Malformed input, bad topology, out-of-range arguments. CLI exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

/// Singular systems, flipped elements, failed flows. CLI exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace cpd
