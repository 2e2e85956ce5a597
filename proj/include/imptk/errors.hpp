#pragma once

#include <stdexcept>
#include <string>

namespace imptk {

// Base for everything the toolkit throws. The CLI maps the subclasses onto
// exit codes: ConfigError -> 1, NumericalError -> 2.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed config, unknown key, invalid argument.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Mismatched grids or domain tags between operands.
class MismatchError : public Error {
public:
  using Error::Error;
};

// Singular matrices, divergent simulations, ill-conditioned solves.
class NumericalError : public Error {
public:
  using Error::Error;
};

} // namespace imptk
