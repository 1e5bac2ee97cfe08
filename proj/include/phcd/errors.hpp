#ifndef PHCD_ERRORS_HPP
#define PHCD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace phcd {

/// Configuration or precondition violation detected before any compute.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical backend failure (eigensolver non-convergence, rank collapse, ...).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A Fourier coefficient required by an assembly was not available.
class MissingCoefficientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failure while persisting artifacts.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No cavity mode was found inside the band gap.
class NoInGapModeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace phcd

#endif
