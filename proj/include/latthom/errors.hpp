#pragma once

#include <stdexcept>
#include <string>

namespace latthom {

struct SolveReport {
    long iterations = 0;
    double final_relative_residual = 0.0;
    bool converged = false;
};

/// Iterative solver failed to reach the requested tolerance.
class NonConvergence : public std::runtime_error {
  public:
    NonConvergence(const std::string& what, SolveReport report)
        : std::runtime_error(what), report(report) {}
    SolveReport report;
};

/// Singular (mass = 0) solve with a right-hand side of nonzero mean.
class IncompatibleRhs : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Dense path requested on a system above the feasibility guard.
class SizeExceeded : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Harnack precondition failed: the field is not a nonnegative subsolution.
class SubsolutionViolation : public std::runtime_error {
  public:
    SubsolutionViolation(const std::string& what, long site)
        : std::runtime_error(what), site(site) {}
    long site;
};

/// A study produced data a slope cannot be fitted to (all zeros, one point, ...).
class DegenerateData : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class MissingReference : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class SizingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace latthom
