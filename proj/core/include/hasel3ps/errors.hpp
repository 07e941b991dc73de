#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace hasel3ps {

/// State left the geometric feasibility region of the pouch model
/// (the arcsin argument of the internal-angle formula exceeded [-1, 1]).
/// When raised during integration, time() is the trajectory time of the
/// violation; otherwise it is NaN.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what,
                         double time = std::numeric_limits<double>::quiet_NaN())
        : std::runtime_error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Adaptive step size underflowed (or the implicit stages stopped
/// converging); time() is where the integration stalled.
class StiffnessFailure : public std::runtime_error {
public:
    StiffnessFailure(const std::string& what, double time)
        : std::runtime_error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Platform corner points are collinear; no plane normal exists.
class DegenerateGeometry : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Estimated platform normal is too close to horizontal for the
/// inverse kinematics height formula.
class SingularNormal : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Measured series is constant; the NRMSE denominator is zero.
class DegenerateSignal : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A forward simulation requested by a higher-level command failed.
class SimulationFailed : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed file or configuration. line() is 1-based, 0 when not tied
/// to a specific line.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what, long line = 0)
        : std::runtime_error(what), line_(line) {}
    long line() const noexcept { return line_; }

private:
    long line_;
};

/// Timestamps are not strictly increasing.
class MonotonicityError : public std::runtime_error {
public:
    MonotonicityError(const std::string& what, double timestamp, long row)
        : std::runtime_error(what), timestamp_(timestamp), row_(row) {}
    double timestamp() const noexcept { return timestamp_; }
    long row() const noexcept { return row_; }

private:
    double timestamp_;
    long row_;
};

}  // namespace hasel3ps
