#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hasel3ps/integrator.hpp"
#include "hasel3ps/kinematics.hpp"
#include "hasel3ps/timeseries.hpp"
#include "hasel3ps/types.hpp"

namespace hasel3ps {

/// NRMSE fit percentage, 100 (1 - ||measured - simulated|| / ||measured - mean||).
/// 100 is a perfect fit, 0 matches the mean predictor. Throws
/// DegenerateSignal when measured is constant and std::invalid_argument on
/// length mismatch or fewer than 2 samples.
double nrmse_fit(const Eigen::VectorXd& measured, const Eigen::VectorXd& simulated);

/// One grey-box estimation problem for a single actuator: recorded drive,
/// measured heights at the same instants, constants, and the starting point.
struct IdentProblem {
    std::vector<double> t;               ///< strictly increasing sample times [s]
    std::function<double(double)> u;     ///< drive voltage of this actuator [V]
    Eigen::VectorXd h_meas;              ///< measured heights at t [m]
    SharedConstants consts;
    ActuatorParams initial_guess;
    /// Optimize log(parameter) where true; default everything but gamma2.
    std::array<bool, 9> log_scale = default_log_scale();
    /// Optional box bounds in natural parameter space.
    std::optional<std::array<std::pair<double, double>, 9>> bounds;
    SolverConfig solver = SolverConfig::identification();

    static std::array<bool, 9> default_log_scale() {
        return {true, true, true, true, true, true, true, true, false};
    }
    void validate() const;
};

/// Levenberg-Marquardt settings.
struct LmConfig {
    int max_iterations = 50;
    double gradient_tol = 1e-8;      ///< on ||J^T r||_inf in scaled space
    double cost_decrease_tol = 1e-10;///< relative, between accepted iterates
    double step_tol = 1e-12;         ///< on the scaled step norm
    double lambda0 = 1e-3;
    double fd_step = 1e-6;           ///< relative forward-difference step, scaled space
    bool parallel_jacobian = true;
};

enum class IdentStatus { Converged, MaxIterations, NoProgress };

struct IdentResult {
    ActuatorParams params;
    double fit_percent = 0.0;  ///< NRMSE fit of the height channel
    int iterations = 0;
    double final_cost = 0.0;   ///< (1/2) ||r||^2
    bool converged = false;
    IdentStatus status = IdentStatus::NoProgress;
    /// Gauss-Newton covariance in natural parameter space (canonical order);
    /// NaN when not estimable.
    Eigen::Matrix<double, 9, 9> covariance =
        Eigen::Matrix<double, 9, 9>::Constant(std::numeric_limits<double>::quiet_NaN());
    std::string message;
};

/// Simulated height trace of the 5-state kernel at the problem's sample
/// times, from the de-energized rest state. Throws on simulation failure.
Eigen::VectorXd simulate_heights(const ActuatorParams& candidate,
                                 const IdentProblem& problem,
                                 const SolverConfig& cfg);

/// Residual h_sim - h_meas at the problem's sample times. A failed
/// simulation (stiffness or feasibility breakdown) yields the large-penalty
/// residual 1e3 * rms(h_meas) in every entry instead of throwing.
Eigen::VectorXd residuals(const ActuatorParams& candidate,
                          const IdentProblem& problem, const SolverConfig& cfg);

/// Levenberg-Marquardt estimation of the nine parameters. Monotone
/// acceptance: the returned candidate never costs more than the initial
/// guess. A collapsed trust region at the starting point is reported as
/// IdentStatus::NoProgress rather than thrown.
IdentResult identify(const IdentProblem& problem, const LmConfig& lm = {});

/// Heights reconstructed per sample by the inverse kinematics; samples where
/// the normal is singular are flagged and set to NaN rather than fatal.
struct HeightsFromTip {
    TimeSeries heights;              ///< channels h1, h2, h3
    std::vector<std::uint8_t> singular;
    long flagged = 0;
};
HeightsFromTip heights_from_tip(const TimeSeries& tips, const PlatformGeometry& geom);

/// Least-squares removal of a + b t from a channel (optional preprocessing,
/// off by default in the identification workflow).
Eigen::VectorXd detrend_linear(const std::vector<double>& t, const Eigen::VectorXd& y);

}  // namespace hasel3ps
