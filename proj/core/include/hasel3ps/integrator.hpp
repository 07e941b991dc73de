#pragma once

#include <functional>
#include <vector>

#include "hasel3ps/dynamics.hpp"
#include "hasel3ps/types.hpp"

namespace hasel3ps {

/// Error-control and implicit-solve settings for the stiff integrator.
struct SolverConfig {
    double abs_tol = 1e-3;      ///< absolute tolerance, multiplied per state by abs_scale
    double rel_tol = 1e-3;      ///< relative tolerance
    double max_step = 0.0;      ///< step ceiling [s]; 0 = span only
    double initial_step = 0.0;  ///< first step [s]; 0 = automatic
    int max_newton_iters = 8;   ///< Newton iteration cap per implicit stage

    /// Optional per-state scale; effective absolute tolerance for state i is
    /// abs_tol * abs_scale[i]. Empty = all ones. The typed integrate() fills
    /// physical scales (the 15 states span ~10 orders of magnitude).
    Eigen::VectorXd abs_scale;

    /// Tolerances used for the estimation workflow.
    static SolverConfig identification() { return SolverConfig{}; }
    /// Tight tolerances for property tests and oracle generation.
    static SolverConfig tight() {
        SolverConfig s;
        s.abs_tol = 1e-8;
        s.rel_tol = 1e-8;
        return s;
    }

    void validate() const;
};

/// Right-hand side: f(t, x, dx_out). dx_out is preallocated to x.size().
using OdeFunction =
    std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>;
/// Jacobian d f / d x: jac(t, x, J_out). J_out is preallocated n-by-n.
using OdeJacobian =
    std::function<void(double, const Eigen::VectorXd&, Eigen::MatrixXd&)>;

struct OdeResult {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;
    long steps_accepted = 0;
    long steps_rejected = 0;
};

/// Adaptive TR-BDF2 (one-step, L-stable, order 2) with simplified-Newton
/// stages and cubic-Hermite dense output.
///
/// When sample_times is null the accepted mesh is returned (including t0);
/// otherwise exactly the requested instants are emitted, interpolated with
/// the method's dense output. Sampling never alters step selection.
///
/// jac may be empty; a forward-difference Jacobian is used instead.
/// Throws StiffnessFailure on step-size underflow and DomainError when the
/// trajectory cannot be continued inside the feasible set; both carry the
/// failure time.
OdeResult integrate_ode(const OdeFunction& f, const OdeJacobian& jac,
                        const Eigen::VectorXd& x0, double t0, double t1,
                        const SolverConfig& cfg,
                        const std::vector<double>* sample_times = nullptr);

/// Sampled trajectory of the full system with derived observables.
struct Trajectory {
    std::vector<double> times;
    std::vector<SystemState> states;
    std::vector<Vec3> heights;  ///< prismatic elongations h_p
    std::vector<Vec3> outputs;  ///< conjugate output y
    std::vector<double> energy; ///< Hamiltonian H
    bool le_saturated = false;  ///< any zipped-length clamp activation among samples
    long steps_accepted = 0;
    long steps_rejected = 0;
};

/// Integrate the three-actuator model from x0 over [t0, t1].
Trajectory integrate(const SystemState& x0, const InputSignal& u, double t0,
                     double t1, const ParamsTriple& params,
                     const SharedConstants& c, const SolverConfig& cfg,
                     const std::vector<double>* sample_times = nullptr);

/// Natural magnitudes of the stacked state, used as default abs_tol scales.
Eigen::VectorXd system_state_scales(const SharedConstants& c,
                                    const ParamsTriple& params);
/// Same for the single-actuator 5-state kernel.
Eigen::VectorXd actuator_state_scales(const SharedConstants& c,
                                      const ActuatorParams& p);

}  // namespace hasel3ps
