#pragma once

#include <functional>
#include <vector>

#include "hasel3ps/types.hpp"

namespace hasel3ps {

/// Per-actuator drive voltage as a function of time. Canonical form is a
/// sinusoid U0 sin(omega t + phi_i) with phases 0, 120 and 240 degrees;
/// recorded drives are carried as sampled series with linear interpolation.
class InputSignal {
public:
    InputSignal() : fn_([](double) { return Vec3::Zero().eval(); }) {}

    static InputSignal zero() { return InputSignal(); }

    /// U0 sin(omega t + phase_i); requires U0 >= 0.
    static InputSignal sinusoid(double u0, double omega,
                                const Vec3& phase_rad = default_phases());

    /// Piecewise-linear interpolation of recorded samples; constant
    /// extrapolation outside [times.front(), times.back()].
    static InputSignal sampled(std::vector<double> times,
                               std::vector<Vec3> values);

    Vec3 operator()(double t) const { return fn_(t); }
    double channel(int i, double t) const { return fn_(t)[i]; }

    static Vec3 default_phases() {
        return Vec3(0.0, 2.0 * M_PI / 3.0, 4.0 * M_PI / 3.0);
    }

private:
    std::function<Vec3(double)> fn_;
};

/// Dense port-Hamiltonian structure operators at one state:
/// J skew-symmetric, R symmetric PSD, G the input map (nonzero only on the
/// Q1/Q2 rows). Assembled explicitly for verification; the vector field
/// itself never materializes them.
struct StructureMatrices {
    Mat15 J = Mat15::Zero();
    Mat15 R = Mat15::Zero();
    Mat15x3 G = Mat15x3::Zero();
};

/// Mechanical coupling diag(2 A_s^i / l_p^i) as its diagonal 3-vector.
Vec3 coupling_d(const SystemState& x, const SharedConstants& c);

/// Input gain diag(gamma1^i cos(gamma2^i theta_i)) as its diagonal 3-vector.
Vec3 input_gain_ga(const Vec3& theta, const ParamsTriple& params);

/// Single-actuator vector field on the 5-state (theta, l_p, p, Q1, Q2)
/// kernel under scalar drive u.
Vec5 actuator_field(const Vec5& x, const ActuatorParams& p,
                    const SharedConstants& c, double u);

/// Jacobian of actuator_field with respect to the state. Electrical and
/// momentum columns are analytic; the theta and l_p columns use central
/// differences.
Mat5 actuator_field_jacobian(const Vec5& x, const ActuatorParams& p,
                             const SharedConstants& c, double u);

/// Full 15-state vector field (J - R) grad H + G u, evaluated per actuator.
Vec15 vector_field(double t, const SystemState& x, const ParamsTriple& params,
                   const SharedConstants& c, const InputSignal& u);

/// Jacobian of vector_field with respect to the stacked state
/// (block-diagonal over actuators).
Mat15 vector_field_jacobian(double t, const SystemState& x,
                            const ParamsTriple& params, const SharedConstants& c,
                            const InputSignal& u);

/// Conjugate (power-dual) output y = G^T grad H, one entry per actuator.
Vec3 output_y(const SystemState& x, const ParamsTriple& params,
              const SharedConstants& c);

/// Vertical prismatic elongation h_p^i = (1/2) L_v sin(theta_i).
Vec3 prismatic_heights(const SystemState& x, const SharedConstants& c);
double prismatic_height(double theta, const SharedConstants& c);

/// Explicit dense J, R, G at one state.
StructureMatrices structure_matrices(const SystemState& x,
                                     const ParamsTriple& params,
                                     const SharedConstants& c);

/// Exact unforced equilibrium: per-actuator theta solving
/// K_b theta + (1/2) g L_v m cos(theta) = 0, with l_p = L_p, p = Q1 = Q2 = 0.
SystemState equilibrium_state(const ParamsTriple& params, const SharedConstants& c);

}  // namespace hasel3ps
