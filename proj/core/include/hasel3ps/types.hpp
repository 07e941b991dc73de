#pragma once

#include <array>
#include <string>

#include <Eigen/Dense>

#include "hasel3ps/errors.hpp"

namespace hasel3ps {

using Vec3 = Eigen::Vector3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec15 = Eigen::Matrix<double, 15, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat15 = Eigen::Matrix<double, 15, 15>;
using Mat15x3 = Eigen::Matrix<double, 15, 3>;

/// Geometric and physical constants shared by all three actuators.
struct SharedConstants {
    double L_p = 0.014;       ///< rest top-film length [m]
    double L_v = 0.012;       ///< bottom film length [m]
    double L_e = 0.020;       ///< electrode length [m]
    double X_h = 0.002;       ///< unzipped-electrode gap [m]
    double m = 0.001133;      ///< actuator mass [kg]
    double eps_r = 2.2;       ///< relative permittivity [-]
    double eps_0 = 8.854e-12; ///< vacuum permittivity [F/m]
    double w = 0.025;         ///< actuator width [m]
    double t = 18e-6;         ///< film thickness [m]
    double g_grav = 9.8;      ///< gravitational acceleration [m/s^2]
    /// Enclosed liquid cross-section area [m^2]. Conservation reads
    /// A_T = A_s + X_h (L_e - l_e), so an interior zip fraction at the rest
    /// geometry needs A_T in (A_s_rest, A_s_rest + X_h L_e) ~ (2.17e-5, 6.17e-5).
    double A_T = 4.0e-5;

    /// Rotational inertia of one actuator, L_v m / 24.
    double inertia() const noexcept { return L_v * m / 24.0; }

    static SharedConstants defaults() { return SharedConstants{}; }

    /// Throws std::invalid_argument on non-positive entries or when A_T
    /// exceeds the largest shell area reachable at the rest film length.
    void validate() const;
};

/// The nine identifiable per-actuator parameters.
struct ActuatorParams {
    double K = 0.25;       ///< film linear stiffness [N/m]
    double K_b = 0.305;    ///< torsional stiffness [N*m/rad]
    double b = 0.129;      ///< damping coefficient [kg*s]
    double R0 = 600.0;     ///< series resistance [ohm]
    double R1 = 99.98;     ///< leakage resistance, static branch [ohm]
    double R2 = 5.385e4;   ///< leakage resistance, dynamic branch [ohm]
    double C1 = 2.15e-10;  ///< static capacitance [F]
    double gamma1 = 118.4; ///< input-gain amplitude [-]
    double gamma2 = 58.0;  ///< input-gain angular factor [-]

    /// Identified values for actuator index 0, 1 or 2.
    static ActuatorParams defaults(int actuator_index = 0);

    /// Throws std::invalid_argument when a parameter that must be positive
    /// is not. gamma1 may be zero (no actuation); gamma2 may be any finite real.
    void validate() const;

    /// Parameter vector in canonical order K, K_b, b, R0, R1, R2, C1, gamma1, gamma2.
    std::array<double, 9> to_array() const noexcept;
    static ActuatorParams from_array(const std::array<double, 9>& a) noexcept;
    static const std::array<std::string, 9>& names();
    static const std::array<std::string, 9>& units();
};

using ParamsTriple = std::array<ActuatorParams, 3>;

/// The three identified parameter sets.
ParamsTriple default_params_triple();

/// Per-actuator state: pouch angle, top-film chord length, angular momentum
/// and the two capacitor charges.
struct ActuatorState {
    double theta = 0.0; ///< [rad]
    double l_p = 0.0;   ///< [m], > 0
    double p = 0.0;     ///< [kg*m^2*rad/s]
    double Q1 = 0.0;    ///< [C]
    double Q2 = 0.0;    ///< [C]

    Vec5 to_vector() const noexcept;
    static ActuatorState from_vector(const Vec5& v) noexcept;

    /// Finite fields, l_p > 0, and the arcsin argument of the internal
    /// angle within [-1, 1] (up to the 1e-12 clamping tolerance).
    bool is_feasible(const SharedConstants& c) const noexcept;
};

/// Stacked state of the three actuators. The flat 15-vector layout is
/// field-major: [theta(3); l_p(3); p(3); Q1(3); Q2(3)], actuator order
/// fixed as 1, 2, 3 in every block.
struct SystemState {
    std::array<ActuatorState, 3> act{};

    Vec15 to_vector() const noexcept;
    static SystemState from_vector(const Vec15& v) noexcept;
    bool is_feasible(const SharedConstants& c) const noexcept;

    /// De-energized rest configuration: theta = 0, l_p = L_p, p = Q1 = Q2 = 0.
    static SystemState rest(const SharedConstants& c) noexcept;
};

/// Pouch geometry and dynamic capacitance at one actuator state, with
/// analytic partial derivatives with respect to theta and l_p.
struct GeomEval {
    double delta1 = 0.0;       ///< internal shell angle [rad]
    double ddelta1_dtheta = 0.0;
    double ddelta1_dlp = 0.0;
    double A_s = 0.0;          ///< shell cross-section area [m^2]
    double dAs_dtheta = 0.0;
    double dAs_dlp = 0.0;
    double l_e = 0.0;          ///< zipped electrode length [m], clamped to [0, L_e]
    double dle_dtheta = 0.0;   ///< zero while the clamp is active
    double dle_dlp = 0.0;
    double C2 = 0.0;           ///< dynamic capacitance [F]
    double dC2_dtheta = 0.0;
    double dC2_dlp = 0.0;
    bool saturated = false;    ///< l_e clamp active at this state
};

}  // namespace hasel3ps
