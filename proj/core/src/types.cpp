#include "hasel3ps/types.hpp"

#include <cmath>
#include <stdexcept>

namespace hasel3ps {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void SharedConstants::validate() const {
    require(std::isfinite(L_p) && L_p > 0, "SharedConstants: L_p must be > 0");
    require(std::isfinite(L_v) && L_v > 0, "SharedConstants: L_v must be > 0");
    require(std::isfinite(L_e) && L_e > 0, "SharedConstants: L_e must be > 0");
    require(std::isfinite(X_h) && X_h > 0, "SharedConstants: X_h must be > 0");
    require(std::isfinite(m) && m > 0, "SharedConstants: m must be > 0");
    require(std::isfinite(eps_r) && eps_r > 0, "SharedConstants: eps_r must be > 0");
    require(std::isfinite(eps_0) && eps_0 > 0, "SharedConstants: eps_0 must be > 0");
    require(std::isfinite(w) && w > 0, "SharedConstants: w must be > 0");
    require(std::isfinite(t) && t > 0, "SharedConstants: t must be > 0");
    require(std::isfinite(g_grav) && g_grav > 0, "SharedConstants: g_grav must be > 0");
    require(std::isfinite(A_T) && A_T > 0, "SharedConstants: A_T must be > 0");
    // Largest shell area reachable at the rest film length is L_v L_p / 4.
    require(A_T <= L_v * L_p / 4.0 + 1e-15,
            "SharedConstants: A_T exceeds L_v*L_p/4 (geometrically infeasible)");
}

ActuatorParams ActuatorParams::defaults(int actuator_index) {
    switch (actuator_index) {
        case 0:
            return ActuatorParams{};
        case 1:
            return ActuatorParams{0.200, 0.300, 0.010, 600.0, 112.7, 5.60e4,
                                  2.00e-10, 131.9, 30.5};
        case 2:
            return ActuatorParams{0.250, 0.300, 0.015, 600.0, 100.0, 5.5e4,
                                  2.20e-10, 118.4, 25.0};
        default:
            throw std::out_of_range("ActuatorParams::defaults: index must be 0..2");
    }
}

ParamsTriple default_params_triple() {
    return {ActuatorParams::defaults(0), ActuatorParams::defaults(1),
            ActuatorParams::defaults(2)};
}

void ActuatorParams::validate() const {
    require(std::isfinite(K) && K > 0, "ActuatorParams: K must be > 0");
    require(std::isfinite(K_b) && K_b > 0, "ActuatorParams: K_b must be > 0");
    require(std::isfinite(b) && b > 0, "ActuatorParams: b must be > 0");
    require(std::isfinite(R0) && R0 > 0, "ActuatorParams: R0 must be > 0");
    require(std::isfinite(R1) && R1 > 0, "ActuatorParams: R1 must be > 0");
    require(std::isfinite(R2) && R2 > 0, "ActuatorParams: R2 must be > 0");
    require(std::isfinite(C1) && C1 > 0, "ActuatorParams: C1 must be > 0");
    require(std::isfinite(gamma1) && gamma1 >= 0, "ActuatorParams: gamma1 must be >= 0");
    require(std::isfinite(gamma2), "ActuatorParams: gamma2 must be finite");
}

std::array<double, 9> ActuatorParams::to_array() const noexcept {
    return {K, K_b, b, R0, R1, R2, C1, gamma1, gamma2};
}

ActuatorParams ActuatorParams::from_array(const std::array<double, 9>& a) noexcept {
    ActuatorParams p;
    p.K = a[0];
    p.K_b = a[1];
    p.b = a[2];
    p.R0 = a[3];
    p.R1 = a[4];
    p.R2 = a[5];
    p.C1 = a[6];
    p.gamma1 = a[7];
    p.gamma2 = a[8];
    return p;
}

const std::array<std::string, 9>& ActuatorParams::names() {
    static const std::array<std::string, 9> n = {"K",  "K_b", "b",  "R0",     "R1",
                                                 "R2", "C1",  "gamma1", "gamma2"};
    return n;
}

const std::array<std::string, 9>& ActuatorParams::units() {
    static const std::array<std::string, 9> u = {"N/m", "N*m/rad", "kg*s", "ohm", "ohm",
                                                 "ohm", "F",       "-",    "-"};
    return u;
}

Vec5 ActuatorState::to_vector() const noexcept {
    Vec5 v;
    v << theta, l_p, p, Q1, Q2;
    return v;
}

ActuatorState ActuatorState::from_vector(const Vec5& v) noexcept {
    return ActuatorState{v[0], v[1], v[2], v[3], v[4]};
}

bool ActuatorState::is_feasible(const SharedConstants& c) const noexcept {
    if (!(std::isfinite(theta) && std::isfinite(l_p) && std::isfinite(p) &&
          std::isfinite(Q1) && std::isfinite(Q2)))
        return false;
    if (!(l_p > 0.0)) return false;
    const double s = (c.L_v / l_p) * std::sin((M_PI - theta) / 2.0);
    return std::abs(s) <= 1.0 + 1e-12;
}

Vec15 SystemState::to_vector() const noexcept {
    Vec15 v;
    for (int i = 0; i < 3; ++i) {
        v[i] = act[i].theta;
        v[3 + i] = act[i].l_p;
        v[6 + i] = act[i].p;
        v[9 + i] = act[i].Q1;
        v[12 + i] = act[i].Q2;
    }
    return v;
}

SystemState SystemState::from_vector(const Vec15& v) noexcept {
    SystemState s;
    for (int i = 0; i < 3; ++i)
        s.act[i] = ActuatorState{v[i], v[3 + i], v[6 + i], v[9 + i], v[12 + i]};
    return s;
}

bool SystemState::is_feasible(const SharedConstants& c) const noexcept {
    return act[0].is_feasible(c) && act[1].is_feasible(c) && act[2].is_feasible(c);
}

SystemState SystemState::rest(const SharedConstants& c) noexcept {
    SystemState s;
    for (auto& a : s.act) a = ActuatorState{0.0, c.L_p, 0.0, 0.0, 0.0};
    return s;
}

}  // namespace hasel3ps
