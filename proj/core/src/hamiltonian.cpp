#include "hasel3ps/hamiltonian.hpp"

#include <cmath>

#include "hasel3ps/geometry.hpp"

namespace hasel3ps {

double actuator_energy(const ActuatorState& x, const ActuatorParams& p,
                       const SharedConstants& c) {
    const double C2 = dynamic_capacitance(x.theta, x.l_p, c);
    const double dl = x.l_p - c.L_p;
    return 0.5 * p.K_b * x.theta * x.theta +
           0.5 * c.g_grav * c.L_v * c.m * std::sin(x.theta) +
           0.25 * p.K * dl * dl +
           0.5 * x.p * x.p / c.inertia() +
           0.5 * x.Q1 * x.Q1 / p.C1 +
           0.5 * x.Q2 * x.Q2 / C2;
}

Vec5 actuator_energy_grad(const ActuatorState& x, const ActuatorParams& p,
                          const SharedConstants& c) {
    const GeomEval g = geom_eval(x.theta, x.l_p, c);
    const double inv_C2 = 1.0 / g.C2;
    // d/dxi of Q2^2 / (2 C2) = -(Q2^2 / 2) C2^-2 dC2/dxi
    const double electro = -0.5 * x.Q2 * x.Q2 * inv_C2 * inv_C2;

    Vec5 grad;
    grad[0] = p.K_b * x.theta + 0.5 * c.g_grav * c.L_v * c.m * std::cos(x.theta) +
              electro * g.dC2_dtheta;
    grad[1] = 0.5 * p.K * (x.l_p - c.L_p) + electro * g.dC2_dlp;
    grad[2] = x.p / c.inertia();
    grad[3] = x.Q1 / p.C1;
    grad[4] = x.Q2 * inv_C2;
    return grad;
}

double hamiltonian(const SystemState& x, const ParamsTriple& params,
                   const SharedConstants& c) {
    double h = 0.0;
    for (int i = 0; i < 3; ++i) h += actuator_energy(x.act[i], params[i], c);
    return h;
}

Vec15 grad_hamiltonian(const SystemState& x, const ParamsTriple& params,
                       const SharedConstants& c) {
    Vec15 grad;
    for (int i = 0; i < 3; ++i) {
        const Vec5 g = actuator_energy_grad(x.act[i], params[i], c);
        grad[i] = g[0];
        grad[3 + i] = g[1];
        grad[6 + i] = g[2];
        grad[9 + i] = g[3];
        grad[12 + i] = g[4];
    }
    return grad;
}

}  // namespace hasel3ps
