#include "hasel3ps/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "hasel3ps/geometry.hpp"
#include "hasel3ps/hamiltonian.hpp"

namespace hasel3ps {

InputSignal InputSignal::sinusoid(double u0, double omega, const Vec3& phase_rad) {
    if (!(u0 >= 0.0)) throw std::invalid_argument("InputSignal: U0 must be >= 0");
    InputSignal s;
    s.fn_ = [u0, omega, phase_rad](double t) {
        Vec3 u;
        for (int i = 0; i < 3; ++i) u[i] = u0 * std::sin(omega * t + phase_rad[i]);
        return u;
    };
    return s;
}

InputSignal InputSignal::sampled(std::vector<double> times, std::vector<Vec3> values) {
    if (times.size() != values.size() || times.size() < 2)
        throw std::invalid_argument("InputSignal::sampled: need >= 2 matching samples");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1]))
            throw std::invalid_argument("InputSignal::sampled: times must increase");
    InputSignal s;
    s.fn_ = [t = std::move(times), v = std::move(values)](double q) {
        if (q <= t.front()) return v.front();
        if (q >= t.back()) return v.back();
        const auto it = std::upper_bound(t.begin(), t.end(), q);
        const std::size_t i = static_cast<std::size_t>(it - t.begin());
        const double a = (q - t[i - 1]) / (t[i] - t[i - 1]);
        return ((1.0 - a) * v[i - 1] + a * v[i]).eval();
    };
    return s;
}

Vec3 coupling_d(const SystemState& x, const SharedConstants& c) {
    Vec3 d;
    for (int i = 0; i < 3; ++i)
        d[i] = 2.0 * shell_area(x.act[i].theta, x.act[i].l_p, c) / x.act[i].l_p;
    return d;
}

Vec3 input_gain_ga(const Vec3& theta, const ParamsTriple& params) {
    Vec3 ga;
    for (int i = 0; i < 3; ++i)
        ga[i] = params[i].gamma1 * std::cos(params[i].gamma2 * theta[i]);
    return ga;
}

Vec5 actuator_field(const Vec5& x, const ActuatorParams& p,
                    const SharedConstants& c, double u) {
    const ActuatorState s = ActuatorState::from_vector(x);
    const Vec5 grad = actuator_energy_grad(s, p, c);
    const double d = 2.0 * shell_area(s.theta, s.l_p, c) / s.l_p;
    const double ga = p.gamma1 * std::cos(p.gamma2 * s.theta);
    const double r0 = 1.0 / p.R0;

    Vec5 dx;
    dx[0] = grad[2];
    dx[1] = d * grad[2];
    dx[2] = -grad[0] - d * grad[1] - p.b * grad[2];
    dx[3] = -(r0 + 1.0 / p.R1) * grad[3] - r0 * grad[4] + r0 * ga * u;
    dx[4] = -r0 * grad[3] - (r0 + 1.0 / p.R2) * grad[4] + r0 * ga * u;
    return dx;
}

Mat5 actuator_field_jacobian(const Vec5& x, const ActuatorParams& p,
                             const SharedConstants& c, double u) {
    Mat5 jac = Mat5::Zero();

    // theta and l_p columns by central differences.
    for (int j = 0; j < 2; ++j) {
        const double h = 1e-7 * (1.0 + std::abs(x[j]));
        Vec5 xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        jac.col(j) = (actuator_field(xp, p, c, u) - actuator_field(xm, p, c, u)) /
                     (2.0 * h);
    }

    const ActuatorState s = ActuatorState::from_vector(x);
    const GeomEval g = geom_eval(s.theta, s.l_p, c);
    const double d = 2.0 * g.A_s / s.l_p;
    const double inv_I = 1.0 / c.inertia();
    const double r0 = 1.0 / p.R0;

    // p column.
    jac(0, 2) = inv_I;
    jac(1, 2) = d * inv_I;
    jac(2, 2) = -p.b * inv_I;

    // Q1 column.
    jac(3, 3) = -(r0 + 1.0 / p.R1) / p.C1;
    jac(4, 3) = -r0 / p.C1;

    // Q2 column; the electrostatic force terms are linear in Q2^2.
    const double inv_C2 = 1.0 / g.C2;
    jac(2, 4) = s.Q2 * inv_C2 * inv_C2 * (g.dC2_dtheta + d * g.dC2_dlp);
    jac(3, 4) = -r0 * inv_C2;
    jac(4, 4) = -(r0 + 1.0 / p.R2) * inv_C2;

    return jac;
}

Vec15 vector_field(double t, const SystemState& x, const ParamsTriple& params,
                   const SharedConstants& c, const InputSignal& u) {
    const Vec3 ut = u(t);
    Vec15 dx;
    for (int i = 0; i < 3; ++i) {
        const Vec5 dxi = actuator_field(x.act[i].to_vector(), params[i], c, ut[i]);
        dx[i] = dxi[0];
        dx[3 + i] = dxi[1];
        dx[6 + i] = dxi[2];
        dx[9 + i] = dxi[3];
        dx[12 + i] = dxi[4];
    }
    return dx;
}

Mat15 vector_field_jacobian(double t, const SystemState& x,
                            const ParamsTriple& params, const SharedConstants& c,
                            const InputSignal& u) {
    const Vec3 ut = u(t);
    Mat15 jac = Mat15::Zero();
    for (int i = 0; i < 3; ++i) {
        const Mat5 ji = actuator_field_jacobian(x.act[i].to_vector(), params[i], c, ut[i]);
        for (int r = 0; r < 5; ++r)
            for (int col = 0; col < 5; ++col) jac(3 * r + i, 3 * col + i) = ji(r, col);
    }
    return jac;
}

Vec3 output_y(const SystemState& x, const ParamsTriple& params,
              const SharedConstants& c) {
    Vec3 theta(x.act[0].theta, x.act[1].theta, x.act[2].theta);
    const Vec3 ga = input_gain_ga(theta, params);
    Vec3 y;
    for (int i = 0; i < 3; ++i) {
        const double C2 = dynamic_capacitance(x.act[i].theta, x.act[i].l_p, c);
        y[i] = (ga[i] / params[i].R0) *
               (x.act[i].Q1 / params[i].C1 + x.act[i].Q2 / C2);
    }
    return y;
}

Vec3 prismatic_heights(const SystemState& x, const SharedConstants& c) {
    Vec3 h;
    for (int i = 0; i < 3; ++i) h[i] = prismatic_height(x.act[i].theta, c);
    return h;
}

double prismatic_height(double theta, const SharedConstants& c) {
    return 0.5 * c.L_v * std::sin(theta);
}

StructureMatrices structure_matrices(const SystemState& x,
                                     const ParamsTriple& params,
                                     const SharedConstants& c) {
    StructureMatrices m;
    const Vec3 d = coupling_d(x, c);
    Vec3 theta(x.act[0].theta, x.act[1].theta, x.act[2].theta);
    const Vec3 ga = input_gain_ga(theta, params);

    for (int i = 0; i < 3; ++i) {
        const int th = i, lp = 3 + i, pr = 6 + i, q1 = 9 + i, q2 = 12 + i;

        // J: theta/p identity coupling and the l_p/p shell coupling.
        m.J(th, pr) = 1.0;
        m.J(pr, th) = -1.0;
        m.J(lp, pr) = d[i];
        m.J(pr, lp) = -d[i];

        // R: mechanical damping and the resistive ladder.
        const double r0 = 1.0 / params[i].R0;
        m.R(pr, pr) = params[i].b;
        m.R(q1, q1) = r0 + 1.0 / params[i].R1;
        m.R(q1, q2) = r0;
        m.R(q2, q1) = r0;
        m.R(q2, q2) = r0 + 1.0 / params[i].R2;

        // G: drive enters both charge balances through R0.
        m.G(q1, i) = r0 * ga[i];
        m.G(q2, i) = r0 * ga[i];
    }
    return m;
}

SystemState equilibrium_state(const ParamsTriple& params, const SharedConstants& c) {
    SystemState s = SystemState::rest(c);
    for (int i = 0; i < 3; ++i) {
        // Newton on K_b theta + (1/2) g L_v m cos(theta) = 0.
        const double w = 0.5 * c.g_grav * c.L_v * c.m;
        double theta = -w / params[i].K_b;
        for (int k = 0; k < 50; ++k) {
            const double f = params[i].K_b * theta + w * std::cos(theta);
            const double df = params[i].K_b - w * std::sin(theta);
            const double step = f / df;
            theta -= step;
            if (std::abs(step) < 1e-17) break;
        }
        s.act[i].theta = theta;
    }
    return s;
}

}  // namespace hasel3ps
