#include "hasel3ps/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hasel3ps/geometry.hpp"
#include "hasel3ps/hamiltonian.hpp"

namespace hasel3ps {

namespace {

// TR-BDF2 with gamma = 2 - sqrt(2): both stages share the iteration matrix
// W = I - (gamma/2) h J, and the embedded third-order quadrature over the
// nodes {0, gamma, 1} gives the error weights below.
const double kGamma = 2.0 - std::sqrt(2.0);
const double kD = 1.0 - std::sqrt(2.0) / 2.0;  // = gamma / 2
const double kErrW0 = (1.0 - std::sqrt(2.0)) / 3.0;
const double kErrW1 = 1.0 / 3.0;
const double kErrW2 = -(2.0 - std::sqrt(2.0)) / 3.0;
const double kNewtonTol = 0.05;  // fraction of the step tolerance

struct Workspace {
    Eigen::VectorXd ewt;      // error weights
    Eigen::VectorXd f0;       // f at step start
    Eigen::VectorXd fg;       // f at the TR stage
    Eigen::VectorXd f1;       // f at step end
    Eigen::VectorXd z;        // TR stage state
    Eigen::VectorXd ynew;     // step-end state
    Eigen::VectorXd rhs, F, delta, est, scratch;
    Eigen::MatrixXd J, W;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
};

double wrms(const Eigen::VectorXd& v, const Eigen::VectorXd& ewt) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double r = v[i] / ewt[i];
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(v.size()));
}

void fd_jacobian(const OdeFunction& f, double t, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& fy, Eigen::MatrixXd& J,
                 Eigen::VectorXd& scratch, Eigen::VectorXd& ypert) {
    const Eigen::Index n = y.size();
    ypert = y;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = 1e-8 * (1.0 + std::abs(y[j]));
        ypert[j] = y[j] + h;
        f(t, ypert, scratch);
        J.col(j) = (scratch - fy) / h;
        ypert[j] = y[j];
    }
}

// Cubic Hermite on [a, b] from endpoint states and slopes.
void hermite(double s, double a, double b, const Eigen::VectorXd& ya,
             const Eigen::VectorXd& fa, const Eigen::VectorXd& yb,
             const Eigen::VectorXd& fb, Eigen::VectorXd& out) {
    const double w = b - a;
    const double tau = (s - a) / w;
    const double t2 = tau * tau, t3 = t2 * tau;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    const double h10 = t3 - 2.0 * t2 + tau;
    const double h01 = -2.0 * t3 + 3.0 * t2;
    const double h11 = t3 - t2;
    out = h00 * ya + (h10 * w) * fa + h01 * yb + (h11 * w) * fb;
}

}  // namespace

void SolverConfig::validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
        throw std::invalid_argument("SolverConfig: tolerances must be > 0");
    if (max_step < 0.0 || initial_step < 0.0)
        throw std::invalid_argument("SolverConfig: steps must be >= 0");
    if (max_newton_iters < 1)
        throw std::invalid_argument("SolverConfig: max_newton_iters must be >= 1");
    if (abs_scale.size() > 0 && abs_scale.minCoeff() <= 0.0)
        throw std::invalid_argument("SolverConfig: abs_scale entries must be > 0");
}

OdeResult integrate_ode(const OdeFunction& f, const OdeJacobian& jac,
                        const Eigen::VectorXd& x0, double t0, double t1,
                        const SolverConfig& cfg,
                        const std::vector<double>* sample_times) {
    cfg.validate();
    if (!(t1 > t0)) throw std::invalid_argument("integrate_ode: need t1 > t0");
    const Eigen::Index n = x0.size();
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(n);
    if (cfg.abs_scale.size() > 0) {
        if (cfg.abs_scale.size() != n)
            throw std::invalid_argument("integrate_ode: abs_scale size mismatch");
        scale = cfg.abs_scale;
    }
    if (sample_times) {
        for (std::size_t k = 0; k < sample_times->size(); ++k) {
            const double s = (*sample_times)[k];
            if (s < t0 - 1e-12 || s > t1 + 1e-12)
                throw std::invalid_argument("integrate_ode: sample time outside span");
            if (k > 0 && !(s > (*sample_times)[k - 1]))
                throw std::invalid_argument("integrate_ode: sample times must increase");
        }
    }

    OdeResult out;
    std::size_t samp = 0;
    auto emit = [&](double t, const Eigen::VectorXd& x) {
        out.t.push_back(t);
        out.x.push_back(x);
    };

    Workspace ws;
    ws.f0.resize(n);
    ws.fg.resize(n);
    ws.f1.resize(n);
    ws.rhs.resize(n);
    ws.F.resize(n);
    ws.delta.resize(n);
    ws.est.resize(n);
    ws.scratch.resize(n);
    ws.J.resize(n, n);
    ws.W.resize(n, n);

    double t = t0;
    Eigen::VectorXd y = x0;
    try {
        f(t, y, ws.f0);
    } catch (const DomainError& e) {
        throw DomainError(std::string("initial state infeasible: ") + e.what(), t0);
    }
    if (!ws.f0.allFinite())
        throw DomainError("integrate_ode: non-finite derivative at initial state", t0);

    if (sample_times) {
        while (samp < sample_times->size() && (*sample_times)[samp] <= t0)
            emit((*sample_times)[samp++], y);
    } else {
        emit(t0, y);
    }

    const double span = t1 - t0;
    const double hmax = cfg.max_step > 0.0 ? std::min(cfg.max_step, span) : span;
    const double tiny = 4.0 * std::numeric_limits<double>::epsilon() *
                        std::max({std::abs(t0), std::abs(t1), 1.0});

    ws.ewt = cfg.abs_tol * scale + cfg.rel_tol * y.cwiseAbs();
    double h;
    if (cfg.initial_step > 0.0) {
        h = cfg.initial_step;
    } else {
        const double fn = wrms(ws.f0, ws.ewt);
        h = std::min({hmax, 1e-2 / std::max(fn, 1e-8)});
    }
    h = std::min(std::max(h, tiny * 16.0), hmax);

    auto eval_jacobian = [&](double tj, const Eigen::VectorXd& yj,
                             const Eigen::VectorXd& fyj) {
        if (jac) {
            jac(tj, yj, ws.J);
        } else {
            Eigen::VectorXd ypert(n);
            fd_jacobian(f, tj, yj, fyj, ws.J, ws.scratch, ypert);
        }
    };

    // Solves z - a f(tz, z) = rhs with the shared LU of W; z holds the
    // predictor on entry and the solution on success, fz the matching f.
    auto newton = [&](double tz, double a, const Eigen::VectorXd& rhs,
                      Eigen::VectorXd& z, Eigen::VectorXd& fz) -> bool {
        double prev = std::numeric_limits<double>::infinity();
        for (int it = 0; it < cfg.max_newton_iters; ++it) {
            f(tz, z, fz);
            if (!fz.allFinite()) return false;
            ws.F = z - a * fz - rhs;
            ws.delta = ws.lu.solve(-ws.F);
            if (!ws.delta.allFinite()) return false;
            z += ws.delta;
            const double dn = wrms(ws.delta, ws.ewt);
            if (dn <= kNewtonTol) {
                f(tz, z, fz);
                return fz.allFinite();
            }
            if (it > 0 && dn > 0.9 * prev) return false;
            prev = dn;
        }
        return false;
    };

    int consecutive_failures = 0;
    int domain_streak = 0;
    std::string last_domain_msg;
    bool have_jac = false;
    while (t1 - t > tiny) {
        const double hmin = 16.0 * std::numeric_limits<double>::epsilon() *
                            std::max(std::abs(t), 1.0);
        if (domain_streak > 20)
            throw DomainError("integrate_ode: trajectory left the feasible set: " +
                                  last_domain_msg,
                              t);
        if (h < hmin)
            throw StiffnessFailure("integrate_ode: step size underflow", t);
        if (consecutive_failures > 30)
            throw StiffnessFailure("integrate_ode: repeated step failures", t);
        if (t + 1.05 * h >= t1) h = t1 - t;

        ws.ewt = cfg.abs_tol * scale + cfg.rel_tol * y.cwiseAbs();
        if (!have_jac) {
            eval_jacobian(t, y, ws.f0);
            have_jac = true;
        }
        ws.W = Eigen::MatrixXd::Identity(n, n) - (kD * h) * ws.J;
        ws.lu.compute(ws.W);

        bool ok = true;
        bool domain_hit = false;
        std::string domain_msg;
        const double tg = t + kGamma * h;
        const double tn = t + h;
        try {
            // TR stage to t + gamma h.
            ws.rhs = y + (0.5 * kGamma * h) * ws.f0;
            ws.z = y + (kGamma * h) * ws.f0;
            ok = newton(tg, 0.5 * kGamma * h, ws.rhs, ws.z, ws.fg);

            if (ok) {
                // BDF2 stage to t + h.
                const double w1 = 1.0 / (kGamma * (2.0 - kGamma));
                const double w0 = (1.0 - kGamma) * (1.0 - kGamma) * w1;
                ws.rhs = w1 * ws.z - w0 * y;
                ws.ynew = y + (ws.z - y) / kGamma;
                ok = newton(tn, kD * h, ws.rhs, ws.ynew, ws.f1);
            }
        } catch (const DomainError& e) {
            ok = false;
            domain_hit = true;
            domain_msg = e.what();
        }

        double err = std::numeric_limits<double>::infinity();
        if (ok) {
            ws.est = h * (kErrW0 * ws.f0 + kErrW1 * ws.fg + kErrW2 * ws.f1);
            ws.est = ws.lu.solve(ws.est);  // stiffness filter
            err = ws.est.allFinite() ? wrms(ws.est, ws.ewt)
                                     : std::numeric_limits<double>::infinity();
        }

        if (ok && err <= 1.0) {
            // Emit dense output over (t, t+h] before advancing.
            if (sample_times) {
                while (samp < sample_times->size() &&
                       (*sample_times)[samp] <= tn + tiny) {
                    const double s = std::min((*sample_times)[samp], tn);
                    if (s <= tg)
                        hermite(s, t, tg, y, ws.f0, ws.z, ws.fg, ws.scratch);
                    else
                        hermite(s, tg, tn, ws.z, ws.fg, ws.ynew, ws.f1, ws.scratch);
                    emit((*sample_times)[samp], ws.scratch);
                    ++samp;
                }
            } else {
                emit(tn, ws.ynew);
            }
            t = tn;
            y = ws.ynew;
            ws.f0 = ws.f1;
            have_jac = false;
            ++out.steps_accepted;
            consecutive_failures = 0;
            domain_streak = 0;
            const double factor =
                std::clamp(0.9 * std::pow(std::max(err, 1e-10), -1.0 / 3.0), 0.2, 5.0);
            h = std::min(h * factor, hmax);
        } else {
            ++out.steps_rejected;
            ++consecutive_failures;
            if (domain_hit) {
                ++domain_streak;
                last_domain_msg = domain_msg;
                if (h * 0.5 < hmin)
                    throw DomainError(
                        "integrate_ode: trajectory left the feasible set: " +
                            domain_msg,
                        t);
            } else {
                domain_streak = 0;
            }
            double factor = 0.5;
            if (ok && std::isfinite(err))
                factor = std::clamp(0.9 * std::pow(err, -1.0 / 3.0), 0.1, 0.5);
            h *= factor;
        }
    }

    // Flush samples that coincide with the final time (validated <= t1).
    if (sample_times) {
        while (samp < sample_times->size()) emit((*sample_times)[samp++], y);
    }
    return out;
}

Eigen::VectorXd actuator_state_scales(const SharedConstants& c,
                                      const ActuatorParams& p) {
    const double C2_rest = dynamic_capacitance(0.0, c.L_p, c);
    Eigen::VectorXd s(5);
    s << 1e-2,            // theta [rad]
        c.L_p,            // l_p [m]
        c.inertia(),      // p at ~1 rad/s
        p.C1 * 1e3,       // Q1 at ~1 kV
        C2_rest * 1e3;    // Q2 at ~1 kV
    return s;
}

Eigen::VectorXd system_state_scales(const SharedConstants& c,
                                    const ParamsTriple& params) {
    Eigen::VectorXd s(15);
    for (int i = 0; i < 3; ++i) {
        const Eigen::VectorXd a = actuator_state_scales(c, params[i]);
        for (int r = 0; r < 5; ++r) s[3 * r + i] = a[r];
    }
    return s;
}

Trajectory integrate(const SystemState& x0, const InputSignal& u, double t0,
                     double t1, const ParamsTriple& params,
                     const SharedConstants& c, const SolverConfig& cfg,
                     const std::vector<double>* sample_times) {
    SolverConfig effective = cfg;
    if (effective.abs_scale.size() == 0)
        effective.abs_scale = system_state_scales(c, params);

    OdeFunction f = [&](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
        dx = vector_field(t, SystemState::from_vector(x), params, c, u);
    };
    OdeJacobian jac = [&](double t, const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
        J = vector_field_jacobian(t, SystemState::from_vector(x), params, c, u);
    };

    OdeResult raw = integrate_ode(f, jac, x0.to_vector(), t0, t1, effective,
                                  sample_times);

    Trajectory traj;
    traj.steps_accepted = raw.steps_accepted;
    traj.steps_rejected = raw.steps_rejected;
    traj.times = std::move(raw.t);
    traj.states.reserve(traj.times.size());
    traj.heights.reserve(traj.times.size());
    traj.outputs.reserve(traj.times.size());
    traj.energy.reserve(traj.times.size());
    for (const auto& xv : raw.x) {
        SystemState s = SystemState::from_vector(xv);
        for (int i = 0; i < 3; ++i) {
            const GeomEval g = geom_eval(s.act[i].theta, s.act[i].l_p, c);
            if (g.saturated) traj.le_saturated = true;
        }
        traj.heights.push_back(prismatic_heights(s, c));
        traj.outputs.push_back(output_y(s, params, c));
        traj.energy.push_back(hamiltonian(s, params, c));
        traj.states.push_back(std::move(s));
    }
    return traj;
}

}  // namespace hasel3ps
