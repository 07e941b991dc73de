#include "hasel3ps/identification.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hasel3ps/dynamics.hpp"

namespace hasel3ps {

namespace {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

Vec9 to_scaled(const std::array<double, 9>& p, const std::array<bool, 9>& log_scale) {
    Vec9 s;
    for (int j = 0; j < 9; ++j) s[j] = log_scale[j] ? std::log(p[j]) : p[j];
    return s;
}

ActuatorParams to_natural(const Vec9& s, const std::array<bool, 9>& log_scale) {
    std::array<double, 9> p{};
    for (int j = 0; j < 9; ++j) p[j] = log_scale[j] ? std::exp(s[j]) : s[j];
    return ActuatorParams::from_array(p);
}

}  // namespace

double nrmse_fit(const Eigen::VectorXd& measured, const Eigen::VectorXd& simulated) {
    if (measured.size() != simulated.size())
        throw std::invalid_argument("nrmse_fit: series lengths differ");
    if (measured.size() < 2)
        throw std::invalid_argument("nrmse_fit: need at least 2 samples");
    const double mean = measured.mean();
    const double den = (measured.array() - mean).matrix().norm();
    if (!(den > 0.0))
        throw DegenerateSignal("nrmse_fit: measured series is constant");
    return 100.0 * (1.0 - (measured - simulated).norm() / den);
}

void IdentProblem::validate() const {
    if (t.size() < 2)
        throw std::invalid_argument("IdentProblem: need at least 2 samples");
    for (std::size_t k = 1; k < t.size(); ++k)
        if (!(t[k] > t[k - 1]))
            throw std::invalid_argument("IdentProblem: sample times must increase");
    if (static_cast<std::size_t>(h_meas.size()) != t.size())
        throw std::invalid_argument("IdentProblem: h_meas length mismatch");
    if (!h_meas.allFinite())
        throw std::invalid_argument("IdentProblem: h_meas must be finite");
    if (!u) throw std::invalid_argument("IdentProblem: drive signal missing");
    consts.validate();
    initial_guess.validate();
    for (int j = 0; j < 9; ++j)
        if (log_scale[j] && !(initial_guess.to_array()[j] > 0.0))
            throw std::invalid_argument(
                "IdentProblem: log-scaled parameter must start > 0");
}

Eigen::VectorXd simulate_heights(const ActuatorParams& candidate,
                                 const IdentProblem& problem,
                                 const SolverConfig& cfg) {
    candidate.validate();
    SolverConfig eff = cfg;
    if (eff.abs_scale.size() == 0)
        eff.abs_scale = actuator_state_scales(problem.consts, candidate);

    Eigen::VectorXd x0(5);
    x0 << 0.0, problem.consts.L_p, 0.0, 0.0, 0.0;

    const auto& u = problem.u;
    const auto& c = problem.consts;
    OdeFunction f = [&](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
        dx = actuator_field(x, candidate, c, u(t));
    };
    OdeJacobian jac = [&](double t, const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
        J = actuator_field_jacobian(x, candidate, c, u(t));
    };

    const OdeResult raw = integrate_ode(f, jac, x0, problem.t.front(),
                                        problem.t.back(), eff, &problem.t);
    Eigen::VectorXd h(raw.t.size());
    for (std::size_t k = 0; k < raw.x.size(); ++k)
        h[static_cast<Eigen::Index>(k)] = prismatic_height(raw.x[k][0], c);
    return h;
}

Eigen::VectorXd residuals(const ActuatorParams& candidate,
                          const IdentProblem& problem, const SolverConfig& cfg) {
    const Eigen::Index n = problem.h_meas.size();
    try {
        return simulate_heights(candidate, problem, cfg) - problem.h_meas;
    } catch (const DomainError&) {
    } catch (const StiffnessFailure&) {
    } catch (const std::invalid_argument&) {
    }
    // Large-penalty residual so the optimizer survives infeasible candidates.
    const double rms = problem.h_meas.norm() / std::sqrt(static_cast<double>(n));
    return Eigen::VectorXd::Constant(n, 1e3 * std::max(rms, 1e-9));
}

IdentResult identify(const IdentProblem& problem, const LmConfig& lm) {
    problem.validate();
    const auto& log_scale = problem.log_scale;
    const Eigen::Index n = problem.h_meas.size();

    // Bounds mapped into scaled space.
    Vec9 lo = Vec9::Constant(-std::numeric_limits<double>::infinity());
    Vec9 hi = Vec9::Constant(std::numeric_limits<double>::infinity());
    if (problem.bounds) {
        for (int j = 0; j < 9; ++j) {
            const auto [l, h] = (*problem.bounds)[j];
            if (!(l <= h))
                throw std::invalid_argument("identify: empty bound interval");
            if (log_scale[j] && !(l > 0.0))
                throw std::invalid_argument(
                    "identify: lower bound of a log-scaled parameter must be > 0");
            lo[j] = log_scale[j] ? std::log(l) : l;
            hi[j] = log_scale[j] ? std::log(h) : h;
        }
    }
    const auto clip = [&](Vec9 s) {
        for (int j = 0; j < 9; ++j) s[j] = std::clamp(s[j], lo[j], hi[j]);
        return s;
    };

    const auto eval_residuals = [&](const Vec9& s) {
        return residuals(to_natural(s, log_scale), problem, problem.solver);
    };

    // Forward-difference Jacobian in scaled space; columns are independent
    // simulations and run concurrently.
    const auto eval_jacobian = [&](const Vec9& s, const Eigen::VectorXd& r0) {
        Eigen::MatrixXd J(n, 9);
        auto column = [&](int j) {
            double h = lm.fd_step * (1.0 + std::abs(s[j]));
            if (s[j] + h > hi[j]) h = -h;  // stay inside the box
            Vec9 sp = s;
            sp[j] += h;
            return ((eval_residuals(sp) - r0) / h).eval();
        };
        if (lm.parallel_jacobian) {
            std::array<std::future<Eigen::VectorXd>, 9> cols;
            for (int j = 0; j < 9; ++j)
                cols[j] = std::async(std::launch::async, column, j);
            for (int j = 0; j < 9; ++j) J.col(j) = cols[j].get();
        } else {
            for (int j = 0; j < 9; ++j) J.col(j) = column(j);
        }
        return J;
    };

    Vec9 s = clip(to_scaled(problem.initial_guess.to_array(), log_scale));
    Eigen::VectorXd r = eval_residuals(s);
    double cost = 0.5 * r.squaredNorm();
    const double initial_cost = cost;

    IdentResult result;
    result.status = IdentStatus::MaxIterations;
    double lambda = lm.lambda0;
    double nu = 2.0;
    bool any_accepted = false;
    bool done = false;
    Eigen::MatrixXd J;

    int iter = 0;
    for (; iter < lm.max_iterations && !done; ++iter) {
        J = eval_jacobian(s, r);
        const Vec9 g = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() < lm.gradient_tol) {
            result.status = IdentStatus::Converged;
            result.message = "gradient below tolerance";
            break;
        }
        const Mat9 A = J.transpose() * J;
        const double diag_floor = 1e-14 * std::max(1.0, A.diagonal().maxCoeff());
        const Vec9 D = A.diagonal().cwiseMax(diag_floor);

        while (true) {
            Mat9 M = A;
            M.diagonal() += lambda * D;
            const Vec9 delta = M.ldlt().solve(-g);
            if (!delta.allFinite()) {
                lambda *= nu;
                nu *= 2.0;
                if (lambda > 1e15) {
                    result.status = any_accepted ? IdentStatus::Converged
                                                 : IdentStatus::NoProgress;
                    result.message = "trust region collapsed";
                    done = true;
                    break;
                }
                continue;
            }
            if (delta.norm() < lm.step_tol * (1.0 + s.norm())) {
                result.status = IdentStatus::Converged;
                result.message = "step below tolerance";
                done = true;
                break;
            }
            const Vec9 s_try = clip(s + delta);
            const Eigen::VectorXd r_try = eval_residuals(s_try);
            const double cost_try = 0.5 * r_try.squaredNorm();

            if (cost_try < cost) {
                const double predicted = 0.5 * delta.dot(lambda * D.cwiseProduct(delta) - g);
                const double rho = predicted > 0.0 ? (cost - cost_try) / predicted : 1.0;
                const double rel_decrease = (cost - cost_try) / std::max(cost, 1e-300);
                s = s_try;
                r = r_try;
                cost = cost_try;
                any_accepted = true;
                lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
                nu = 2.0;
                if (rel_decrease < lm.cost_decrease_tol) {
                    result.status = IdentStatus::Converged;
                    result.message = "cost decrease below tolerance";
                    done = true;
                }
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if (lambda > 1e15) {
                result.status = any_accepted ? IdentStatus::Converged
                                             : IdentStatus::NoProgress;
                result.message = any_accepted ? "trust region stalled"
                                              : "no progress from the initial guess";
                done = true;
                break;
            }
        }
    }

    result.iterations = iter;
    result.params = to_natural(s, log_scale);
    result.final_cost = cost;
    result.converged = result.status == IdentStatus::Converged;
    if (result.message.empty()) result.message = "iteration cap reached";

    // Fit of the accepted simulation; NaN when even that is unavailable.
    try {
        const Eigen::VectorXd h_sim = problem.h_meas + r;
        result.fit_percent = nrmse_fit(problem.h_meas, h_sim);
    } catch (const DegenerateSignal&) {
        result.fit_percent = std::numeric_limits<double>::quiet_NaN();
    }

    // Gauss-Newton covariance at the solution, mapped to natural space.
    if (n > 9 && result.status != IdentStatus::NoProgress) {
        J = eval_jacobian(s, r);
        const Mat9 A = J.transpose() * J;
        const double sigma2 = 2.0 * cost / static_cast<double>(n - 9);
        const Mat9 cov_s = sigma2 * A.completeOrthogonalDecomposition().pseudoInverse();
        Vec9 chain;
        const auto pnat = result.params.to_array();
        for (int j = 0; j < 9; ++j) chain[j] = log_scale[j] ? pnat[j] : 1.0;
        result.covariance = chain.asDiagonal() * cov_s * chain.asDiagonal();
    }

    // Monotone acceptance: LM only ever accepted descents.
    if (cost > initial_cost) {
        result.message += " (cost above initial guess; this is a bug)";
    }
    return result;
}

HeightsFromTip heights_from_tip(const TimeSeries& tips, const PlatformGeometry& geom) {
    geom.validate();
    const int ix = tips.channel_index("tip_x");
    const int iy = tips.channel_index("tip_y");
    const int iz = tips.channel_index("tip_z");
    if (ix < 0 || iy < 0 || iz < 0)
        throw std::invalid_argument(
            "heights_from_tip: need tip_x, tip_y and tip_z channels");

    HeightsFromTip out;
    out.heights.t = tips.t;
    out.heights.channels = {"h1", "h2", "h3"};
    out.heights.values.resize(tips.rows(), 3);
    out.singular.assign(static_cast<std::size_t>(tips.rows()), 0);

    for (long k = 0; k < tips.rows(); ++k) {
        const Vec3 tip(tips.values(k, ix), tips.values(k, iy), tips.values(k, iz));
        try {
            const Vec3 h = ikm(tip, geom);
            out.heights.values.row(k) = h.transpose();
        } catch (const SingularNormal&) {
            out.singular[static_cast<std::size_t>(k)] = 1;
            ++out.flagged;
            out.heights.values.row(k).setConstant(
                std::numeric_limits<double>::quiet_NaN());
        }
    }
    return out;
}

Eigen::VectorXd detrend_linear(const std::vector<double>& t, const Eigen::VectorXd& y) {
    if (static_cast<std::size_t>(y.size()) != t.size() || t.size() < 2)
        throw std::invalid_argument("detrend_linear: size mismatch");
    const double n = static_cast<double>(t.size());
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        st += t[k];
        sy += y[static_cast<Eigen::Index>(k)];
        stt += t[k] * t[k];
        sty += t[k] * y[static_cast<Eigen::Index>(k)];
    }
    const double det = n * stt - st * st;
    const double slope = (n * sty - st * sy) / det;
    const double offset = (sy - slope * st) / n;
    Eigen::VectorXd out = y;
    for (std::size_t k = 0; k < t.size(); ++k)
        out[static_cast<Eigen::Index>(k)] -= offset + slope * t[k];
    return out;
}

}  // namespace hasel3ps
