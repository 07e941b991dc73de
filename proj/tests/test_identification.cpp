#include <doctest.h>

#include <cmath>
#include <random>

#include "hasel3ps/identification.hpp"
#include "hasel3ps/kinematics.hpp"
#include "test_support.hpp"

using namespace hasel3ps;

namespace {
const SharedConstants kC = SharedConstants::defaults();

IdentProblem make_problem(double t_end, double dt, const ActuatorParams& truth,
                          double u0 = 60.0, double omega = 3.0 * M_PI) {
    IdentProblem prob;
    const long n = static_cast<long>(std::round(t_end / dt));
    prob.t.resize(static_cast<std::size_t>(n) + 1);
    for (long k = 0; k <= n; ++k) prob.t[static_cast<std::size_t>(k)] = k * dt;
    prob.u = [u0, omega](double t) { return u0 * std::sin(omega * t); };
    prob.consts = kC;
    prob.initial_guess = truth;
    prob.h_meas = simulate_heights(truth, prob, prob.solver);
    return prob;
}
}  // namespace

TEST_CASE("nrmse fit") {
    Eigen::VectorXd m(4), s(4);
    m << 0, 1, 2, 3;
    CHECK(nrmse_fit(m, m) == doctest::Approx(100.0).epsilon(1e-14));
    CHECK(nrmse_fit(m, Eigen::VectorXd::Constant(4, m.mean())) ==
          doctest::Approx(0.0).epsilon(1e-12));
    s << 0, 1, 2, 4;
    CHECK(nrmse_fit(m, s) == doctest::Approx(55.278640450004206).epsilon(1e-13));
    CHECK_THROWS_AS(nrmse_fit(Eigen::VectorXd::Constant(4, 1.0), s), DegenerateSignal);
    CHECK_THROWS_AS(nrmse_fit(m, Eigen::VectorXd::Zero(3)), std::invalid_argument);
    CHECK_THROWS_AS(nrmse_fit(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)),
                    std::invalid_argument);
}

TEST_CASE("nrmse fit is invariant under common affine maps") {
    std::mt19937 rng(951);
    std::uniform_real_distribution<double> uv(-1.0, 1.0), ua(0.1, 5.0);
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd m(20), s(20);
        for (int i = 0; i < 20; ++i) {
            m[i] = uv(rng);
            s[i] = uv(rng);
        }
        const double a = ua(rng), b = uv(rng);
        const double f0 = nrmse_fit(m, s);
        const double f1 = nrmse_fit((a * m.array() + b).matrix(),
                                    (a * s.array() + b).matrix());
        CHECK(f1 == doctest::Approx(f0).epsilon(1e-9));
    }
}

TEST_CASE("residuals: self-consistency is exact") {
    const ActuatorParams truth = ActuatorParams::defaults(0);
    const IdentProblem prob = make_problem(1.0, 2e-3, truth);
    const Eigen::VectorXd r = residuals(truth, prob, prob.solver);
    CHECK(r.norm() == 0.0);
}

TEST_CASE("residuals: zero input gain leaves only the gravity transient") {
    const ActuatorParams truth = ActuatorParams::defaults(0);
    IdentProblem prob = make_problem(1.0, 2e-3, truth);
    ActuatorParams off = truth;
    off.gamma1 = 0.0;
    // log-scaling of gamma1 is impossible at exactly zero
    const Eigen::VectorXd r = residuals(off, prob, prob.solver);
    CHECK((r + prob.h_meas).cwiseAbs().maxCoeff() < 5e-6);
}

TEST_CASE("residuals: perturbed stiffness matches the two-simulation oracle") {
    const ActuatorParams truth = ActuatorParams::defaults(0);
    const IdentProblem prob = make_problem(1.0, 2e-3, truth);
    ActuatorParams pert = truth;
    pert.K *= 1.2;
    const Eigen::VectorXd r = residuals(pert, prob, prob.solver);
    const Eigen::VectorXd oracle =
        simulate_heights(pert, prob, prob.solver) - prob.h_meas;
    CHECK((r - oracle).norm() == 0.0);
    CHECK(r.norm() > 0.0);
}

TEST_CASE("residuals: failed simulations map to the penalty value") {
    const ActuatorParams truth = ActuatorParams::defaults(0);
    const IdentProblem prob = make_problem(0.5, 2e-3, truth);
    const double penalty =
        1e3 * prob.h_meas.norm() / std::sqrt(static_cast<double>(prob.h_meas.size()));

    ActuatorParams invalid = truth;
    invalid.K = -1.0;  // rejected by validation
    Eigen::VectorXd r = residuals(invalid, prob, prob.solver);
    CHECK(r.minCoeff() == r.maxCoeff());
    CHECK(r[0] == doctest::Approx(penalty).epsilon(1e-12));

    ActuatorParams explosive = truth;
    explosive.gamma1 = 1e9;  // drives the state out of the feasible set
    r = residuals(explosive, prob, prob.solver);
    CHECK(r.minCoeff() == r.maxCoeff());
    CHECK(r[0] == doctest::Approx(penalty).epsilon(1e-12));
}

TEST_CASE("identify: truth is a fixed point") {
    const ActuatorParams truth = ActuatorParams::defaults(0);
    const IdentProblem prob = make_problem(1.0, 2e-3, truth);
    const IdentResult res = identify(prob);
    CHECK(res.converged);
    CHECK(res.iterations <= 2);
    CHECK(res.fit_percent > 99.999);
    CHECK(res.final_cost <= 1e-30);
}

TEST_CASE("identify: recovers damping and input gain from a 30% perturbation") {
    const ActuatorParams truth = ActuatorParams::defaults(0);
    IdentProblem prob = make_problem(2.0, 2e-3, truth);
    ActuatorParams guess = truth;
    guess.b *= 0.7;
    guess.gamma1 *= 1.3;
    prob.initial_guess = guess;
    const IdentResult res = identify(prob);
    CHECK(res.fit_percent > 95.0);
    CHECK(std::abs(res.params.b / truth.b - 1.0) < 0.10);
    CHECK(std::abs(res.params.gamma1 / truth.gamma1 - 1.0) < 0.10);
    CHECK(res.final_cost < 0.5 * prob.h_meas.squaredNorm());
}

TEST_CASE("identify: zero-influence parameters keep LM well-posed") {
    const ActuatorParams truth = ActuatorParams::defaults(0);
    IdentProblem prob = make_problem(0.5, 5e-3, truth);
    prob.u = [](double) { return 0.0; };  // unpowered: gains and RC ladder inert
    prob.h_meas = simulate_heights(truth, prob, prob.solver);

    // The gain columns of the finite-difference Jacobian are exactly zero.
    ActuatorParams g2 = truth;
    g2.gamma2 *= 1.0 + 1e-6;
    CHECK((residuals(truth, prob, prob.solver) - residuals(g2, prob, prob.solver))
              .norm() == 0.0);

    // A constant offset forces a few LM steps in the mechanical directions.
    prob.h_meas.array() += 2e-6;
    LmConfig lm;
    lm.max_iterations = 5;
    const IdentResult res = identify(prob, lm);
    const auto est = res.params.to_array();
    for (double v : est) CHECK(std::isfinite(v));
    CHECK(res.params.gamma2 == doctest::Approx(truth.gamma2).epsilon(1e-12));
    CHECK(res.params.gamma1 == doctest::Approx(truth.gamma1).epsilon(1e-12));
    CHECK(res.final_cost <= 0.5 * Eigen::VectorXd::Constant(prob.h_meas.size(), 2e-6)
                                      .squaredNorm() *
                                (1.0 + 1e-9));
}

TEST_CASE("identify: bounds clip the iterates") {
    const ActuatorParams truth = ActuatorParams::defaults(0);
    IdentProblem prob = make_problem(0.2, 5e-3, truth);
    ActuatorParams guess = truth;
    guess.gamma1 = 90.0;
    prob.initial_guess = guess;
    std::array<std::pair<double, double>, 9> bounds;
    const auto tv = truth.to_array();
    for (int j = 0; j < 9; ++j) bounds[j] = {tv[j] * 0.5, tv[j] * 2.0};
    bounds[7] = {100.0, 140.0};  // gamma1
    prob.bounds = bounds;
    LmConfig lm;
    lm.max_iterations = 3;
    const IdentResult res = identify(prob, lm);
    CHECK(res.params.gamma1 >= 100.0 * (1.0 - 1e-12));
    CHECK(res.params.gamma1 <= 140.0 * (1.0 + 1e-12));
}

TEST_CASE("heights_from_tip recovers level heights and flags singular rows") {
    const PlatformGeometry geom = PlatformGeometry::equilateral(0.023, 0.05);
    TimeSeries tips;
    tips.channels = {"tip_x", "tip_y", "tip_z"};
    tips.t = {0.0, 0.1, 0.2, 0.3};
    tips.values.resize(4, 3);
    for (int k = 0; k < 3; ++k) {
        const TipPose pose = fkm(Vec3::Constant(0.0005 * k), geom);
        tips.values.row(k) = pose.position.transpose();
    }
    tips.values.row(3) = Eigen::RowVector3d(0.05, 0.0, 1e-9);  // near-horizontal

    const HeightsFromTip rec = heights_from_tip(tips, geom);
    CHECK(rec.flagged == 1);
    CHECK(rec.singular[3] == 1);
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
            CHECK(rec.heights.values(k, i) ==
                  doctest::Approx(0.0005 * k).epsilon(1e-10));
    CHECK(std::isnan(rec.heights.values(3, 0)));
}

TEST_CASE("detrend removes a linear ramp exactly") {
    std::vector<double> t(50);
    Eigen::VectorXd y(50);
    for (int k = 0; k < 50; ++k) {
        t[static_cast<std::size_t>(k)] = 0.01 * k;
        y[k] = 3.0 - 0.7 * 0.01 * k;
    }
    CHECK(detrend_linear(t, y).cwiseAbs().maxCoeff() < 1e-12);
}
