#include <doctest.h>

#include <cmath>
#include <random>

#include "hasel3ps/dynamics.hpp"
#include "hasel3ps/geometry.hpp"
#include "hasel3ps/hamiltonian.hpp"
#include "test_support.hpp"

using namespace hasel3ps;

namespace {
const SharedConstants kC = SharedConstants::defaults();
const ParamsTriple kP = default_params_triple();

SystemState uniform_state(double theta, double l_p) {
    SystemState s = SystemState::rest(kC);
    for (auto& a : s.act) {
        a.theta = theta;
        a.l_p = l_p;
    }
    return s;
}
}  // namespace

TEST_CASE("coupling_d analytic cases") {
    const Vec3 flat = coupling_d(uniform_state(0.0, kC.L_v), kC);
    CHECK(flat.cwiseAbs().maxCoeff() < 1e-12);

    const Vec3 bulged = coupling_d(uniform_state(0.0, 2.0 * kC.L_v), kC);
    for (int i = 0; i < 3; ++i)
        CHECK(bulged[i] == doctest::Approx(5.1961524227066319e-3).epsilon(1e-13));

    std::mt19937 rng(921);
    for (int k = 0; k < 100; ++k) {
        const SystemState s = testsup::random_system_state(rng, kC, kP);
        const Vec3 d = coupling_d(s, kC);
        for (int i = 0; i < 3; ++i) {
            const double expected =
                2.0 * shell_area(s.act[i].theta, s.act[i].l_p, kC) / s.act[i].l_p;
            CHECK(d[i] == doctest::Approx(expected).epsilon(1e-14));
        }
    }
}

TEST_CASE("input gain diag") {
    const Vec3 at_zero = input_gain_ga(Vec3::Zero(), kP);
    CHECK(at_zero[0] == doctest::Approx(118.4));
    CHECK(at_zero[1] == doctest::Approx(131.9));
    CHECK(at_zero[2] == doctest::Approx(118.4));

    // gamma2 theta = pi/2 kills the gain.
    Vec3 theta(0.5 * M_PI / kP[0].gamma2, 0.0, 0.0);
    CHECK(std::abs(input_gain_ga(theta, kP)[0]) < 1e-12);

    const Vec3 ga = input_gain_ga(Vec3(0.01, 0.02, 0.03), kP);
    CHECK(ga[0] == doctest::Approx(99.037177749958133).epsilon(1e-14));
    CHECK(ga[1] == doctest::Approx(108.11157355381875).epsilon(1e-14));
    CHECK(ga[2] == doctest::Approx(86.631962074660393).epsilon(1e-14));
}

TEST_CASE("vector field vanishes at the gravity equilibrium") {
    const SystemState eq = equilibrium_state(kP, kC);
    CHECK(eq.act[0].theta == doctest::Approx(-2.1842753577295333e-4).epsilon(1e-10));
    const Vec15 dx = vector_field(0.0, eq, kP, kC, InputSignal::zero());
    CHECK(dx.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single-channel drive charges only one actuator (no gravity)") {
    SharedConstants cg = kC;
    cg.g_grav = 1e-12;  // validate() requires > 0
    const SystemState rest = SystemState::rest(cg);
    const double U0 = 50.0;
    InputSignal u = InputSignal::sampled({0.0, 1.0}, {Vec3(U0, 0, 0), Vec3(U0, 0, 0)});
    const Vec15 dx = vector_field(0.0, rest, kP, cg, u);
    const double expected = U0 * kP[0].gamma1 / kP[0].R0;
    CHECK(dx[9] == doctest::Approx(expected).epsilon(1e-13));   // Q1 of actuator 1
    CHECK(dx[12] == doctest::Approx(expected).epsilon(1e-13));  // Q2 of actuator 1
    for (int i = 0; i < 15; ++i) {
        if (i == 9 || i == 12) continue;
        CHECK(std::abs(dx[i]) < 1e-12 * expected + 1e-12);
    }
}

TEST_CASE("vector field equals the dense structure-matrix route") {
    std::mt19937 rng(922);
    std::uniform_real_distribution<double> uu(-80.0, 80.0);
    for (int k = 0; k < 300; ++k) {
        const SystemState s = testsup::random_system_state(rng, kC, kP);
        const Vec3 uv(uu(rng), uu(rng), uu(rng));
        InputSignal u = InputSignal::sampled({0.0, 1.0}, {uv, uv});

        const Vec15 direct = vector_field(0.0, s, kP, kC, u);
        const StructureMatrices m = structure_matrices(s, kP, kC);
        const Vec15 dense = (m.J - m.R) * grad_hamiltonian(s, kP, kC) + m.G * uv;
        for (int i = 0; i < 15; ++i)
            CHECK(testsup::rel_err(direct[i], dense[i], 1e-20) < 1e-12);
    }
}

TEST_CASE("structure matrices: J skew, R symmetric PSD, G on charge rows only") {
    std::mt19937 rng(923);
    for (int k = 0; k < 300; ++k) {
        const SystemState s = testsup::random_system_state(rng, kC, kP);
        const StructureMatrices m = structure_matrices(s, kP, kC);
        CHECK((m.J + m.J.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((m.R - m.R.transpose()).cwiseAbs().maxCoeff() == 0.0);
        Eigen::SelfAdjointEigenSolver<Mat15> es(m.R);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
        for (int r = 0; r < 9; ++r)
            CHECK(m.G.row(r).cwiseAbs().maxCoeff() == 0.0);
        for (int r = 9; r < 15; ++r) CHECK(m.G.row(r).cwiseAbs().maxCoeff() > 0.0);
    }
}

TEST_CASE("conjugate output") {
    CHECK(output_y(SystemState::rest(kC), kP, kC).cwiseAbs().maxCoeff() == 0.0);

    SystemState s = SystemState::rest(kC);
    s.act[0].Q1 = 2e-8;
    const Vec3 y = output_y(s, kP, kC);
    CHECK(y[0] ==
          doctest::Approx(kP[0].gamma1 * 2e-8 / (kP[0].R0 * kP[0].C1)).epsilon(1e-13));
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 0.0);

    std::mt19937 rng(924);
    for (int k = 0; k < 200; ++k) {
        const SystemState st = testsup::random_system_state(rng, kC, kP);
        const StructureMatrices m = structure_matrices(st, kP, kC);
        const Vec3 dense = m.G.transpose() * grad_hamiltonian(st, kP, kC);
        const Vec3 direct = output_y(st, kP, kC);
        for (int i = 0; i < 3; ++i)
            CHECK(testsup::rel_err(direct[i], dense[i], 1e-20) < 1e-12);
    }
}

TEST_CASE("prismatic heights") {
    CHECK(prismatic_heights(SystemState::rest(kC), kC).cwiseAbs().maxCoeff() == 0.0);
    SystemState s = SystemState::rest(kC);
    for (auto& a : s.act) a.theta = M_PI / 2.0;
    const Vec3 h = prismatic_heights(s, kC);
    for (int i = 0; i < 3; ++i) CHECK(h[i] == doctest::Approx(0.006).epsilon(1e-14));

    SystemState s2 = SystemState::rest(kC);
    s2.act[0].theta = 0.1;
    s2.act[1].theta = 0.2;
    s2.act[2].theta = 0.3;
    const Vec3 h2 = prismatic_heights(s2, kC);
    CHECK(h2[0] == doctest::Approx(5.9900049988096891e-4).epsilon(1e-14));
    CHECK(h2[1] == doctest::Approx(1.1920159847703673e-3).epsilon(1e-14));
    CHECK(h2[2] == doctest::Approx(1.7731212399680375e-3).epsilon(1e-14));
}

TEST_CASE("actuator field jacobian matches finite differences") {
    std::mt19937 rng(925);
    for (int k = 0; k < 100; ++k) {
        const ActuatorState s = testsup::random_actuator_state(rng, kC, kP[0]);
        const Vec5 x = s.to_vector();
        const double u = 40.0;
        const Mat5 J = actuator_field_jacobian(x, kP[0], kC, u);
        for (int j = 0; j < 5; ++j) {
            const double h = 1e-7 * (1.0 + std::abs(x[j]));
            Vec5 xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const Vec5 fd =
                (actuator_field(xp, kP[0], kC, u) - actuator_field(xm, kP[0], kC, u)) /
                (2.0 * h);
            for (int r = 0; r < 5; ++r) {
                // Rows span many orders of magnitude; compare relatively with
                // a floor that ignores exactly-vanishing entries.
                const double scale = std::max({std::abs(J(r, j)), std::abs(fd[r]), 1e-6});
                CHECK(std::abs(J(r, j) - fd[r]) / scale < 2e-4);
            }
        }
    }
}
