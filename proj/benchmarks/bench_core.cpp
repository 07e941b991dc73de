#include <benchmark/benchmark.h>

#include <random>

#include "hasel3ps/dynamics.hpp"
#include "hasel3ps/geometry.hpp"
#include "hasel3ps/hamiltonian.hpp"
#include "hasel3ps/identification.hpp"
#include "hasel3ps/integrator.hpp"
#include "hasel3ps/kinematics.hpp"

using namespace hasel3ps;

namespace {
const SharedConstants kC = SharedConstants::defaults();
const ParamsTriple kP = default_params_triple();

SystemState operating_state() {
    SystemState s = SystemState::rest(kC);
    for (int i = 0; i < 3; ++i) {
        s.act[i].theta = 0.01 * (i + 1);
        s.act[i].p = kC.inertia() * 0.1;
        s.act[i].Q1 = kP[i].C1 * 200.0;
        s.act[i].Q2 = dynamic_capacitance(0.0, kC.L_p, kC) * 200.0;
    }
    return s;
}
}  // namespace

static void BM_GeomEval(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(geom_eval(0.02, 0.0141, kC));
}
BENCHMARK(BM_GeomEval);

static void BM_GradHamiltonian(benchmark::State& state) {
    const SystemState s = operating_state();
    for (auto _ : state) benchmark::DoNotOptimize(grad_hamiltonian(s, kP, kC));
}
BENCHMARK(BM_GradHamiltonian);

static void BM_VectorField(benchmark::State& state) {
    const SystemState s = operating_state();
    const InputSignal u = InputSignal::sinusoid(60.0, 3.0 * M_PI);
    for (auto _ : state)
        benchmark::DoNotOptimize(vector_field(0.1, s, kP, kC, u));
}
BENCHMARK(BM_VectorField);

static void BM_VectorFieldJacobian(benchmark::State& state) {
    const SystemState s = operating_state();
    const InputSignal u = InputSignal::sinusoid(60.0, 3.0 * M_PI);
    for (auto _ : state)
        benchmark::DoNotOptimize(vector_field_jacobian(0.1, s, kP, kC, u));
}
BENCHMARK(BM_VectorFieldJacobian);

static void BM_StructureMatrices(benchmark::State& state) {
    const SystemState s = operating_state();
    for (auto _ : state) benchmark::DoNotOptimize(structure_matrices(s, kP, kC));
}
BENCHMARK(BM_StructureMatrices);

static void BM_FkmIkmRoundTrip(benchmark::State& state) {
    const PlatformGeometry geom = PlatformGeometry::equilateral(0.023, 0.05);
    const Vec3 h(1e-4, -2e-4, 5e-5);
    for (auto _ : state) benchmark::DoNotOptimize(ikm(fkm(h, geom).position, geom));
}
BENCHMARK(BM_FkmIkmRoundTrip);

static void BM_IntegrateDrivenTenthSecond(benchmark::State& state) {
    const SystemState x0 = SystemState::rest(kC);
    const InputSignal u = InputSignal::sinusoid(60.0, 3.0 * M_PI);
    SolverConfig cfg;
    for (auto _ : state)
        benchmark::DoNotOptimize(integrate(x0, u, 0.0, 0.1, kP, kC, cfg));
}
BENCHMARK(BM_IntegrateDrivenTenthSecond);

static void BM_ResidualEvaluation(benchmark::State& state) {
    IdentProblem prob;
    const long n = 500;
    prob.t.resize(n + 1);
    for (long k = 0; k <= n; ++k) prob.t[static_cast<std::size_t>(k)] = k * 1e-3;
    prob.u = [](double t) { return 60.0 * std::sin(3.0 * M_PI * t); };
    prob.consts = kC;
    prob.initial_guess = kP[0];
    prob.h_meas = Eigen::VectorXd::Zero(n + 1);
    prob.h_meas = simulate_heights(kP[0], prob, prob.solver);
    ActuatorParams cand = kP[0];
    cand.b *= 1.1;
    for (auto _ : state)
        benchmark::DoNotOptimize(residuals(cand, prob, prob.solver));
}
BENCHMARK(BM_ResidualEvaluation);

BENCHMARK_MAIN();
