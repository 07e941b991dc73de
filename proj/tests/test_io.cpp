#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hasel3ps/io.hpp"

using namespace hasel3ps;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("hasel3ps_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("default config round-trips canonically") {
    const std::string text = default_config_text();
    const ExperimentConfig cfg = ExperimentConfig::from_json_text(text);
    CHECK(cfg.to_json_text() == text);
    CHECK(cfg.hash == fnv1a_hex(text));
    const ExperimentConfig again = ExperimentConfig::from_json_text(text);
    CHECK(again.hash == cfg.hash);
    CHECK(cfg.excitation.U0 == 60.0);
    CHECK(cfg.constants.A_T == 4.0e-5);
}

TEST_CASE("config schema violations raise ParseError") {
    const std::string text = default_config_text();
    // Unknown key.
    {
        auto j = text;
        j.insert(j.find("\"output_dir\""), "\"bogus\": 1,\n  ");
        CHECK_THROWS_AS(ExperimentConfig::from_json_text(j), ParseError);
    }
    // Missing block.
    {
        const ExperimentConfig cfg = ExperimentConfig::from_json_text(text);
        auto j = nlohmann::json::parse(cfg.to_json_text());
        j.erase("solver");
        CHECK_THROWS_AS(ExperimentConfig::from_json_text(j.dump()), ParseError);
    }
    // Bad z policy.
    {
        auto j = nlohmann::json::parse(text);
        j["data"]["z_policy"] = "guess";
        CHECK_THROWS_AS(ExperimentConfig::from_json_text(j.dump()), ParseError);
    }
    // Not JSON at all.
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("not json"), ParseError);
}

TEST_CASE("dataset loader: happy path, line numbers, monotonicity") {
    const auto dir = temp_dir("loader");
    const auto path = dir / "data.csv";

    spit(path,
         "# comment line\n"
         "t,tip_x,tip_y,tip_z\n"
         "0.0,0.001,0.002,0.05\n"
         "0.1,0.0015,0.0019,0.051\n"
         "0.2,0.0012,0.0021,0.0505\n");
    const TimeSeries ts = load_dataset(path.string());
    CHECK(ts.rows() == 3);
    CHECK(ts.channels.size() == 4);
    CHECK(ts.col("tip_z")[2] == doctest::Approx(0.0505).epsilon(1e-15));

    spit(path, "t,tip_x\n0.0,1\n0.0,2\n");
    CHECK_THROWS_AS(load_dataset(path.string()), MonotonicityError);
    try {
        load_dataset(path.string());
    } catch (const MonotonicityError& e) {
        CHECK(e.row() == 2);
        CHECK(e.timestamp() == 0.0);
    }

    spit(path, "t,tip_x\n0.0,1\n0.1,oops\n");
    try {
        load_dataset(path.string());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }

    spit(path, "t,tip_x\n0.0,1,9\n");
    CHECK_THROWS_AS(load_dataset(path.string()), ParseError);
    spit(path, "tip_x,tip_y\n0.0,1\n");
    CHECK_THROWS_AS(load_dataset(path.string()), ParseError);
    CHECK_THROWS_AS(load_dataset((dir / "missing.csv").string()), ParseError);
}

TEST_CASE("dataset save/load round trip is the identity") {
    const auto dir = temp_dir("roundtrip");
    std::mt19937 rng(961);
    std::uniform_real_distribution<double> uv(-1.0, 1.0);
    TimeSeries ts;
    ts.channels = {"t", "tip_x", "tip_y", "u1"};
    ts.t.resize(50);
    ts.values.resize(50, 4);
    double tcur = 0.0;
    for (int k = 0; k < 50; ++k) {
        tcur += 0.001 * (1.0 + 0.5 * uv(rng));
        ts.t[static_cast<std::size_t>(k)] = tcur;
        ts.values(k, 0) = tcur;
        for (int j = 1; j < 4; ++j) ts.values(k, j) = uv(rng);
    }
    const auto path = dir / "rt.csv";
    save_dataset(path.string(), ts, "round trip");
    const TimeSeries back = load_dataset(path.string());
    REQUIRE(back.rows() == ts.rows());
    CHECK(back.channels == ts.channels);
    CHECK((back.values - ts.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cmd_simulate: determinism and rest behaviour") {
    ExperimentConfig cfg = ExperimentConfig::from_json_text(default_config_text());
    cfg.sim.t_final = 0.2;
    cfg.sim.sample_dt = 5e-3;
    cfg.solver.abs_tol = cfg.solver.rel_tol = 1e-4;

    const auto dir_a = temp_dir("sim_a");
    const auto dir_b = temp_dir("sim_b");
    cfg.output_dir = dir_a.string();
    const CommandOutcome a = cmd_simulate(cfg);
    cfg.output_dir = dir_b.string();
    const CommandOutcome b = cmd_simulate(cfg);
    CHECK(slurp(dir_a / "trajectory.csv") == slurp(dir_b / "trajectory.csv"));
    CHECK(slurp(dir_a / "manifest.json") == slurp(dir_b / "manifest.json"));
    CHECK(a.files.size() == 2);
    CHECK(b.summary == a.summary);

    // Zero drive: outputs stay at the (sub-micron) gravity sag scale.
    cfg.excitation.U0 = 0.0;
    cfg.output_dir = (temp_dir("sim_rest")).string();
    cmd_simulate(cfg);
    const TimeSeries traj =
        load_dataset((fs::path(cfg.output_dir) / "trajectory.csv").string());
    for (const char* ch : {"hp1", "hp2", "hp3"})
        CHECK(traj.col(ch).cwiseAbs().maxCoeff() < 3e-6);
    // With gravity effectively off the trajectory is constant.
    cfg.constants.g_grav = 1e-12;
    cfg.output_dir = (temp_dir("sim_rest0")).string();
    cmd_simulate(cfg);
    const TimeSeries traj0 =
        load_dataset((fs::path(cfg.output_dir) / "trajectory.csv").string());
    for (const char* ch : {"hp1", "hp2", "hp3"})
        CHECK(traj0.col(ch).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("output directory env override") {
    ExperimentConfig cfg = ExperimentConfig::from_json_text(default_config_text());
    cfg.sim.t_final = 0.05;
    cfg.sim.sample_dt = 5e-3;
    cfg.solver.abs_tol = cfg.solver.rel_tol = 1e-3;
    cfg.output_dir = (temp_dir("env_config")).string();
    const auto override_dir = temp_dir("env_override");
    setenv(kOutputDirEnv, override_dir.string().c_str(), 1);
    cmd_simulate(cfg);
    unsetenv(kOutputDirEnv);
    CHECK(fs::exists(override_dir / "trajectory.csv"));
    CHECK_FALSE(fs::exists(fs::path(cfg.output_dir) / "trajectory.csv"));
}

TEST_CASE("identify/validate round trip on a synthetic dataset") {
    // Simulate, turn the tip trace into a sensor dataset, identify starting
    // from the truth, then validate the identified parameters on the same
    // dataset: fits must agree.
    ExperimentConfig cfg = ExperimentConfig::from_json_text(default_config_text());
    cfg.sim.t_final = 1.0;
    cfg.sim.sample_dt = 2e-3;
    cfg.solver.abs_tol = cfg.solver.rel_tol = 1e-5;
    const auto dir = temp_dir("identify");
    cfg.output_dir = dir.string();
    cmd_simulate(cfg);

    const TimeSeries traj = load_dataset((dir / "trajectory.csv").string());
    TimeSeries sensor;
    sensor.channels = {"t", "tip_x", "tip_y", "tip_z"};
    sensor.t = traj.t;
    sensor.values.resize(traj.rows(), 4);
    sensor.values.col(0) = traj.col("t");
    sensor.values.col(1) = traj.col("tip_x");
    sensor.values.col(2) = traj.col("tip_y");
    sensor.values.col(3) = traj.col("tip_z");
    const auto data_path = dir / "sensor.csv";
    save_dataset(data_path.string(), sensor, "synthetic");

    cfg.identification.lm.max_iterations = 2;
    const CommandOutcome ident = cmd_identify(cfg, data_path.string());
    CHECK(ident.failed_actuators == 0);
    CHECK(fs::exists(dir / "identified_params.json"));
    CHECK(fs::exists(dir / "params_table.csv"));
    CHECK(fs::exists(dir / "overlay_act1.csv"));
    CHECK(fs::exists(dir / "tip_overlay.csv"));

    const auto report = nlohmann::json::parse(slurp(dir / "identified_params.json"));
    std::array<double, 3> fits{};
    for (int i = 0; i < 3; ++i) {
        fits[i] = report["actuators"][i]["fit_percent"].get<double>();
        CHECK(fits[i] > 95.0);
        // Started at the generating parameters: they must not wander.
        const auto& p = report["actuators"][i]["params"];
        CHECK(p["gamma1"].get<double>() ==
              doctest::Approx(cfg.actuators[i].gamma1).epsilon(0.01));
    }
    CHECK(report["pooled_xy_fit_percent"].get<double>() > 90.0);

    const CommandOutcome val = cmd_validate(cfg, (dir / "identified_params.json").string(),
                                            data_path.string());
    CHECK(val.failed_actuators == 0);
    const auto vreport = nlohmann::json::parse(slurp(dir / "validation_report.json"));
    for (int i = 0; i < 3; ++i)
        CHECK(vreport["actuators"][i]["fit_percent"].get<double>() ==
              doctest::Approx(fits[i]).epsilon(1e-9));
}

TEST_CASE("identify requires an explicit z policy for 2D datasets") {
    ExperimentConfig cfg = ExperimentConfig::from_json_text(default_config_text());
    const auto dir = temp_dir("zpolicy");
    cfg.output_dir = dir.string();
    const auto path = dir / "flat.csv";
    spit(path,
         "t,tip_x,tip_y\n"
         "0.0,0.0001,0.0\n"
         "0.1,0.0,0.0001\n"
         "0.2,-0.0001,0.0\n");
    CHECK_THROWS_AS(cmd_identify(cfg, path.string()), ParseError);

    cfg.data.z_policy = ZPolicy::FixedNominal;
    cfg.data.nominal_tip_z = 0.05;
    cfg.identification.lm.max_iterations = 1;
    cfg.identification.solver.abs_tol = cfg.identification.solver.rel_tol = 1e-2;
    CHECK_NOTHROW(cmd_identify(cfg, path.string()));
}
