// hasel3ps command line tool: simulate / identify / validate / fkm / ikm.
//
// Exit codes: 0 success, 2 config or data parse failure, 3 simulation
// failure, 4 optimization failure; other nonzero codes come from command
// line usage errors.

#include <cstdio>
#include <exception>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hasel3ps/io.hpp"
#include "hasel3ps/kinematics.hpp"

namespace {

using namespace hasel3ps;

constexpr int kExitParse = 2;
constexpr int kExitSimulation = 3;
constexpr int kExitOptimization = 4;

bool parse_triple(const std::string& text, Vec3& out) {
    std::stringstream ss(text);
    std::string field;
    int i = 0;
    while (std::getline(ss, field, ',')) {
        if (i >= 3) return false;
        try {
            std::size_t pos = 0;
            out[i] = std::stod(field, &pos);
            if (pos != field.size()) return false;
        } catch (const std::exception&) {
            return false;
        }
        ++i;
    }
    return i == 3;
}

PlatformGeometry geometry_from(const std::string& config_path) {
    if (config_path.empty()) return PlatformGeometry{};
    return ExperimentConfig::load(config_path).geometry;
}

int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s", e.what());
        if (e.line() > 0) std::fprintf(stderr, " (line %ld)", e.line());
        std::fprintf(stderr, "\n");
        return kExitParse;
    } catch (const MonotonicityError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitParse;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitParse;
    } catch (const SimulationFailed& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSimulation;
    } catch (const StiffnessFailure& e) {
        std::fprintf(stderr, "error: %s (t=%.6g s)\n", e.what(), e.time());
        return kExitSimulation;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSimulation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSimulation;
    }
}

void print_outcome(const CommandOutcome& outcome) {
    std::printf("%s\n", outcome.summary.c_str());
    for (const auto& f : outcome.files) std::printf("wrote %s\n", f.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Simulation and grey-box identification toolkit for a HASEL-driven "
        "3PS micro parallel robot"};
    app.require_subcommand(1);

    std::string config_path, data_path, params_path, triple_text, out_path;

    auto* sim = app.add_subcommand("simulate", "Integrate the configured excitation");
    sim->add_option("--config", config_path, "experiment config (JSON)")->required();

    auto* ident = app.add_subcommand(
        "identify", "Estimate per-actuator parameters from a sensor dataset");
    ident->add_option("--config", config_path, "experiment config (JSON)")->required();
    ident->add_option("--data", data_path, "sensor CSV (t, tip_x, tip_y, ...)")
        ->required();

    auto* val = app.add_subcommand(
        "validate", "Replay identified parameters against an independent dataset");
    val->add_option("--config", config_path, "experiment config (JSON)")->required();
    val->add_option("--params", params_path, "identified parameters (JSON)")->required();
    val->add_option("--data", data_path, "sensor CSV")->required();

    auto* fkm_cmd = app.add_subcommand("fkm", "Forward kinematics: heights to tip pose");
    fkm_cmd->add_option("--heights", triple_text, "h1,h2,h3 in metres")->required();
    fkm_cmd->add_option("--config", config_path, "config supplying the geometry");

    auto* ikm_cmd = app.add_subcommand("ikm", "Inverse kinematics: tip to heights");
    ikm_cmd->add_option("--tip", triple_text, "x,y,z in metres")->required();
    ikm_cmd->add_option("--config", config_path, "config supplying the geometry");

    auto* init = app.add_subcommand("init-config", "Write the default config");
    init->add_option("--out", out_path, "destination path")->default_val("config.json");

    CLI11_PARSE(app, argc, argv);

    if (sim->parsed()) {
        return run_guarded([&] {
            print_outcome(cmd_simulate(ExperimentConfig::load(config_path)));
            return 0;
        });
    }
    if (ident->parsed()) {
        return run_guarded([&] {
            const CommandOutcome outcome =
                cmd_identify(ExperimentConfig::load(config_path), data_path);
            print_outcome(outcome);
            if (outcome.failed_actuators > 0) {
                std::fprintf(stderr, "error: %d actuator estimation(s) failed\n",
                             outcome.failed_actuators);
                return kExitOptimization;
            }
            return 0;
        });
    }
    if (val->parsed()) {
        return run_guarded([&] {
            const CommandOutcome outcome = cmd_validate(
                ExperimentConfig::load(config_path), params_path, data_path);
            print_outcome(outcome);
            if (outcome.failed_actuators > 0) {
                std::fprintf(stderr, "error: %d actuator replay(s) failed\n",
                             outcome.failed_actuators);
                return kExitOptimization;
            }
            return 0;
        });
    }
    if (fkm_cmd->parsed()) {
        return run_guarded([&] {
            Vec3 h;
            if (!parse_triple(triple_text, h))
                throw ParseError("--heights expects h1,h2,h3");
            const TipPose pose = fkm(h, geometry_from(config_path));
            std::printf("tip: %.12g %.12g %.12g\n", pose.position.x(),
                        pose.position.y(), pose.position.z());
            std::printf("normal: %.12g %.12g %.12g\n", pose.normal.x(),
                        pose.normal.y(), pose.normal.z());
            return 0;
        });
    }
    if (ikm_cmd->parsed()) {
        return run_guarded([&] {
            Vec3 tip;
            if (!parse_triple(triple_text, tip))
                throw ParseError("--tip expects x,y,z");
            const Vec3 h = ikm(tip, geometry_from(config_path));
            std::printf("heights: %.12g %.12g %.12g\n", h[0], h[1], h[2]);
            return 0;
        });
    }
    if (init->parsed()) {
        return run_guarded([&] {
            std::ofstream out(out_path, std::ios::binary);
            if (!out) throw ParseError("cannot write " + out_path);
            out << default_config_text();
            std::printf("wrote %s\n", out_path.c_str());
            return 0;
        });
    }
    return 0;
}
