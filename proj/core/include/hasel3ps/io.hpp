#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hasel3ps/identification.hpp"
#include "hasel3ps/integrator.hpp"
#include "hasel3ps/kinematics.hpp"
#include "hasel3ps/timeseries.hpp"
#include "hasel3ps/types.hpp"

namespace hasel3ps {

inline constexpr const char* kToolVersion = "0.1.0";
/// When set, overrides the configured output directory.
inline constexpr const char* kOutputDirEnv = "HASEL3PS_OUTPUT_DIR";

/// Sinusoidal drive description; phases default to 0/120/240 degrees.
struct ExcitationConfig {
    double U0 = 60.0;          ///< command amplitude [V]
    double omega = 3.0 * M_PI; ///< [rad/s]
    Vec3 phase_rad = InputSignal::default_phases();

    InputSignal signal() const { return InputSignal::sinusoid(U0, omega, phase_rad); }
};

struct SimulationConfig {
    double t_final = 4.0;     ///< [s]
    double sample_dt = 1e-3;  ///< [s]
};

/// How the vertical tip coordinate is obtained from a 2D-sensor dataset.
/// Never inferred silently: a dataset without tip_z requires fixed_nominal.
enum class ZPolicy { ZColumn, FixedNominal };

struct DataPolicy {
    ZPolicy z_policy = ZPolicy::ZColumn;
    double nominal_tip_z = 0.0;  ///< [m], used by FixedNominal
};

struct IdentSettings {
    SolverConfig solver = SolverConfig::identification();
    LmConfig lm;
    bool detrend = false;
    /// Starting point per actuator; the actuators block when absent.
    std::optional<ParamsTriple> initial_guess;
};

/// Full experiment description, loadable from a single JSON file with units
/// spelled in the field names. Strict schema: all blocks mandatory, unknown
/// keys rejected.
struct ExperimentConfig {
    SharedConstants constants;
    ParamsTriple actuators = default_params_triple();
    PlatformGeometry geometry;
    ExcitationConfig excitation;
    SolverConfig solver;
    SimulationConfig sim;
    IdentSettings identification;
    DataPolicy data;
    std::string output_dir = "out";

    /// FNV-1a hash of the canonical serialization; embedded in every output.
    std::string hash;

    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text,
                                           const std::string& origin = "<config>");
    /// Canonical JSON (sorted keys); hashing input and init-config output.
    std::string to_json_text() const;
    void validate() const;
};

/// Canonical default configuration as JSON text.
std::string default_config_text();

/// 64-bit FNV-1a hash, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

/// CSV reader: optional '#' comment lines, then a header row naming the
/// channels (a 't' channel is required), then numeric rows. Reports
/// malformed content as ParseError with the line number and non-increasing
/// timestamps as MonotonicityError.
TimeSeries load_dataset(const std::string& path);

/// CSV writer; inverse of load_dataset on valid series.
void save_dataset(const std::string& path, const TimeSeries& ts,
                  const std::string& comment = "");

struct CommandOutcome {
    std::vector<std::string> files;  ///< paths written
    std::string summary;             ///< one-line human summary
    int failed_actuators = 0;        ///< estimation/simulation failures isolated per actuator
};

/// Simulate the configured excitation from rest and write trajectory.csv
/// (state, heights, tip pose, energy, output) plus manifest.json.
CommandOutcome cmd_simulate(const ExperimentConfig& cfg);

/// Reconstruct per-actuator heights from a recorded tip dataset, run the
/// grey-box estimation per actuator, and write identified_params.json,
/// params_table.csv, per-actuator overlays and tip_overlay.csv.
CommandOutcome cmd_identify(const ExperimentConfig& cfg, const std::string& data_path);

/// Replay previously identified parameters against an independent dataset
/// and write validation_report.json plus overlays.
CommandOutcome cmd_validate(const ExperimentConfig& cfg,
                            const std::string& params_path,
                            const std::string& data_path);

}  // namespace hasel3ps
