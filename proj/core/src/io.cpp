#include "hasel3ps/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "hasel3ps/dynamics.hpp"
#include "hasel3ps/geometry.hpp"

namespace hasel3ps {

using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// JSON schema helpers (strict: every key mandatory, unknown keys rejected).

[[noreturn]] void schema_error(const std::string& origin, const std::string& what) {
    throw ParseError(origin + ": " + what);
}

const json& need(const json& o, const char* key, const std::string& origin) {
    const auto it = o.find(key);
    if (it == o.end()) schema_error(origin, std::string("missing field '") + key + "'");
    return *it;
}

double need_num(const json& o, const char* key, const std::string& origin) {
    const json& v = need(o, key, origin);
    if (!v.is_number()) schema_error(origin, std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

int need_int(const json& o, const char* key, const std::string& origin) {
    const json& v = need(o, key, origin);
    if (!v.is_number_integer())
        schema_error(origin, std::string("field '") + key + "' must be an integer");
    return v.get<int>();
}

bool need_bool(const json& o, const char* key, const std::string& origin) {
    const json& v = need(o, key, origin);
    if (!v.is_boolean()) schema_error(origin, std::string("field '") + key + "' must be a boolean");
    return v.get<bool>();
}

std::string need_str(const json& o, const char* key, const std::string& origin) {
    const json& v = need(o, key, origin);
    if (!v.is_string()) schema_error(origin, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

void check_keys(const json& o, std::initializer_list<const char*> allowed,
                const std::string& origin) {
    if (!o.is_object()) schema_error(origin, "expected an object");
    for (const auto& [key, value] : o.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
                return key == a;
            }) == allowed.end())
            schema_error(origin, "unknown field '" + key + "'");
    }
}

constexpr std::initializer_list<const char*> kActuatorKeys = {
    "K_N_per_m", "K_b_Nm_per_rad", "b_kg_s", "R0_ohm", "R1_ohm",
    "R2_ohm",    "C1_F",           "gamma1", "gamma2"};

json actuator_to_json(const ActuatorParams& p) {
    return json{{"K_N_per_m", p.K},   {"K_b_Nm_per_rad", p.K_b}, {"b_kg_s", p.b},
                {"R0_ohm", p.R0},     {"R1_ohm", p.R1},          {"R2_ohm", p.R2},
                {"C1_F", p.C1},       {"gamma1", p.gamma1},      {"gamma2", p.gamma2}};
}

ActuatorParams actuator_from_json(const json& o, const std::string& origin,
                                  bool strict) {
    if (strict) check_keys(o, kActuatorKeys, origin);
    ActuatorParams p;
    p.K = need_num(o, "K_N_per_m", origin);
    p.K_b = need_num(o, "K_b_Nm_per_rad", origin);
    p.b = need_num(o, "b_kg_s", origin);
    p.R0 = need_num(o, "R0_ohm", origin);
    p.R1 = need_num(o, "R1_ohm", origin);
    p.R2 = need_num(o, "R2_ohm", origin);
    p.C1 = need_num(o, "C1_F", origin);
    p.gamma1 = need_num(o, "gamma1", origin);
    p.gamma2 = need_num(o, "gamma2", origin);
    return p;
}

json solver_to_json(const SolverConfig& s) {
    return json{{"abs_tol", s.abs_tol},
                {"rel_tol", s.rel_tol},
                {"max_step_s", s.max_step},
                {"initial_step_s", s.initial_step},
                {"max_newton_iters", s.max_newton_iters}};
}

SolverConfig solver_from_json(const json& o, const std::string& origin) {
    check_keys(o, {"abs_tol", "rel_tol", "max_step_s", "initial_step_s",
                   "max_newton_iters"},
               origin);
    SolverConfig s;
    s.abs_tol = need_num(o, "abs_tol", origin);
    s.rel_tol = need_num(o, "rel_tol", origin);
    s.max_step = need_num(o, "max_step_s", origin);
    s.initial_step = need_num(o, "initial_step_s", origin);
    s.max_newton_iters = need_int(o, "max_newton_iters", origin);
    return s;
}

// ---------------------------------------------------------------------------
// Formatting helpers.

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // '\n' endings everywhere
    if (!out) throw SimulationFailed("cannot open output file " + path.string());
    return out;
}

void provenance(std::ofstream& out, const ExperimentConfig& cfg) {
    out << "# hasel3ps v" << kToolVersion << " config_hash=" << cfg.hash << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::string& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
    check_keys(root,
               {"constants", "actuators", "geometry", "excitation", "solver",
                "simulation", "identification", "data", "output_dir"},
               origin);

    ExperimentConfig cfg;

    {
        const json& o = need(root, "constants", origin);
        const std::string ctx = origin + ".constants";
        check_keys(o,
                   {"L_p_m", "L_v_m", "L_e_m", "X_h_m", "m_kg", "eps_r",
                    "eps0_F_per_m", "w_m", "t_m", "g_m_per_s2", "A_T_m2"},
                   ctx);
        cfg.constants.L_p = need_num(o, "L_p_m", ctx);
        cfg.constants.L_v = need_num(o, "L_v_m", ctx);
        cfg.constants.L_e = need_num(o, "L_e_m", ctx);
        cfg.constants.X_h = need_num(o, "X_h_m", ctx);
        cfg.constants.m = need_num(o, "m_kg", ctx);
        cfg.constants.eps_r = need_num(o, "eps_r", ctx);
        cfg.constants.eps_0 = need_num(o, "eps0_F_per_m", ctx);
        cfg.constants.w = need_num(o, "w_m", ctx);
        cfg.constants.t = need_num(o, "t_m", ctx);
        cfg.constants.g_grav = need_num(o, "g_m_per_s2", ctx);
        cfg.constants.A_T = need_num(o, "A_T_m2", ctx);
    }
    {
        const json& a = need(root, "actuators", origin);
        if (!a.is_array() || a.size() != 3)
            schema_error(origin, "'actuators' must be an array of 3 objects");
        for (int i = 0; i < 3; ++i)
            cfg.actuators[i] = actuator_from_json(
                a[i], origin + ".actuators[" + std::to_string(i) + "]", true);
    }
    {
        const json& o = need(root, "geometry", origin);
        const std::string ctx = origin + ".geometry";
        check_keys(o, {"anchors_m", "antenna_length_m"}, ctx);
        const json& anchors = need(o, "anchors_m", ctx);
        if (!anchors.is_array() || anchors.size() != 3)
            schema_error(ctx, "'anchors_m' must be an array of 3 [x, y] pairs");
        for (int i = 0; i < 3; ++i) {
            const json& pt = anchors[i];
            if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() ||
                !pt[1].is_number())
                schema_error(ctx, "anchor entries must be [x, y] numbers");
            cfg.geometry.anchors[i] =
                Eigen::Vector2d(pt[0].get<double>(), pt[1].get<double>());
        }
        cfg.geometry.antenna_length = need_num(o, "antenna_length_m", ctx);
    }
    {
        const json& o = need(root, "excitation", origin);
        const std::string ctx = origin + ".excitation";
        check_keys(o, {"U0_V", "omega_rad_per_s", "phase_deg"}, ctx);
        cfg.excitation.U0 = need_num(o, "U0_V", ctx);
        cfg.excitation.omega = need_num(o, "omega_rad_per_s", ctx);
        const json& ph = need(o, "phase_deg", ctx);
        if (!ph.is_array() || ph.size() != 3)
            schema_error(ctx, "'phase_deg' must be an array of 3 numbers");
        for (int i = 0; i < 3; ++i)
            cfg.excitation.phase_rad[i] = ph[i].get<double>() * M_PI / 180.0;
    }
    cfg.solver = solver_from_json(need(root, "solver", origin), origin + ".solver");
    {
        const json& o = need(root, "simulation", origin);
        const std::string ctx = origin + ".simulation";
        check_keys(o, {"t_final_s", "sample_dt_s"}, ctx);
        cfg.sim.t_final = need_num(o, "t_final_s", ctx);
        cfg.sim.sample_dt = need_num(o, "sample_dt_s", ctx);
    }
    {
        const json& o = need(root, "identification", origin);
        const std::string ctx = origin + ".identification";
        check_keys(o, {"solver", "max_iterations", "detrend", "initial_guess"}, ctx);
        cfg.identification.solver = solver_from_json(need(o, "solver", ctx), ctx + ".solver");
        cfg.identification.lm.max_iterations = need_int(o, "max_iterations", ctx);
        cfg.identification.detrend = need_bool(o, "detrend", ctx);
        if (o.contains("initial_guess")) {
            const json& ig = o["initial_guess"];
            if (!ig.is_array() || ig.size() != 3)
                schema_error(ctx, "'initial_guess' must be an array of 3 objects");
            ParamsTriple triple;
            for (int i = 0; i < 3; ++i)
                triple[i] = actuator_from_json(
                    ig[i], ctx + ".initial_guess[" + std::to_string(i) + "]", true);
            cfg.identification.initial_guess = triple;
        }
    }
    {
        const json& o = need(root, "data", origin);
        const std::string ctx = origin + ".data";
        check_keys(o, {"z_policy", "nominal_tip_z_m"}, ctx);
        const std::string policy = need_str(o, "z_policy", ctx);
        if (policy == "z_column") {
            cfg.data.z_policy = ZPolicy::ZColumn;
        } else if (policy == "fixed_nominal") {
            cfg.data.z_policy = ZPolicy::FixedNominal;
        } else {
            schema_error(ctx, "z_policy must be 'z_column' or 'fixed_nominal'");
        }
        if (o.contains("nominal_tip_z_m"))
            cfg.data.nominal_tip_z = o["nominal_tip_z_m"].get<double>();
        else if (cfg.data.z_policy == ZPolicy::FixedNominal)
            schema_error(ctx, "fixed_nominal policy requires 'nominal_tip_z_m'");
    }
    cfg.output_dir = need_str(root, "output_dir", origin);

    cfg.validate();
    cfg.hash = fnv1a_hex(cfg.to_json_text());
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str(), path);
}

std::string ExperimentConfig::to_json_text() const {
    json root;
    root["constants"] = json{{"L_p_m", constants.L_p},
                             {"L_v_m", constants.L_v},
                             {"L_e_m", constants.L_e},
                             {"X_h_m", constants.X_h},
                             {"m_kg", constants.m},
                             {"eps_r", constants.eps_r},
                             {"eps0_F_per_m", constants.eps_0},
                             {"w_m", constants.w},
                             {"t_m", constants.t},
                             {"g_m_per_s2", constants.g_grav},
                             {"A_T_m2", constants.A_T}};
    root["actuators"] = json::array();
    for (const auto& a : actuators) root["actuators"].push_back(actuator_to_json(a));
    json anchors = json::array();
    for (const auto& a : geometry.anchors) anchors.push_back({a.x(), a.y()});
    root["geometry"] =
        json{{"anchors_m", anchors}, {"antenna_length_m", geometry.antenna_length}};
    json phases = json::array();
    for (int i = 0; i < 3; ++i)
        phases.push_back(excitation.phase_rad[i] * 180.0 / M_PI);
    root["excitation"] = json{{"U0_V", excitation.U0},
                              {"omega_rad_per_s", excitation.omega},
                              {"phase_deg", phases}};
    root["solver"] = solver_to_json(solver);
    root["simulation"] =
        json{{"t_final_s", sim.t_final}, {"sample_dt_s", sim.sample_dt}};
    root["identification"] = json{{"solver", solver_to_json(identification.solver)},
                                  {"max_iterations", identification.lm.max_iterations},
                                  {"detrend", identification.detrend}};
    if (identification.initial_guess) {
        json ig = json::array();
        for (const auto& a : *identification.initial_guess)
            ig.push_back(actuator_to_json(a));
        root["identification"]["initial_guess"] = ig;
    }
    root["data"] = json{
        {"z_policy",
         data.z_policy == ZPolicy::ZColumn ? "z_column" : "fixed_nominal"},
        {"nominal_tip_z_m", data.nominal_tip_z}};
    root["output_dir"] = output_dir;
    return root.dump(2) + "\n";
}

void ExperimentConfig::validate() const {
    constants.validate();
    for (const auto& a : actuators) a.validate();
    geometry.validate();
    solver.validate();
    identification.solver.validate();
    if (!(excitation.U0 >= 0.0))
        throw std::invalid_argument("ExperimentConfig: U0 must be >= 0");
    if (!std::isfinite(excitation.omega))
        throw std::invalid_argument("ExperimentConfig: omega must be finite");
    if (!(sim.t_final > 0.0) || !(sim.sample_dt > 0.0) ||
        !(sim.sample_dt <= sim.t_final))
        throw std::invalid_argument(
            "ExperimentConfig: need 0 < sample_dt_s <= t_final_s");
    if (identification.lm.max_iterations < 1)
        throw std::invalid_argument("ExperimentConfig: max_iterations must be >= 1");
    if (data.z_policy == ZPolicy::FixedNominal && !(data.nominal_tip_z > 0.0))
        throw std::invalid_argument(
            "ExperimentConfig: fixed_nominal policy needs nominal_tip_z_m > 0");
    if (identification.initial_guess)
        for (const auto& a : *identification.initial_guess) a.validate();
}

std::string default_config_text() {
    ExperimentConfig cfg;
    return cfg.to_json_text();
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv(kOutputDirEnv); env && *env)
        return std::filesystem::path(env);
    return std::filesystem::path(cfg.output_dir);
}

// ---------------------------------------------------------------------------
// Dataset CSV

TimeSeries load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open dataset file " + path);

    TimeSeries ts;
    std::string line;
    long line_no = 0;
    bool have_header = false;
    std::vector<std::vector<double>> rows;

    auto split = [](const std::string& s) {
        std::vector<std::string> fields;
        std::string cur;
        for (char ch : s) {
            if (ch == ',') {
                fields.push_back(cur);
                cur.clear();
            } else if (ch != '\r') {
                cur.push_back(ch);
            }
        }
        fields.push_back(cur);
        for (auto& f : fields) {
            while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
            while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
        }
        return fields;
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!have_header) {
            ts.channels = split(line);
            if (ts.channels.empty() ||
                std::find(ts.channels.begin(), ts.channels.end(), "t") ==
                    ts.channels.end())
                throw ParseError(path + ": header must name a 't' column", line_no);
            have_header = true;
            continue;
        }
        const auto fields = split(line);
        if (fields.size() != ts.channels.size()) {
            std::ostringstream os;
            os << path << ": expected " << ts.channels.size() << " fields, got "
               << fields.size();
            throw ParseError(os.str(), line_no);
        }
        std::vector<double> row(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const char* begin = fields[j].c_str();
            char* end = nullptr;
            row[j] = std::strtod(begin, &end);
            if (end == begin || *end != '\0' || !std::isfinite(row[j])) {
                std::ostringstream os;
                os << path << ": bad numeric field '" << fields[j] << "'";
                throw ParseError(os.str(), line_no);
            }
        }
        rows.push_back(std::move(row));
    }
    if (!have_header) throw ParseError(path + ": no header row", line_no);

    const int tcol = ts.channel_index("t");
    ts.t.resize(rows.size());
    ts.values.resize(static_cast<long>(rows.size()),
                     static_cast<long>(ts.channels.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        ts.t[k] = rows[k][static_cast<std::size_t>(tcol)];
        for (std::size_t j = 0; j < rows[k].size(); ++j)
            ts.values(static_cast<long>(k), static_cast<long>(j)) = rows[k][j];
    }
    ts.check_monotone();
    return ts;
}

void save_dataset(const std::string& path, const TimeSeries& ts,
                  const std::string& comment) {
    if (!ts.has_channel("t"))
        throw std::invalid_argument("save_dataset: series needs a 't' channel");
    auto out = open_out(path);
    if (!comment.empty()) out << "# " << comment << "\n";
    for (std::size_t j = 0; j < ts.channels.size(); ++j)
        out << (j ? "," : "") << ts.channels[j];
    out << "\n";
    for (long k = 0; k < ts.rows(); ++k) {
        for (long j = 0; j < static_cast<long>(ts.channels.size()); ++j)
            out << (j ? "," : "") << fmt(ts.values(k, j));
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// cmd_simulate

CommandOutcome cmd_simulate(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto outdir = resolve_output_dir(cfg);
    std::filesystem::create_directories(outdir);

    const SystemState x0 = SystemState::rest(cfg.constants);
    const InputSignal u = cfg.excitation.signal();
    const long n = static_cast<long>(std::floor(cfg.sim.t_final / cfg.sim.sample_dt + 1e-9));
    std::vector<double> times(static_cast<std::size_t>(n) + 1);
    for (long i = 0; i <= n; ++i)
        times[static_cast<std::size_t>(i)] = static_cast<double>(i) * cfg.sim.sample_dt;

    Trajectory traj;
    try {
        traj = integrate(x0, u, 0.0, cfg.sim.t_final, cfg.actuators, cfg.constants,
                         cfg.solver, &times);
    } catch (const StiffnessFailure& e) {
        throw SimulationFailed(std::string("simulate: ") + e.what());
    } catch (const DomainError& e) {
        throw SimulationFailed(std::string("simulate: ") + e.what());
    }

    const auto traj_path = outdir / "trajectory.csv";
    {
        auto out = open_out(traj_path);
        provenance(out, cfg);
        out << "t,theta1,theta2,theta3,lp1,lp2,lp3,p1,p2,p3,"
               "Q1_1,Q1_2,Q1_3,Q2_1,Q2_2,Q2_3,hp1,hp2,hp3,"
               "tip_x,tip_y,tip_z,n_x,n_y,n_z,H,y1,y2,y3\n";
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            const Vec15 x = traj.states[k].to_vector();
            const TipPose pose = fkm(traj.heights[k], cfg.geometry);
            out << fmt(traj.times[k]);
            for (int i = 0; i < 15; ++i) out << "," << fmt(x[i]);
            for (int i = 0; i < 3; ++i) out << "," << fmt(traj.heights[k][i]);
            for (int i = 0; i < 3; ++i) out << "," << fmt(pose.position[i]);
            for (int i = 0; i < 3; ++i) out << "," << fmt(pose.normal[i]);
            out << "," << fmt(traj.energy[k]);
            for (int i = 0; i < 3; ++i) out << "," << fmt(traj.outputs[k][i]);
            out << "\n";
        }
    }

    json manifest;
    manifest["tool"] = "hasel3ps";
    manifest["version"] = kToolVersion;
    manifest["command"] = "simulate";
    manifest["config_hash"] = cfg.hash;
    manifest["config"] = json::parse(cfg.to_json_text());
    manifest["outputs"] = json::array({"trajectory.csv"});
    manifest["samples"] = traj.times.size();
    manifest["steps_accepted"] = traj.steps_accepted;
    manifest["steps_rejected"] = traj.steps_rejected;
    manifest["le_saturated"] = traj.le_saturated;
    const auto manifest_path = outdir / "manifest.json";
    {
        auto out = open_out(manifest_path);
        out << manifest.dump(2) << "\n";
    }

    CommandOutcome outcome;
    outcome.files = {traj_path.string(), manifest_path.string()};
    std::ostringstream os;
    os << "simulated " << cfg.sim.t_final << " s (" << traj.times.size()
       << " samples, " << traj.steps_accepted << " steps"
       << (traj.le_saturated ? ", l_e clamp active" : "") << ")";
    outcome.summary = os.str();
    return outcome;
}

// ---------------------------------------------------------------------------
// Shared dataset preparation for identify/validate

namespace {

struct PreparedData {
    std::vector<double> t;                       // unflagged sample times
    Eigen::MatrixXd h;                           // n x 3 reconstructed heights
    Eigen::MatrixXd tip_xy;                      // n x 2 measured tip
    std::array<std::function<double(double)>, 3> u;
    long flagged = 0;
    long total_rows = 0;
};

PreparedData prepare_dataset(const ExperimentConfig& cfg, const std::string& path) {
    const TimeSeries ds = load_dataset(path);
    if (!ds.has_channel("tip_x") || !ds.has_channel("tip_y"))
        throw ParseError(path + ": dataset needs tip_x and tip_y columns");

    TimeSeries tips;
    tips.t = ds.t;
    tips.channels = {"tip_x", "tip_y", "tip_z"};
    tips.values.resize(ds.rows(), 3);
    tips.values.col(0) = ds.col("tip_x");
    tips.values.col(1) = ds.col("tip_y");
    if (cfg.data.z_policy == ZPolicy::ZColumn) {
        if (!ds.has_channel("tip_z"))
            throw ParseError(path +
                             ": no tip_z column; declare data.z_policy "
                             "'fixed_nominal' with nominal_tip_z_m to proceed");
        tips.values.col(2) = ds.col("tip_z");
    } else {
        tips.values.col(2).setConstant(cfg.data.nominal_tip_z);
    }

    const HeightsFromTip rec = heights_from_tip(tips, cfg.geometry);

    PreparedData out;
    out.total_rows = ds.rows();
    out.flagged = rec.flagged;
    const long n_ok = ds.rows() - rec.flagged;
    if (n_ok < 2)
        throw ParseError(path + ": fewer than 2 usable samples after IKM flags");
    out.t.reserve(static_cast<std::size_t>(n_ok));
    out.h.resize(n_ok, 3);
    out.tip_xy.resize(n_ok, 2);
    long r = 0;
    for (long k = 0; k < ds.rows(); ++k) {
        if (rec.singular[static_cast<std::size_t>(k)]) continue;
        out.t.push_back(ds.t[static_cast<std::size_t>(k)]);
        out.h.row(r) = rec.heights.values.row(k);
        out.tip_xy(r, 0) = tips.values(k, 0);
        out.tip_xy(r, 1) = tips.values(k, 1);
        ++r;
    }

    const bool has_u =
        ds.has_channel("u1") && ds.has_channel("u2") && ds.has_channel("u3");
    if (has_u) {
        std::vector<Vec3> uv(static_cast<std::size_t>(ds.rows()));
        const Eigen::VectorXd u1 = ds.col("u1"), u2 = ds.col("u2"), u3 = ds.col("u3");
        for (long k = 0; k < ds.rows(); ++k)
            uv[static_cast<std::size_t>(k)] = Vec3(u1[k], u2[k], u3[k]);
        const InputSignal sig = InputSignal::sampled(ds.t, std::move(uv));
        for (int i = 0; i < 3; ++i)
            out.u[i] = [sig, i](double t) { return sig.channel(i, t); };
    } else {
        const InputSignal sig = cfg.excitation.signal();
        for (int i = 0; i < 3; ++i)
            out.u[i] = [sig, i](double t) { return sig.channel(i, t); };
    }
    return out;
}

struct ActuatorRun {
    IdentResult result;
    Eigen::VectorXd h_sim;  // empty when simulation of the final params failed
    bool failed = false;
    std::string error;
};

const char* status_name(IdentStatus s) {
    switch (s) {
        case IdentStatus::Converged: return "converged";
        case IdentStatus::MaxIterations: return "max_iterations";
        case IdentStatus::NoProgress: return "no_progress";
    }
    return "unknown";
}

json result_to_json(const ActuatorRun& run) {
    json o;
    o["params"] = actuator_to_json(run.result.params);
    o["fit_percent"] = run.result.fit_percent;
    o["iterations"] = run.result.iterations;
    o["final_cost"] = run.result.final_cost;
    o["converged"] = run.result.converged;
    o["status"] = run.failed ? "failed" : status_name(run.result.status);
    o["message"] = run.failed ? run.error : run.result.message;
    return o;
}

void write_params_table(const std::filesystem::path& path,
                        const ExperimentConfig& cfg, const ParamsTriple& params) {
    auto out = open_out(path);
    provenance(out, cfg);
    out << "parameter,unit,act1,act2,act3\n";
    const auto& names = ActuatorParams::names();
    const auto& units = ActuatorParams::units();
    std::array<std::array<double, 9>, 3> cols = {
        params[0].to_array(), params[1].to_array(), params[2].to_array()};
    for (int j = 0; j < 9; ++j) {
        out << names[j] << "," << units[j];
        for (int i = 0; i < 3; ++i) out << "," << fmt(cols[i][j]);
        out << "\n";
    }
}

// Pooled 2D fit over the stacked XY deviation vectors.
double pooled_xy_fit(const Eigen::MatrixXd& meas_xy, const Eigen::MatrixXd& sim_xy) {
    const long n = meas_xy.rows();
    Eigen::VectorXd meas(2 * n), sim(2 * n);
    meas << meas_xy.col(0), meas_xy.col(1);
    sim << sim_xy.col(0), sim_xy.col(1);
    Eigen::VectorXd centered = meas;
    centered.head(n).array() -= meas_xy.col(0).mean();
    centered.tail(n).array() -= meas_xy.col(1).mean();
    const double den = centered.norm();
    if (!(den > 0.0)) throw DegenerateSignal("pooled_xy_fit: constant tip trace");
    return 100.0 * (1.0 - (meas - sim).norm() / den);
}

}  // namespace

// ---------------------------------------------------------------------------
// cmd_identify

CommandOutcome cmd_identify(const ExperimentConfig& cfg, const std::string& data_path) {
    cfg.validate();
    const auto outdir = resolve_output_dir(cfg);
    std::filesystem::create_directories(outdir);

    PreparedData data = prepare_dataset(cfg, data_path);
    const ParamsTriple guesses =
        cfg.identification.initial_guess.value_or(cfg.actuators);

    std::array<IdentProblem, 3> problems;
    for (int i = 0; i < 3; ++i) {
        problems[i].t = data.t;
        problems[i].u = data.u[i];
        problems[i].h_meas = cfg.identification.detrend
                                 ? detrend_linear(data.t, data.h.col(i))
                                 : Eigen::VectorXd(data.h.col(i));
        problems[i].consts = cfg.constants;
        problems[i].initial_guess = guesses[i];
        problems[i].solver = cfg.identification.solver;
    }

    // Independent per-actuator problems run concurrently.
    std::array<std::future<ActuatorRun>, 3> jobs;
    for (int i = 0; i < 3; ++i) {
        jobs[i] = std::async(std::launch::async, [&, i]() {
            ActuatorRun run;
            try {
                run.result = identify(problems[i], cfg.identification.lm);
                try {
                    run.h_sim = simulate_heights(run.result.params, problems[i],
                                                 cfg.identification.solver);
                } catch (const std::exception&) {
                    run.h_sim.resize(0);
                }
            } catch (const std::exception& e) {
                run.failed = true;
                run.error = e.what();
                run.result.params = problems[i].initial_guess;
                run.result.fit_percent = std::numeric_limits<double>::quiet_NaN();
            }
            return run;
        });
    }
    std::array<ActuatorRun, 3> runs;
    for (int i = 0; i < 3; ++i) runs[i] = jobs[i].get();

    CommandOutcome outcome;

    // Overlays.
    for (int i = 0; i < 3; ++i) {
        const auto path = outdir / ("overlay_act" + std::to_string(i + 1) + ".csv");
        auto out = open_out(path);
        provenance(out, cfg);
        out << "t,h_meas,h_sim\n";
        for (std::size_t k = 0; k < data.t.size(); ++k) {
            const double sim = runs[i].h_sim.size()
                                   ? runs[i].h_sim[static_cast<Eigen::Index>(k)]
                                   : std::numeric_limits<double>::quiet_NaN();
            out << fmt(data.t[k]) << "," << fmt(problems[i].h_meas[static_cast<Eigen::Index>(k)])
                << "," << fmt(sim) << "\n";
        }
        outcome.files.push_back(path.string());
    }

    // Reconstructed tip trace from the simulated heights.
    double xy_fit = std::numeric_limits<double>::quiet_NaN();
    const bool have_all_sims = runs[0].h_sim.size() && runs[1].h_sim.size() &&
                               runs[2].h_sim.size();
    {
        const auto path = outdir / "tip_overlay.csv";
        auto out = open_out(path);
        provenance(out, cfg);
        out << "t,x_meas,y_meas,x_sim,y_sim\n";
        Eigen::MatrixXd sim_xy(static_cast<long>(data.t.size()), 2);
        for (std::size_t k = 0; k < data.t.size(); ++k) {
            double xs = std::numeric_limits<double>::quiet_NaN();
            double ys = xs;
            if (have_all_sims) {
                const Vec3 h(runs[0].h_sim[static_cast<Eigen::Index>(k)],
                             runs[1].h_sim[static_cast<Eigen::Index>(k)],
                             runs[2].h_sim[static_cast<Eigen::Index>(k)]);
                const TipPose pose = fkm(h, cfg.geometry);
                xs = pose.position.x();
                ys = pose.position.y();
            }
            sim_xy(static_cast<long>(k), 0) = xs;
            sim_xy(static_cast<long>(k), 1) = ys;
            out << fmt(data.t[k]) << "," << fmt(data.tip_xy(static_cast<long>(k), 0))
                << "," << fmt(data.tip_xy(static_cast<long>(k), 1)) << "," << fmt(xs)
                << "," << fmt(ys) << "\n";
        }
        if (have_all_sims) {
            try {
                xy_fit = pooled_xy_fit(data.tip_xy, sim_xy);
            } catch (const DegenerateSignal&) {
            }
        }
        outcome.files.push_back(path.string());
    }

    const ParamsTriple est = {runs[0].result.params, runs[1].result.params,
                              runs[2].result.params};
    const auto table_path = outdir / "params_table.csv";
    write_params_table(table_path, cfg, est);
    outcome.files.push_back(table_path.string());

    json report;
    report["tool"] = "hasel3ps";
    report["version"] = kToolVersion;
    report["command"] = "identify";
    report["config_hash"] = cfg.hash;
    report["dataset"] = std::filesystem::path(data_path).filename().string();
    report["rows"] = data.total_rows;
    report["ikm_flagged_rows"] = data.flagged;
    report["actuators"] = json::array();
    for (const auto& run : runs) report["actuators"].push_back(result_to_json(run));
    report["pooled_xy_fit_percent"] = xy_fit;
    const auto report_path = outdir / "identified_params.json";
    {
        auto out = open_out(report_path);
        out << report.dump(2) << "\n";
    }
    outcome.files.push_back(report_path.string());

    json manifest = report;
    manifest["command"] = "identify";
    manifest["config"] = json::parse(cfg.to_json_text());
    manifest["outputs"] = json::array();
    for (const auto& f : outcome.files)
        manifest["outputs"].push_back(std::filesystem::path(f).filename().string());
    manifest["outputs"].push_back("manifest.json");
    const auto manifest_path = outdir / "manifest.json";
    {
        auto out = open_out(manifest_path);
        out << manifest.dump(2) << "\n";
    }
    outcome.files.push_back(manifest_path.string());

    std::ostringstream os;
    os << "identified 3 actuators; fits [%]:";
    for (const auto& run : runs) {
        os << " " << (run.failed ? std::string("failed")
                                 : fmt(run.result.fit_percent));
        if (run.failed || run.result.status == IdentStatus::NoProgress)
            ++outcome.failed_actuators;
    }
    os << "; pooled XY " << fmt(xy_fit);
    outcome.summary = os.str();
    return outcome;
}

// ---------------------------------------------------------------------------
// cmd_validate

CommandOutcome cmd_validate(const ExperimentConfig& cfg,
                            const std::string& params_path,
                            const std::string& data_path) {
    cfg.validate();
    const auto outdir = resolve_output_dir(cfg);
    std::filesystem::create_directories(outdir);

    // Accept both identified_params.json and a plain actuators array.
    ParamsTriple params;
    {
        std::ifstream in(params_path, std::ios::binary);
        if (!in) throw ParseError("cannot open params file " + params_path);
        json root;
        try {
            root = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ParseError(params_path + ": " + e.what());
        }
        const json& acts = need(root, "actuators", params_path);
        if (!acts.is_array() || acts.size() != 3)
            throw ParseError(params_path + ": 'actuators' must be an array of 3");
        for (int i = 0; i < 3; ++i) {
            const json& entry = acts[i].contains("params") ? acts[i]["params"] : acts[i];
            params[i] = actuator_from_json(
                entry, params_path + ".actuators[" + std::to_string(i) + "]", false);
            params[i].validate();
        }
    }

    PreparedData data = prepare_dataset(cfg, data_path);

    CommandOutcome outcome;
    std::array<double, 3> fits{};
    Eigen::MatrixXd sim_xy(static_cast<long>(data.t.size()), 2);
    std::array<Eigen::VectorXd, 3> h_sim;
    std::array<std::string, 3> errors;
    for (int i = 0; i < 3; ++i) {
        IdentProblem prob;
        prob.t = data.t;
        prob.u = data.u[i];
        prob.h_meas = cfg.identification.detrend
                          ? detrend_linear(data.t, data.h.col(i))
                          : Eigen::VectorXd(data.h.col(i));
        prob.consts = cfg.constants;
        prob.initial_guess = params[i];
        prob.solver = cfg.identification.solver;
        try {
            h_sim[i] = simulate_heights(params[i], prob, cfg.identification.solver);
            fits[i] = nrmse_fit(prob.h_meas, h_sim[i]);
        } catch (const std::exception& e) {
            fits[i] = std::numeric_limits<double>::quiet_NaN();
            errors[i] = e.what();
        }

        const auto path = outdir / ("overlay_act" + std::to_string(i + 1) + ".csv");
        auto out = open_out(path);
        provenance(out, cfg);
        out << "t,h_meas,h_sim\n";
        for (std::size_t k = 0; k < data.t.size(); ++k) {
            const double sim = h_sim[i].size()
                                   ? h_sim[i][static_cast<Eigen::Index>(k)]
                                   : std::numeric_limits<double>::quiet_NaN();
            out << fmt(data.t[k]) << ","
                << fmt(prob.h_meas[static_cast<Eigen::Index>(k)]) << "," << fmt(sim)
                << "\n";
        }
        outcome.files.push_back(path.string());
    }

    double xy_fit = std::numeric_limits<double>::quiet_NaN();
    const bool have_all = h_sim[0].size() && h_sim[1].size() && h_sim[2].size();
    {
        const auto path = outdir / "tip_overlay.csv";
        auto out = open_out(path);
        provenance(out, cfg);
        out << "t,x_meas,y_meas,x_sim,y_sim\n";
        for (std::size_t k = 0; k < data.t.size(); ++k) {
            double xs = std::numeric_limits<double>::quiet_NaN(), ys = xs;
            if (have_all) {
                const Vec3 h(h_sim[0][static_cast<Eigen::Index>(k)],
                             h_sim[1][static_cast<Eigen::Index>(k)],
                             h_sim[2][static_cast<Eigen::Index>(k)]);
                const TipPose pose = fkm(h, cfg.geometry);
                xs = pose.position.x();
                ys = pose.position.y();
            }
            sim_xy(static_cast<long>(k), 0) = xs;
            sim_xy(static_cast<long>(k), 1) = ys;
            out << fmt(data.t[k]) << "," << fmt(data.tip_xy(static_cast<long>(k), 0))
                << "," << fmt(data.tip_xy(static_cast<long>(k), 1)) << "," << fmt(xs)
                << "," << fmt(ys) << "\n";
        }
        if (have_all) {
            try {
                xy_fit = pooled_xy_fit(data.tip_xy, sim_xy);
            } catch (const DegenerateSignal&) {
            }
        }
        outcome.files.push_back(path.string());
    }

    json report;
    report["tool"] = "hasel3ps";
    report["version"] = kToolVersion;
    report["command"] = "validate";
    report["config_hash"] = cfg.hash;
    report["dataset"] = std::filesystem::path(data_path).filename().string();
    report["params_file"] = std::filesystem::path(params_path).filename().string();
    report["rows"] = data.total_rows;
    report["ikm_flagged_rows"] = data.flagged;
    report["actuators"] = json::array();
    for (int i = 0; i < 3; ++i) {
        json o;
        o["params"] = actuator_to_json(params[i]);
        o["fit_percent"] = fits[i];
        if (!errors[i].empty()) o["error"] = errors[i];
        report["actuators"].push_back(o);
        if (!errors[i].empty()) ++outcome.failed_actuators;
    }
    report["pooled_xy_fit_percent"] = xy_fit;
    const auto report_path = outdir / "validation_report.json";
    {
        auto out = open_out(report_path);
        out << report.dump(2) << "\n";
    }
    outcome.files.push_back(report_path.string());

    json manifest = report;
    manifest["config"] = json::parse(cfg.to_json_text());
    manifest["outputs"] = json::array();
    for (const auto& f : outcome.files)
        manifest["outputs"].push_back(std::filesystem::path(f).filename().string());
    manifest["outputs"].push_back("manifest.json");
    const auto manifest_path = outdir / "manifest.json";
    {
        auto out = open_out(manifest_path);
        out << manifest.dump(2) << "\n";
    }
    outcome.files.push_back(manifest_path.string());

    std::ostringstream os;
    os << "validation fits [%]: " << fmt(fits[0]) << " " << fmt(fits[1]) << " "
       << fmt(fits[2]) << "; pooled XY " << fmt(xy_fit);
    outcome.summary = os.str();
    return outcome;
}

}  // namespace hasel3ps
