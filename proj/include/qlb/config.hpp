#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "qlb/classical.hpp"
#include "qlb/core.hpp"
#include "qlb/error.hpp"
#include "qlb/evolution.hpp"
#include "qlb/grid.hpp"
#include "qlb/kernels.hpp"
#include "qlb/scattering.hpp"
#include "qlb/serialize.hpp"

namespace qlb {

// Physical constants for SI input conversion (exact SI definitions).
inline constexpr double k_boltzmann_si = 1.380649e-23;
inline constexpr double k_hbar_si = 1.054571817e-34;

enum class ScenarioType { thermal, cold_gaussian, two_packet };

inline std::string to_string(ScenarioType t) {
    switch (t) {
        case ScenarioType::thermal: return "thermal";
        case ScenarioType::cold_gaussian: return "cold_gaussian";
        case ScenarioType::two_packet: return "two_packet";
    }
    return "?";
}

struct ScenarioSpec {
    ScenarioType type = ScenarioType::cold_gaussian;
    double width = 0.0;              // 0: default p_thermal(tracer) / 3
    Vec3 center{};
    Vec3 center2{};                  // two_packet only
    double relative_phase = 0.0;     // two_packet only
    std::vector<Offset> offsets = {Offset{}};
};

struct IntegrationSpec {
    double dt = 0.0;                 // 0: auto from the table stability bound
    double dt_factor = 0.05;
    long n_steps = 200;
    int record_stride = 1;
    int minor_stride = 0;
    bool check_entropy = false;
};

struct DsmcSpec {
    std::size_t n_particles = 100000;
    double t_final = 10.0;
    double snapshot_dt = 1.0;
};

/// Fully resolved run configuration: physics, grid, scenario, and
/// integrator knobs in internal units (hbar = k_B = 1, and the gas
/// thermal momentum as the natural momentum scale).
struct RunConfig {
    GasSpec gas;
    TracerSpec tracer;
    ScatteringModel model = ConstantLengthModel{};
    int grid_n = 21;
    double grid_extent = 5.0;
    double q_max = 0.0;              // 0: default 3.5 * gas p_thermal
    bool relax_extent_check = false;
    QuadratureSpec quadrature;
    ScenarioSpec scenario;
    IntegrationSpec integration;
    MonitorThresholds thresholds;
    bool abort_on_violation = true;
    DsmcSpec dsmc;
    std::uint64_t seed = 1;
    int workers = 0;
    std::string tolerance_profile = "default";
    std::map<std::string, double> tolerance_overrides;

    // Filled during load/validate.
    std::vector<std::string> warnings;
    Json unit_scales;                // empty unless SI input was converted

    MomentumGrid grid() const { return MomentumGrid::make(grid_n, grid_extent); }
    double effective_q_max() const { return q_max > 0.0 ? q_max : 3.5 * gas.p_thermal(); }
    double effective_width() const {
        if (scenario.width > 0.0) return scenario.width;
        QLB_REQUIRE(!tracer.is_infinite(),
                    "scenario width must be given explicitly for an infinite-mass tracer");
        return std::sqrt(2.0 * tracer.mass * gas.temperature) / 3.0;
    }
};

namespace detail {

inline void convert_si(Json& j, Json& scales) {
    // Momentum unit: gas thermal momentum.  Length follows from hbar,
    // time from the gas mass.  Grid, quadrature, and integration blocks
    // are numerics and stay in internal units.
    Json& gas = j.at("gas");
    const double m_si = gas.at("mass").get<double>();
    const double t_si = gas.at("temperature").get<double>();
    const double n_si = gas.at("number_density").get<double>();
    QLB_REQUIRE(m_si > 0.0 && t_si > 0.0 && n_si > 0.0, "SI gas parameters must be positive");
    const double p0 = std::sqrt(2.0 * m_si * k_boltzmann_si * t_si);
    const double length0 = k_hbar_si / p0;
    const double time0 = m_si * k_hbar_si / (p0 * p0);
    gas["mass"] = 1.0;
    gas["temperature"] = 0.5;
    gas["number_density"] = n_si * length0 * length0 * length0;
    if (j.contains("tracer") && j.at("tracer").contains("mass") &&
        j.at("tracer").at("mass").is_number())
        j["tracer"]["mass"] = j.at("tracer").at("mass").get<double>() / m_si;
    if (j.contains("model")) {
        Json& model = j.at("model");
        const std::string type = model.value("type", "constant_length");
        if (type == "constant_length" && model.contains("scattering_length"))
            model["scattering_length"] = model.at("scattering_length").get<double>() / length0;
        if (type == "hard_sphere" && model.contains("radius"))
            model["radius"] = model.at("radius").get<double>() / length0;
        if (type == "born_gaussian" && model.contains("width"))
            model["width"] = model.at("width").get<double>() / length0;
    }
    scales = Json{{"momentum_unit_si", p0},
                  {"length_unit_si", length0},
                  {"time_unit_si", time0},
                  {"mass_unit_si", m_si},
                  {"energy_unit_si", k_boltzmann_si * t_si}};
}

} // namespace detail

inline RunConfig config_from_json(Json j) {
    RunConfig c;
    try {
        if (j.value("units", "internal") == "si") detail::convert_si(j, c.unit_scales);
        if (j.contains("gas")) c.gas = gas_from_json(j.at("gas"));
        if (j.contains("tracer")) c.tracer = tracer_from_json(j.at("tracer"));
        if (j.contains("model")) c.model = model_from_json(j.at("model"));
        if (j.contains("grid")) {
            const Json& g = j.at("grid");
            c.grid_n = g.value("n", c.grid_n);
            c.grid_extent = g.value("extent", c.grid_extent);
            c.q_max = g.value("q_max", c.q_max);
            c.relax_extent_check = g.value("relax_extent_check", false);
        }
        if (j.contains("quadrature")) c.quadrature = quadrature_from_json(j.at("quadrature"));
        if (j.contains("scenario")) {
            const Json& s = j.at("scenario");
            const std::string type = s.value("type", "cold_gaussian");
            if (type == "thermal")
                c.scenario.type = ScenarioType::thermal;
            else if (type == "cold_gaussian")
                c.scenario.type = ScenarioType::cold_gaussian;
            else if (type == "two_packet")
                c.scenario.type = ScenarioType::two_packet;
            else
                throw ConfigError("unknown scenario type: " + type);
            c.scenario.width = s.value("width", 0.0);
            if (s.contains("center")) c.scenario.center = vec3_from_json(s.at("center"));
            if (s.contains("center2")) c.scenario.center2 = vec3_from_json(s.at("center2"));
            c.scenario.relative_phase = s.value("relative_phase", 0.0);
            if (s.contains("offsets")) {
                c.scenario.offsets.clear();
                for (const Json& o : s.at("offsets"))
                    c.scenario.offsets.push_back(offset_from_json(o));
            }
        }
        if (j.contains("integration")) {
            const Json& i = j.at("integration");
            c.integration.dt = i.value("dt", 0.0);
            c.integration.dt_factor = i.value("dt_factor", 0.05);
            c.integration.n_steps = i.value("n_steps", 200L);
            c.integration.record_stride = i.value("record_stride", 1);
            c.integration.minor_stride = i.value("minor_stride", 0);
            c.integration.check_entropy = i.value("check_entropy", false);
        }
        if (j.contains("monitors")) {
            const Json& m = j.at("monitors");
            c.abort_on_violation = m.value("abort_on_violation", true);
            c.thresholds.trace_drift = m.value("trace_drift", c.thresholds.trace_drift);
            c.thresholds.sector_growth = m.value("sector_growth", c.thresholds.sector_growth);
            c.thresholds.negativity = m.value("negativity", c.thresholds.negativity);
            c.thresholds.minor = m.value("minor", c.thresholds.minor);
            c.thresholds.entropy_decrease =
                m.value("entropy_decrease", c.thresholds.entropy_decrease);
        }
        if (j.contains("dsmc")) {
            const Json& d = j.at("dsmc");
            c.dsmc.n_particles = d.value("n_particles", c.dsmc.n_particles);
            c.dsmc.t_final = d.value("t_final", c.dsmc.t_final);
            c.dsmc.snapshot_dt = d.value("snapshot_dt", c.dsmc.snapshot_dt);
        }
        c.seed = j.value("seed", std::uint64_t{1});
        c.workers = j.value("workers", 0);
        c.tolerance_profile = j.value("tolerance_profile", "default");
        if (j.contains("tolerance_overrides"))
            for (const auto& [key, value] : j.at("tolerance_overrides").items())
                c.tolerance_overrides[key] = value.get<double>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    return c;
}

/// Structural and physical validation.  Hard failures throw ConfigError;
/// soft findings are appended to config.warnings.
inline void validate(RunConfig& c) {
    c.warnings.clear();
    c.gas.validate();
    c.tracer.validate();
    validate(c.model);
    c.quadrature.validate();
    if (c.grid_n < 3 || c.grid_n % 2 == 0)
        throw ConfigError("grid.n must be odd and >= 3");
    if (!(c.grid_extent > 0.0) || !std::isfinite(c.grid_extent))
        throw ConfigError("grid.extent must be positive");
    const MomentumGrid grid = c.grid();
    if (c.effective_q_max() < grid.spacing())
        throw ConfigError("grid.q_max must be at least one grid spacing");
    if (c.tolerance_profile != "default" && c.tolerance_profile != "strict")
        throw ConfigError("tolerance_profile must be 'default' or 'strict'");
    if (c.workers < 0) throw ConfigError("workers must be >= 0");
    if (c.integration.n_steps < 0) throw ConfigError("integration.n_steps must be >= 0");
    if (c.integration.record_stride < 1)
        throw ConfigError("integration.record_stride must be >= 1");
    if (c.integration.minor_stride < 0)
        throw ConfigError("integration.minor_stride must be >= 0");
    if (!(c.integration.dt_factor > 0.0) || c.integration.dt_factor > 0.1)
        throw ConfigError("integration.dt_factor must be in (0, 0.1]");
    if (c.dsmc.n_particles < 10000)
        throw ConfigError("dsmc.n_particles below 10000 gives meaningless statistics; refusing");
    if (!(c.dsmc.t_final > 0.0) || !(c.dsmc.snapshot_dt > 0.0) ||
        c.dsmc.snapshot_dt > c.dsmc.t_final)
        throw ConfigError("dsmc time grid is inconsistent");

    // Scenarios that relax toward the tracer thermal state need a grid
    // that holds that state.
    if (c.scenario.type == ScenarioType::thermal ||
        c.scenario.type == ScenarioType::cold_gaussian) {
        if (c.tracer.is_infinite()) {
            if (c.scenario.type == ScenarioType::thermal)
                throw ConfigError("thermal scenario is undefined for an infinite-mass tracer");
        } else {
            const double p_th = std::sqrt(2.0 * c.tracer.mass * c.gas.temperature);
            const double needed = 5.0 * p_th;
            if (c.grid_extent < needed * (1.0 - 1e-12)) {
                const std::string msg =
                    "grid.extent " + std::to_string(c.grid_extent) +
                    " does not cover 5x the tracer thermal momentum (" + std::to_string(needed) +
                    ")";
                if (c.relax_extent_check)
                    c.warnings.push_back(msg + "; proceeding because relax_extent_check is set");
                else
                    throw ConfigError(msg + "; set grid.relax_extent_check to override");
            }
        }
    }
    if (c.scenario.offsets.empty() || !(c.scenario.offsets[0] == Offset{}))
        throw ConfigError("scenario.offsets must start with the diagonal offset [0,0,0]");
    for (const Offset& d : c.scenario.offsets)
        if (std::abs(d.x) >= c.grid_n || std::abs(d.y) >= c.grid_n || std::abs(d.z) >= c.grid_n)
            throw ConfigError("scenario offset exceeds the grid span");
    if (c.scenario.type == ScenarioType::two_packet) {
        if (!grid.contains(Offset{static_cast<int>(std::lround(c.scenario.center.x / grid.spacing())),
                                  static_cast<int>(std::lround(c.scenario.center.y / grid.spacing())),
                                  static_cast<int>(std::lround(c.scenario.center.z / grid.spacing()))}))
            throw ConfigError("two_packet center lies outside the grid");
        if (!grid.contains(Offset{static_cast<int>(std::lround(c.scenario.center2.x / grid.spacing())),
                                  static_cast<int>(std::lround(c.scenario.center2.y / grid.spacing())),
                                  static_cast<int>(std::lround(c.scenario.center2.z / grid.spacing()))}))
            throw ConfigError("two_packet second center lies outside the grid");
    }
    if (c.scenario.width < 0.0) throw ConfigError("scenario.width must be >= 0");
}

inline RunConfig config_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    Json j;
    try {
        j = Json::parse(f);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c = config_from_json(j);
    validate(c);
    return c;
}

/// The effective configuration, defaults materialized, for echo output.
inline Json config_echo(const RunConfig& c) {
    Json j;
    j["units"] = "internal";
    j["gas"] = to_json(c.gas);
    j["tracer"] = to_json(c.tracer);
    j["model"] = to_json(c.model);
    j["grid"] = Json{{"n", c.grid_n},
                     {"extent", c.grid_extent},
                     {"spacing", c.grid().spacing()},
                     {"q_max", c.effective_q_max()},
                     {"relax_extent_check", c.relax_extent_check}};
    j["quadrature"] = to_json(c.quadrature);
    Json scen{{"type", to_string(c.scenario.type)}};
    scen["width"] = c.scenario.type == ScenarioType::thermal ? 0.0 : c.effective_width();
    scen["center"] = to_json(c.scenario.center);
    if (c.scenario.type == ScenarioType::two_packet) {
        scen["center2"] = to_json(c.scenario.center2);
        scen["relative_phase"] = c.scenario.relative_phase;
    }
    Json offsets = Json::array();
    for (const Offset& d : c.scenario.offsets) offsets.push_back(to_json(d));
    scen["offsets"] = offsets;
    j["scenario"] = scen;
    j["integration"] = Json{{"dt", c.integration.dt},
                            {"dt_factor", c.integration.dt_factor},
                            {"n_steps", c.integration.n_steps},
                            {"record_stride", c.integration.record_stride},
                            {"minor_stride", c.integration.minor_stride},
                            {"check_entropy", c.integration.check_entropy}};
    j["monitors"] = Json{{"abort_on_violation", c.abort_on_violation},
                         {"trace_drift", c.thresholds.trace_drift},
                         {"sector_growth", c.thresholds.sector_growth},
                         {"negativity", c.thresholds.negativity},
                         {"minor", c.thresholds.minor},
                         {"entropy_decrease", c.thresholds.entropy_decrease}};
    j["dsmc"] = Json{{"n_particles", c.dsmc.n_particles},
                     {"t_final", c.dsmc.t_final},
                     {"snapshot_dt", c.dsmc.snapshot_dt}};
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["tolerance_profile"] = c.tolerance_profile;
    if (!c.tolerance_overrides.empty()) {
        Json o = Json::object();
        for (const auto& [key, value] : c.tolerance_overrides) o[key] = value;
        j["tolerance_overrides"] = o;
    }
    if (!c.unit_scales.empty()) j["unit_scales"] = c.unit_scales;
    if (!c.warnings.empty()) j["warnings"] = c.warnings;
    return j;
}

/// Initial sectors for the configured scenario.
inline std::vector<SectorState> build_scenario_states(const RunConfig& c) {
    const MomentumGrid grid = c.grid();
    switch (c.scenario.type) {
        case ScenarioType::thermal: {
            std::vector<SectorState> s;
            s.push_back(discretized_maxwell(grid, c.gas, c.tracer));
            QLB_REQUIRE(c.scenario.offsets.size() == 1,
                        "thermal scenario supports only the diagonal sector");
            return s;
        }
        case ScenarioType::cold_gaussian: {
            QLB_REQUIRE(c.scenario.offsets.size() == 1,
                        "cold_gaussian scenario supports only the diagonal sector");
            std::vector<SectorState> s;
            s.push_back(gaussian_diagonal(grid, c.effective_width(), c.scenario.center));
            return s;
        }
        case ScenarioType::two_packet:
            return pure_state_sectors(grid, c.scenario.offsets, c.scenario.center,
                                      c.scenario.center2, c.effective_width(),
                                      c.scenario.relative_phase);
    }
    throw Error("unreachable scenario type");
}

} // namespace qlb
