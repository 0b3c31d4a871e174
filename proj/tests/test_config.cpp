#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qlb/config.hpp"

using namespace qlb;

namespace {

Json desk_json() {
    return Json{{"gas", {{"mass", 1.0}, {"number_density", 1.0 / (8.0 * std::sqrt(M_PI))},
                         {"temperature", 0.5}}},
                {"tracer", {{"mass", 1.0}}},
                {"model", {{"type", "constant_length"}, {"scattering_length", 1.0}}}};
}

} // namespace

TEST_CASE("defaults materialize from a minimal configuration") {
    RunConfig c = config_from_json(desk_json());
    validate(c);
    REQUIRE(c.grid_n == 21);
    REQUIRE(c.grid_extent == 5.0);
    REQUIRE_THAT(c.effective_q_max(), Catch::Matchers::WithinRel(3.5, 1e-14));
    REQUIRE(c.scenario.type == ScenarioType::cold_gaussian);
    REQUIRE(c.scenario.offsets.size() == 1);
    REQUIRE(c.scenario.offsets[0] == Offset{});
    REQUIRE(c.integration.n_steps == 200);
    REQUIRE(c.seed == 1);
    REQUIRE(c.warnings.empty());
    REQUIRE_THAT(c.effective_width(), Catch::Matchers::WithinRel(1.0 / 3.0, 1e-14));
}

TEST_CASE("infinite tracer spelled out") {
    Json j = desk_json();
    j["tracer"]["mass"] = "infinite";
    j["scenario"] = Json{{"type", "cold_gaussian"}, {"width", 0.4}};
    RunConfig c = config_from_json(j);
    validate(c);
    REQUIRE(c.tracer.is_infinite());
    // Width must be explicit: there is no tracer thermal scale.
    Json bad = desk_json();
    bad["tracer"]["mass"] = "infinite";
    RunConfig cb = config_from_json(bad);
    validate(cb);
    REQUIRE_THROWS_AS(cb.effective_width(), ContractViolation);
}

TEST_CASE("echo round-trips to an identical configuration") {
    Json j = desk_json();
    j["scenario"] = Json{{"type", "two_packet"},
                         {"center", Json::array({0.0, 0.0, 1.0})},
                         {"center2", Json::array({0.0, 0.0, -1.0})},
                         {"relative_phase", 0.25},
                         {"offsets", Json::array({Json::array({0, 0, 0}),
                                                  Json::array({0, 0, 1})})}};
    j["seed"] = 42;
    j["integration"] = Json{{"n_steps", 77L}, {"minor_stride", 2}};
    RunConfig c = config_from_json(j);
    validate(c);
    const Json echo1 = config_echo(c);
    RunConfig c2 = config_from_json(echo1);
    validate(c2);
    const Json echo2 = config_echo(c2);
    REQUIRE(echo1.dump() == echo2.dump());
    REQUIRE(c2.scenario.offsets.size() == 2);
    REQUIRE(c2.integration.n_steps == 77);
    REQUIRE(c2.seed == 42);
}

TEST_CASE("malformed input becomes a config error") {
    Json j = desk_json();
    j["gas"]["mass"] = "heavy";
    REQUIRE_THROWS_AS(config_from_json(j), ConfigError);

    Json k = desk_json();
    k["model"] = Json{{"type", "unknown_model"}};
    REQUIRE_THROWS_AS(config_from_json(k), ConfigError);
}

TEST_CASE("validation rejects inconsistent settings") {
    {
        RunConfig c = config_from_json(desk_json());
        c.grid_n = 20;
        REQUIRE_THROWS_AS(validate(c), ConfigError);
    }
    {
        RunConfig c = config_from_json(desk_json());
        c.dsmc.n_particles = 5000;
        REQUIRE_THROWS_AS(validate(c), ConfigError);
    }
    {
        RunConfig c = config_from_json(desk_json());
        c.scenario.offsets = {Offset{0, 0, 1}};
        REQUIRE_THROWS_AS(validate(c), ConfigError);
    }
    {
        RunConfig c = config_from_json(desk_json());
        c.q_max = 0.1;   // below one grid spacing
        REQUIRE_THROWS_AS(validate(c), ConfigError);
    }
    {
        RunConfig c = config_from_json(desk_json());
        c.tolerance_profile = "loose";
        REQUIRE_THROWS_AS(validate(c), ConfigError);
    }
    {
        Json j = desk_json();
        j["scenario"] = Json{{"type", "two_packet"},
                             {"center", Json::array({0.0, 0.0, 9.0})},
                             {"center2", Json::array({0.0, 0.0, -1.0})}};
        RunConfig c = config_from_json(j);
        REQUIRE_THROWS_AS(validate(c), ConfigError);
    }
}

TEST_CASE("extent guard protects thermal relaxation runs") {
    Json j = desk_json();
    j["grid"] = Json{{"n", 15}, {"extent", 3.0}};
    RunConfig c = config_from_json(j);
    REQUIRE_THROWS_AS(validate(c), ConfigError);

    j["grid"]["relax_extent_check"] = true;
    RunConfig relaxed = config_from_json(j);
    validate(relaxed);
    REQUIRE_FALSE(relaxed.warnings.empty());
}

TEST_CASE("si units convert to the internal system") {
    // Helium-like gas numbers; only ratios matter after conversion.
    Json j{{"units", "si"},
           {"gas", {{"mass", 6.64e-27}, {"number_density", 1e20}, {"temperature", 4.0}}},
           {"tracer", {{"mass", 1.33e-26}}},
           {"model", {{"type", "constant_length"}, {"scattering_length", 5e-9}}},
           {"grid", {{"n", 15}, {"extent", 8.0}, {"relax_extent_check", true}}}};
    RunConfig c = config_from_json(j);
    validate(c);
    REQUIRE(c.gas.mass == 1.0);
    REQUIRE(c.gas.temperature == 0.5);
    REQUIRE_THAT(c.gas.p_thermal(), Catch::Matchers::WithinRel(1.0, 1e-14));
    REQUIRE_THAT(c.tracer.mass, Catch::Matchers::WithinRel(1.33e-26 / 6.64e-27, 1e-12));
    REQUIRE(c.unit_scales.contains("momentum_unit_si"));
    const double p0 = c.unit_scales.at("momentum_unit_si").get<double>();
    REQUIRE_THAT(p0, Catch::Matchers::WithinRel(
                         std::sqrt(2.0 * 6.64e-27 * 1.380649e-23 * 4.0), 1e-12));
    const double l0 = c.unit_scales.at("length_unit_si").get<double>();
    const ConstantLengthModel& m = std::get<ConstantLengthModel>(c.model);
    REQUIRE_THAT(m.scattering_length, Catch::Matchers::WithinRel(5e-9 / l0, 1e-12));
    REQUIRE_THAT(c.gas.number_density, Catch::Matchers::WithinRel(1e20 * l0 * l0 * l0, 1e-12));
}

TEST_CASE("scenario states build from the configuration") {
    Json j = desk_json();
    j["grid"] = Json{{"n", 9}, {"extent", 5.0}};
    j["scenario"] = Json{{"type", "two_packet"},
                         {"center", Json::array({0.0, 0.0, 1.25})},
                         {"center2", Json::array({0.0, 0.0, -1.25})},
                         {"offsets", Json::array({Json::array({0, 0, 0}),
                                                  Json::array({0, 0, 1})})}};
    RunConfig c = config_from_json(j);
    validate(c);
    const std::vector<SectorState> sectors = build_scenario_states(c);
    REQUIRE(sectors.size() == 2);
    REQUIRE(sectors[0].delta == Offset{});
    REQUIRE((sectors[1].delta == Offset{0, 0, 1}));
    double trace = 0.0;
    for (const Complex& v : sectors[0].field) trace += v.real();
    REQUIRE_THAT(trace * sectors[0].grid.cell_volume(),
                 Catch::Matchers::WithinRel(1.0, 1e-12));

    Json t = desk_json();
    t["scenario"] = Json{{"type", "thermal"}};
    RunConfig ct = config_from_json(t);
    validate(ct);
    const std::vector<SectorState> thermal = build_scenario_states(ct);
    REQUIRE(thermal.size() == 1);
    REQUIRE(thermal[0].grid.n() == 21);
}
