#pragma once

#include <string>

#include <json.hpp>

#include "qlb/core.hpp"
#include "qlb/error.hpp"
#include "qlb/grid.hpp"
#include "qlb/kernels.hpp"
#include "qlb/scattering.hpp"

namespace qlb {

using Json = nlohmann::ordered_json;

inline Json to_json(const GasSpec& g) {
    return Json{{"mass", g.mass},
                {"number_density", g.number_density},
                {"temperature", g.temperature}};
}

inline GasSpec gas_from_json(const Json& j) {
    GasSpec g;
    g.mass = j.at("mass").get<double>();
    g.number_density = j.at("number_density").get<double>();
    g.temperature = j.at("temperature").get<double>();
    g.validate();
    return g;
}

inline Json to_json(const TracerSpec& t) {
    if (t.is_infinite()) return Json{{"mass", "infinite"}};
    return Json{{"mass", t.mass}};
}

inline TracerSpec tracer_from_json(const Json& j) {
    const Json& m = j.at("mass");
    if (m.is_string()) {
        QLB_REQUIRE(m.get<std::string>() == "infinite",
                    "tracer mass must be a number or \"infinite\"");
        return TracerSpec::infinite();
    }
    return TracerSpec::finite(m.get<double>());
}

inline Json to_json(const ScatteringModel& model) {
    return std::visit(
        [](const auto& m) -> Json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConstantLengthModel>) {
                return Json{{"type", "constant_length"},
                            {"scattering_length", m.scattering_length}};
            } else if constexpr (std::is_same_v<T, BornGaussianModel>) {
                return Json{{"type", "born_gaussian"},
                            {"strength", m.strength},
                            {"width", m.width}};
            } else {
                return Json{{"type", "hard_sphere"}, {"radius", m.radius}, {"l_max", m.l_max}};
            }
        },
        model);
}

inline ScatteringModel model_from_json(const Json& j) {
    const std::string type = j.at("type").get<std::string>();
    ScatteringModel model;
    if (type == "constant_length") {
        ConstantLengthModel m;
        m.scattering_length = j.at("scattering_length").get<double>();
        model = m;
    } else if (type == "born_gaussian") {
        BornGaussianModel m;
        m.strength = j.at("strength").get<double>();
        m.width = j.at("width").get<double>();
        model = m;
    } else if (type == "hard_sphere") {
        HardSphereModel m;
        m.radius = j.at("radius").get<double>();
        if (j.contains("l_max")) m.l_max = j.at("l_max").get<int>();
        model = m;
    } else {
        throw ConfigError("unknown scattering model type: " + type);
    }
    validate(model);
    return model;
}

inline Json to_json(const QuadratureSpec& q) {
    return Json{{"n_nodes", q.n_nodes}, {"cutoff", q.cutoff}};
}

inline QuadratureSpec quadrature_from_json(const Json& j) {
    QuadratureSpec q;
    q.n_nodes = j.at("n_nodes").get<int>();
    q.cutoff = j.at("cutoff").get<double>();
    q.validate();
    return q;
}

inline Json to_json(const MomentumGrid& g) {
    return Json{{"n", g.n()}, {"spacing", g.spacing()}};
}

inline MomentumGrid grid_from_json(const Json& j) {
    return MomentumGrid::make_with_spacing(j.at("n").get<int>(), j.at("spacing").get<double>());
}

inline Json to_json(const Offset& o) { return Json::array({o.x, o.y, o.z}); }

inline Offset offset_from_json(const Json& j) {
    QLB_REQUIRE(j.is_array() && j.size() == 3, "offset must be a 3-element array");
    return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()};
}

inline Json to_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const Json& j) {
    QLB_REQUIRE(j.is_array() && j.size() == 3, "vector must be a 3-element array");
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

} // namespace qlb
