#ifndef PARAMP_IO_JSON_HPP
#define PARAMP_IO_JSON_HPP

#include <json.hpp>

#include "paramp/calibration.hpp"
#include "paramp/fitting.hpp"
#include "paramp/filter_synth.hpp"
#include "paramp/kerr_dynamics.hpp"

namespace paramp::kerr {

inline void to_json(nlohmann::json& j, const KerrMode& m) {
    j = {{"f0", m.f0}, {"kappa_c", m.kappa_c}, {"kappa_i", m.kappa_i}, {"kerr", m.kerr}};
}

inline void from_json(const nlohmann::json& j, KerrMode& m) {
    m.f0 = j.at("f0").get<double>();
    m.kappa_c = j.at("kappa_c").get<double>();
    m.kappa_i = j.at("kappa_i").get<double>();
    m.kerr = j.at("kerr").get<double>();
    m.validate();
}

}  // namespace paramp::kerr

namespace paramp::fit {

inline void to_json(nlohmann::json& j, const FitResult& r) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, e] : r.params) {
        params[name] = {{"value", e.value}, {"std_error", e.std_error}};
    }
    j = {{"params", params},
         {"residual_norm", r.residual_norm},
         {"converged", r.converged},
         {"reliable", r.reliable()},
         {"iterations", r.iterations},
         {"flags", r.flags}};
}

}  // namespace paramp::fit

namespace paramp::cal {

inline void to_json(nlohmann::json& j, const Stage& s) {
    j = {{"name", s.name}, {"gain_db", s.gain_db}};
    if (s.noise_temperature_k) j["noise_temperature_k"] = *s.noise_temperature_k;
    if (s.physical_temperature_k) j["physical_temperature_k"] = *s.physical_temperature_k;
    if (s.p1db_input_dbm) j["p1db_input_dbm"] = *s.p1db_input_dbm;
}

inline void from_json(const nlohmann::json& j, Stage& s) {
    static const char* known[] = {"name", "gain_db", "noise_temperature_k",
                                  "physical_temperature_k", "p1db_input_dbm"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known)) {
            throw ValidationError("stage: unknown key '" + it.key() + "'");
        }
    }
    s.name = j.at("name").get<std::string>();
    s.gain_db = j.at("gain_db").get<double>();
    s.noise_temperature_k.reset();
    s.physical_temperature_k.reset();
    s.p1db_input_dbm.reset();
    if (j.contains("noise_temperature_k")) s.noise_temperature_k = j["noise_temperature_k"].get<double>();
    if (j.contains("physical_temperature_k")) {
        s.physical_temperature_k = j["physical_temperature_k"].get<double>();
    }
    if (j.contains("p1db_input_dbm")) s.p1db_input_dbm = j["p1db_input_dbm"].get<double>();
    s.validate();
}

inline void to_json(nlohmann::json& j, const AmplifierChain& c) { j = c.stages; }

inline void from_json(const nlohmann::json& j, AmplifierChain& c) {
    c.stages = j.get<std::vector<Stage>>();
    c.validate();
}

inline void to_json(nlohmann::json& j, const PowerReferral& r) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : r.levels) {
        levels.push_back({{"name", l.name},
                          {"input_dbm", l.input_dbm},
                          {"output_dbm", l.output_dbm},
                          {"compressed", l.compressed}});
    }
    j = {{"levels", levels},
         {"output_dbm", r.output_dbm},
         {"compressed_stages", r.compressed_stages},
         {"systematic_db", r.systematic_db}};
}

}  // namespace paramp::cal

namespace paramp::filter {

inline void to_json(nlohmann::json& j, const LadderNetwork& n) {
    nlohmann::json el = nlohmann::json::array();
    for (const auto& e : n.elements) {
        el.push_back({{"kind", e.kind == ElementKind::ShuntC ? "shunt_c" : "series_l"},
                      {"value", e.value}});
    }
    j = {{"elements", el},
         {"source_impedance", n.source_impedance},
         {"load_impedance", n.load_impedance}};
}

inline void to_json(nlohmann::json& j, const StopbandResult& r) {
    j = {{"pass", r.pass},
         {"worst_freq_hz", r.worst_freq},
         {"worst_db", r.worst_db},
         {"above_lumped_limit", r.above_lumped_limit}};
}

}  // namespace paramp::filter

#endif  // PARAMP_IO_JSON_HPP
