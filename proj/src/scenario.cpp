// scenario.cpp — Scenario configs: units, JSON I/O, built-in examples

#include "corrfit/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace corrfit::scenario {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 6.283185307179586477;

bool frequency_unit(const ScenarioConfig& sc, const std::string& param) {
    for (const auto& info : families::schema(sc.family))
        if (info.name == param) return info.frequency_unit;
    throw std::invalid_argument("scenario: unknown parameter '" + param + "' for family " +
                                sc.family);
}

} // namespace

double to_internal(const ScenarioConfig& sc, const std::string& param, double table_value) {
    if (!frequency_unit(sc, param)) return table_value;
    // kHz table value -> angular rate in units of 1 / bin_width
    return kTwoPi * table_value * 1e3 * sc.bin_width_us * 1e-6;
}

double to_table(const ScenarioConfig& sc, const std::string& param, double internal_value) {
    if (!frequency_unit(sc, param)) return internal_value;
    return internal_value / (kTwoPi * 1e3 * sc.bin_width_us * 1e-6);
}

families::Settings settings_for(const ScenarioConfig& sc, const Variant& v) {
    families::Settings s;
    s.bin_width = 1.0; // internal time unit
    s.n_bins = sc.n_bins;
    s.gain = sc.gain;
    s.n_trunc = sc.n_trunc;
    s.param_scale = v.param_scale;
    return s;
}

ModelFamily family_for(const ScenarioConfig& sc, const Variant& v) {
    std::map<std::string, double> fixed;
    for (const auto& info : families::schema(sc.family)) {
        const bool is_free = std::find(sc.free_params.begin(), sc.free_params.end(),
                                       info.name) != sc.free_params.end();
        if (is_free) continue;
        const auto it = sc.params.find(info.name);
        if (it == sc.params.end())
            throw std::invalid_argument("scenario '" + sc.name + "': missing value for '" +
                                        info.name + "'");
        fixed[info.name] = to_internal(sc, info.name, it->second);
    }
    return families::make(sc.family, settings_for(sc, v), fixed, sc.free_params);
}

std::vector<double> internal_free_values(const ScenarioConfig& sc,
                                         const std::map<std::string, double>& table_values) {
    std::vector<double> out;
    for (const auto& name : sc.free_params) {
        const auto it = table_values.find(name);
        if (it == table_values.end())
            throw std::invalid_argument("scenario '" + sc.name + "': missing value for '" +
                                        name + "'");
        out.push_back(to_internal(sc, name, it->second));
    }
    return out;
}

std::vector<double> true_values(const ScenarioConfig& sc) {
    return internal_free_values(sc, sc.params);
}

std::vector<double> guess_values(const ScenarioConfig& sc) {
    return internal_free_values(sc, sc.guesses);
}

correlators::Mode fit_mode(const ScenarioConfig& sc) {
    if (sc.fit_mode == "binned_expm") return correlators::Mode::binned_expm;
    if (sc.fit_mode == "sharp_approx") return correlators::Mode::sharp_approx;
    if (sc.fit_mode == "filtered_ode") return correlators::Mode::filtered_ode;
    throw std::invalid_argument("scenario: fit_mode must be binned_expm, sharp_approx or "
                                "filtered_ode (got '" + sc.fit_mode + "')");
}

namespace {

std::vector<std::vector<std::pair<int, int>>> expand_request(const RequestSpec& r,
                                                             int n_bins) {
    std::vector<std::vector<std::pair<int, int>>> sets;
    auto check_bin = [&](int b) {
        if (b < 0 || b >= n_bins)
            throw std::invalid_argument("request: bin index outside the record");
    };
    if (r.type == "one_point") {
        for (int k = r.k_min; k <= r.k_max; ++k) {
            check_bin(k);
            sets.push_back({{r.detector, k}});
        }
    } else if (r.type == "two_point") {
        check_bin(r.ref_bin);
        for (int k = r.k_min; k <= r.k_max; ++k) {
            check_bin(k);
            sets.push_back({{r.detector, r.ref_bin}, {r.detector2, k}});
        }
    } else if (r.type == "coincident") {
        for (int k = r.k_min; k <= r.k_max; ++k) {
            check_bin(k);
            sets.push_back({{r.detector, k}, {r.detector2, k}});
        }
    } else if (r.type == "tail") {
        for (int k = r.k_min; k <= r.k_max; ++k) {
            check_bin(k);
            std::vector<std::pair<int, int>> pts;
            for (int b : r.prefix_bins) {
                check_bin(b);
                pts.emplace_back(r.detector, b);
            }
            pts.emplace_back(r.detector2, k);
            sets.push_back(std::move(pts));
        }
    } else {
        throw std::invalid_argument("request: unknown type '" + r.type + "'");
    }
    return sets;
}

} // namespace

std::vector<correlators::CorrelationRequest> build_requests(const ScenarioConfig& sc,
                                                            const ConcreteModel& m,
                                                            correlators::Mode mode) {
    std::vector<correlators::CorrelationRequest> out;
    for (const auto& r : sc.requests)
        for (const auto& set : expand_request(r, sc.n_bins))
            out.push_back(correlators::binned_request(m, mode, set));
    return out;
}

std::vector<estimator::MultiIndex> build_indices(const ScenarioConfig& sc) {
    std::vector<estimator::MultiIndex> out;
    for (const auto& r : sc.requests)
        for (auto& set : expand_request(r, sc.n_bins)) out.push_back({std::move(set)});
    return out;
}

std::string fingerprint(const ScenarioConfig& sc, const Variant& v) {
    std::ostringstream os;
    os.precision(17);
    os << sc.family << "|bw=" << sc.bin_width_us << "|nb=" << sc.n_bins
       << "|g=" << sc.gain << "|tr=" << sc.n_trunc << "|sub=" << sc.substeps_per_bin;
    for (const auto& [k, val] : sc.params) os << "|" << k << "=" << val;
    os << "|variant=" << v.label;
    for (const auto& [k, f] : v.param_scale) os << "|scale:" << k << "=" << f;
    // FNV-1a 64
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : os.str()) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    std::ostringstream hex;
    hex << std::hex << h;
    return hex.str();
}

// ---- built-in scenarios ------------------------------------------------------

ScenarioConfig builtin(const std::string& name) {
    ScenarioConfig sc;
    sc.name = name;
    if (name == "example1") {
        sc.family = "anharmonic_heterodyne";
        // bin width 1/(6 kappa) with kappa = 2*pi * 100 kHz
        sc.bin_width_us = 1e6 / (6.0 * kTwoPi * 100e3);
        sc.n_bins = 21;
        sc.gain = 1.0;
        sc.n_trunc = 16;
        sc.params = {{"kerr", 100.0}, {"eps_x", 300.0}, {"eps_y", 400.0},
                     {"kappa", 100.0}, {"eta", 0.8}, {"gain", 1.0}};
        sc.free_params = {"kerr", "eps_x", "eps_y", "eta"};
        sc.guesses = {{"kerr", 150.0}, {"eps_x", 200.0}, {"eps_y", 200.0}, {"eta", 0.6}};
        sc.requests = {{"two_point", 0, 0, 0, {}, 1, 20},
                       {"two_point", 1, 1, 0, {}, 1, 20}};
        sc.n_exp = 10000; // desk scale; the reference study used 10^6
        sc.substeps_per_bin = 1000;
        sc.seed = 101;
    } else if (name == "example2") {
        sc.family = "qubit_photodetection";
        // bin width 1/(2 Delta) with Delta = 2*pi * 5 kHz
        sc.bin_width_us = 1e6 / (2.0 * kTwoPi * 5e3);
        sc.n_bins = 21;
        sc.params = {{"delta", 5.0}, {"omega", 3.0}, {"gamma", 2.0},
                     {"dark", 0.3}, {"eta", 0.5}};
        sc.free_params = {"delta", "omega", "gamma", "dark", "eta"};
        sc.guesses = {{"delta", 4.0}, {"omega", 4.0}, {"gamma", 1.0},
                      {"dark", 0.5}, {"eta", 0.7}};
        sc.requests = {{"one_point", 0, 0, 0, {}, 0, 20}};
        sc.n_exp = 100000;
        sc.substeps_per_bin = 100;
        sc.seed = 202;
    } else if (name == "example3") {
        sc.family = "two_photon_homodyne";
        // bin width 1/(2 kappa1) with kappa1 = 2*pi * 100 kHz
        sc.bin_width_us = 1e6 / (2.0 * kTwoPi * 100e3);
        sc.n_bins = 31;
        sc.gain = 1.0;
        sc.n_trunc = 32;
        sc.params = {{"kappa1", 100.0}, {"kappa2", 1.0}, {"alpha2", 7.0},
                     {"eta", 0.1}, {"gain", 1.0}};
        sc.free_params = {"kappa2", "alpha2", "eta"};
        sc.guesses = {{"kappa2", 1.5}, {"alpha2", 6.0}, {"eta", 0.05}};
        sc.requests = {{"two_point", 0, 0, 0, {}, 1, 30}};
        sc.n_exp = 100000;
        sc.substeps_per_bin = 500;
        sc.seed = 303;
        sc.variants = {Variant{"a", {}}, Variant{"b", {{"alpha2", 1.02}}}};
        sc.fit_mode = "sharp_approx";
    } else if (name == "vacuum") {
        // gain calibration: drive off, system pinned to vacuum
        sc.family = "lossy_oscillator";
        sc.bin_width_us = 1.0;
        sc.n_bins = 10;
        sc.n_trunc = 4;
        sc.params = {{"osc_freq", 0.0}, {"kappa", 20.0}, {"eta", 0.4},
                     {"alpha0", 0.0}, {"gain", 1.0}};
        sc.free_params = {};
        sc.requests = {{"coincident", 0, 0, 0, {}, 0, 9}};
        sc.n_exp = 10000;
        sc.substeps_per_bin = 100;
        sc.seed = 404;
    } else if (name == "lossy_oscillator") {
        sc.family = "lossy_oscillator";
        sc.bin_width_us = 10.0;
        sc.n_bins = 25;
        sc.n_trunc = 12;
        sc.params = {{"osc_freq", 4.0}, {"kappa", 1.0}, {"eta", 0.4},
                     {"alpha0", 1.2}, {"gain", 1.0}};
        sc.free_params = {"osc_freq", "kappa", "eta", "alpha0"};
        sc.guesses = {{"osc_freq", 3.0}, {"kappa", 1.4}, {"eta", 0.6}, {"alpha0", 0.9}};
        sc.requests = {{"one_point", 0, 0, 0, {}, 0, 24}};
        sc.n_exp = 10000;
        sc.substeps_per_bin = 100;
        sc.seed = 505;
    } else {
        throw std::invalid_argument("unknown built-in scenario: " + name);
    }
    return sc;
}

std::vector<std::string> builtin_names() {
    return {"example1", "example2", "example3", "vacuum", "lossy_oscillator"};
}

// ---- JSON ---------------------------------------------------------------------

namespace {

template <typename T>
T require(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key))
        throw std::invalid_argument("config: missing field " + path + "." + key);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw std::invalid_argument("config: bad value at " + path + "." + key + ": " +
                                    e.what());
    }
}

std::map<std::string, double> number_map(const json& j, const std::string& path) {
    std::map<std::string, double> out;
    for (const auto& [k, v] : j.items()) {
        if (!v.is_number())
            throw std::invalid_argument("config: " + path + "." + k + " must be a number");
        out[k] = v.get<double>();
    }
    return out;
}

} // namespace

ScenarioConfig parse_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text, nullptr, true, true); // allow comments
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
    }
    ScenarioConfig sc;
    sc.name = j.value("name", "scenario");
    sc.family = require<std::string>(j, "family", "$");
    families::schema(sc.family); // validates the family name

    const json& det = j.contains("detection") ? j.at("detection") : json::object();
    sc.bin_width_us = require<double>(det, "bin_width_us", "$.detection");
    sc.n_bins = require<int>(det, "n_bins", "$.detection");
    sc.gain = det.value("gain", 1.0);
    sc.n_trunc = det.value("n_trunc", 0);

    sc.params = number_map(j.contains("parameters") ? j.at("parameters") : json::object(),
                           "$.parameters");
    if (j.contains("free")) sc.free_params = j.at("free").get<std::vector<std::string>>();
    if (j.contains("guesses")) sc.guesses = number_map(j.at("guesses"), "$.guesses");

    if (j.contains("requests")) {
        int idx = 0;
        for (const auto& rj : j.at("requests")) {
            const std::string path = "$.requests[" + std::to_string(idx++) + "]";
            RequestSpec r;
            r.type = require<std::string>(rj, "type", path);
            r.detector = rj.value("detector", 0);
            r.detector2 = rj.value("detector2", r.detector);
            r.ref_bin = rj.value("ref_bin", 0);
            if (rj.contains("prefix_bins"))
                r.prefix_bins = rj.at("prefix_bins").get<std::vector<int>>();
            r.k_min = require<int>(rj, "k_min", path);
            r.k_max = require<int>(rj, "k_max", path);
            sc.requests.push_back(std::move(r));
        }
    }

    const json& sim = j.contains("simulation") ? j.at("simulation") : json::object();
    sc.n_exp = sim.value("n_exp", 1L);
    sc.substeps_per_bin = sim.value("substeps_per_bin", 100);
    sc.seed = sim.value("seed", 1UL);

    if (j.contains("variants")) {
        sc.variants.clear();
        for (const auto& vj : j.at("variants")) {
            Variant v;
            v.label = vj.value("label", "a");
            if (vj.contains("param_scale"))
                v.param_scale = number_map(vj.at("param_scale"), "$.variants.param_scale");
            sc.variants.push_back(std::move(v));
        }
        if (sc.variants.empty())
            throw std::invalid_argument("config: $.variants must not be empty");
    }

    const json& fit = j.contains("fit") ? j.at("fit") : json::object();
    sc.fit_mode = fit.value("mode", "binned_expm");
    sc.n_subset = fit.value("n_subset", 10);
    fit_mode(sc); // validate

    for (const auto& name : sc.free_params) {
        if (!sc.guesses.count(name))
            throw std::invalid_argument("config: free parameter '" + name +
                                        "' has no guess in $.guesses");
        if (!sc.params.count(name))
            throw std::invalid_argument("config: free parameter '" + name +
                                        "' has no value in $.parameters");
    }
    return sc;
}

ScenarioConfig load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json(ss.str());
}

std::string to_json(const ScenarioConfig& sc) {
    json j;
    j["name"] = sc.name;
    j["family"] = sc.family;
    j["detection"] = {{"bin_width_us", sc.bin_width_us},
                      {"n_bins", sc.n_bins},
                      {"gain", sc.gain},
                      {"n_trunc", sc.n_trunc}};
    j["parameters"] = sc.params;
    j["free"] = sc.free_params;
    j["guesses"] = sc.guesses;
    j["requests"] = json::array();
    for (const auto& r : sc.requests) {
        json rj = {{"type", r.type},       {"detector", r.detector},
                   {"detector2", r.detector2}, {"ref_bin", r.ref_bin},
                   {"k_min", r.k_min},     {"k_max", r.k_max}};
        if (!r.prefix_bins.empty()) rj["prefix_bins"] = r.prefix_bins;
        j["requests"].push_back(rj);
    }
    j["simulation"] = {{"n_exp", sc.n_exp},
                       {"substeps_per_bin", sc.substeps_per_bin},
                       {"seed", sc.seed}};
    j["variants"] = json::array();
    for (const auto& v : sc.variants) {
        json vj = {{"label", v.label}};
        if (!v.param_scale.empty()) vj["param_scale"] = v.param_scale;
        j["variants"].push_back(vj);
    }
    j["fit"] = {{"mode", sc.fit_mode}, {"n_subset", sc.n_subset}};
    return j.dump(2);
}

} // namespace corrfit::scenario
