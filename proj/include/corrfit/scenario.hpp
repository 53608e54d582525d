// scenario.hpp — Config-driven scenario descriptions with unit handling

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "corrfit/estimator.hpp"
#include "corrfit/families.hpp"

namespace corrfit::scenario {

// A correlation-request template expanded over a bin range.
struct RequestSpec {
    std::string type;           // "one_point" | "two_point" | "tail" | "coincident"
    int detector = 0;           // first point
    int detector2 = 0;          // remaining points (two_point/tail)
    int ref_bin = 0;            // two_point: fixed first bin
    std::vector<int> prefix_bins; // tail: fixed leading bins on detector
    int k_min = 0, k_max = 0;   // varying last bin
};

struct Variant {
    std::string label = "a";
    std::map<std::string, double> param_scale;
};

// Frequencies are given as in the tables, i.e. values in kHz carrying an
// implicit 2*pi; internally one time unit is one bin width.
struct ScenarioConfig {
    std::string name;
    std::string family;
    double bin_width_us = 1.0;
    int n_bins = 1;
    double gain = 1.0;
    int n_trunc = 0;
    std::map<std::string, double> params;   // table units
    std::vector<std::string> free_params;
    std::map<std::string, double> guesses;  // table units
    std::vector<RequestSpec> requests;
    long n_exp = 1;
    int substeps_per_bin = 100;
    std::uint64_t seed = 1;
    std::vector<Variant> variants = {Variant{}};
    std::string fit_mode = "binned_expm";   // or "sharp_approx" / "filtered_ode"
    int n_subset = 10;
};

// table value -> internal angular rate (time unit = bin width); identity for
// dimensionless parameters
double to_internal(const ScenarioConfig& sc, const std::string& param, double table_value);
double to_table(const ScenarioConfig& sc, const std::string& param, double internal_value);

families::Settings settings_for(const ScenarioConfig& sc, const Variant& v);
ModelFamily family_for(const ScenarioConfig& sc, const Variant& v);

// free-parameter vectors in internal units
std::vector<double> internal_free_values(const ScenarioConfig& sc,
                                         const std::map<std::string, double>& table_values);
std::vector<double> true_values(const ScenarioConfig& sc);
std::vector<double> guess_values(const ScenarioConfig& sc);

correlators::Mode fit_mode(const ScenarioConfig& sc);
std::vector<correlators::CorrelationRequest> build_requests(const ScenarioConfig& sc,
                                                            const ConcreteModel& m,
                                                            correlators::Mode mode);
std::vector<estimator::MultiIndex> build_indices(const ScenarioConfig& sc);

// canonical provenance hash of scenario + variant (model fingerprint)
std::string fingerprint(const ScenarioConfig& sc, const Variant& v);

ScenarioConfig builtin(const std::string& name);
std::vector<std::string> builtin_names();

ScenarioConfig load_json_file(const std::string& path);
ScenarioConfig parse_json(const std::string& text);
std::string to_json(const ScenarioConfig& sc);

} // namespace corrfit::scenario
