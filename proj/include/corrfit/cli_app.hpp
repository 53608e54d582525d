// cli_app.hpp — Command-line entry points (also callable programmatically)

#pragma once

#include <string>
#include <vector>

#include "corrfit/estimator.hpp"
#include "corrfit/scenario.hpp"

namespace corrfit::cli {

struct Overrides {
    long n_exp = 0;           // 0: keep config value
    std::uint64_t seed = 0;
    bool has_seed = false;
    int threads = 0;
};

// resolves a --config path or a built-in scenario name
scenario::ScenarioConfig resolve_config(const std::string& config, const std::string& builtin);

// writes one batch file per variant, returns the paths
std::vector<std::string> cmd_simulate(const scenario::ScenarioConfig& sc,
                                      const std::string& out_dir, const Overrides& ov = {});

// CSV of exact correlation values per variant (plus empirical columns when
// batches are supplied); returns the written paths
std::vector<std::string> cmd_correlate(const scenario::ScenarioConfig& sc,
                                       const std::vector<std::string>& batch_paths,
                                       const std::string& out_dir);

struct FitReport {
    std::vector<std::string> param_names;
    std::vector<double> guess, fitted, std_dev, truth; // table units
    bool converged = false;
    int iterations = 0;
    double residual_norm = 0.0, chi2_reduced = 0.0;
    std::string report_path;
    std::vector<std::string> plot_paths;
};
FitReport cmd_fit(const scenario::ScenarioConfig& sc,
                  const std::vector<std::string>& batch_paths, const std::string& out_dir,
                  bool weight_by_sem = false, bool sweep = false, int threads = 0);

struct SymmetrySummary {
    correlators::SymmetryReport report;
    bool passed = false;
};
SymmetrySummary cmd_symmetry_check(const scenario::ScenarioConfig& sc,
                                   const std::vector<int>& orders = {1, 3});

struct GainResult {
    double gain = 0.0, std_dev = 0.0;
};
GainResult cmd_gain(const std::string& batch_path);

int run(int argc, const char* const* argv);

} // namespace corrfit::cli
