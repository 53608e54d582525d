// cli_app.cpp — Subcommand implementations and argument parsing

#include "corrfit/cli_app.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "corrfit/batch_io.hpp"
#include "corrfit/correlators.hpp"

namespace corrfit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

scenario::ScenarioConfig resolve_config(const std::string& config,
                                        const std::string& builtin) {
    if (!config.empty() && !builtin.empty())
        throw std::invalid_argument("give either --config or --builtin, not both");
    if (!config.empty()) return scenario::load_json_file(config);
    if (!builtin.empty()) return scenario::builtin(builtin);
    throw std::invalid_argument("one of --config or --builtin is required");
}

namespace {

std::string batch_path_for(const scenario::ScenarioConfig& sc, const scenario::Variant& v,
                           const std::string& out_dir) {
    return (fs::path(out_dir) / (sc.name + "_" + v.label + ".cqb")).string();
}

// model + empirical pieces of one variant
struct VariantData {
    scenario::Variant variant;
    ModelFamily family;
    estimator::Experiment experiment;
};

std::vector<VariantData> make_variants(const scenario::ScenarioConfig& sc) {
    std::vector<VariantData> out;
    for (const auto& v : sc.variants) {
        VariantData vd;
        vd.variant = v;
        vd.family = scenario::family_for(sc, v);
        vd.experiment.family = vd.family;
        vd.experiment.mode = scenario::fit_mode(sc);
        vd.experiment.indices = scenario::build_indices(sc);
        out.push_back(std::move(vd));
    }
    return out;
}

void check_batch_matches(const scenario::ScenarioConfig& sc, const scenario::Variant& v,
                         const TrajectoryBatch& batch) {
    const ConcreteModel m =
        model::instantiate(scenario::family_for(sc, v), scenario::true_values(sc));
    if (batch.n_detectors != static_cast<int>(m.detectors.size()) ||
        batch.n_bins != sc.n_bins)
        throw std::invalid_argument("batch shape does not match the scenario (variant " +
                                    v.label + ")");
    const std::string fp = scenario::fingerprint(sc, v);
    if (!batch.fingerprint.empty() && batch.fingerprint != fp)
        throw std::invalid_argument("batch fingerprint mismatch for variant " + v.label +
                                    " (simulated from a different configuration?)");
}

std::string request_label(const estimator::MultiIndex& idx) {
    std::string s;
    for (const auto& [det, bin] : idx.points) {
        if (!s.empty()) s += "*";
        s += "I[d" + std::to_string(det) + ",k" + std::to_string(bin) + "]";
    }
    return s;
}

} // namespace

std::vector<std::string> cmd_simulate(const scenario::ScenarioConfig& sc,
                                      const std::string& out_dir, const Overrides& ov) {
    fs::create_directories(out_dir);
    std::vector<std::string> paths;
    for (const auto& v : sc.variants) {
        const ConcreteModel m =
            model::instantiate(scenario::family_for(sc, v), scenario::true_values(sc));
        SimConfig cfg;
        cfg.n_exp = ov.n_exp > 0 ? ov.n_exp : sc.n_exp;
        cfg.seed = ov.has_seed ? ov.seed : sc.seed;
        cfg.substeps_per_bin = sc.substeps_per_bin;
        cfg.threads = ov.threads;
        TrajectoryBatch batch = smesim::simulate_batch(m, cfg, scenario::fingerprint(sc, v));
        const std::string path = batch_path_for(sc, v, out_dir);
        batch_io::write(path, batch);
        paths.push_back(path);
    }
    return paths;
}

std::vector<std::string> cmd_correlate(const scenario::ScenarioConfig& sc,
                                       const std::vector<std::string>& batch_paths,
                                       const std::string& out_dir) {
    if (!batch_paths.empty() && batch_paths.size() != sc.variants.size())
        throw std::invalid_argument("correlate: need one batch per variant");
    fs::create_directories(out_dir);

    std::vector<std::string> paths;
    const auto indices = scenario::build_indices(sc);
    for (std::size_t vi = 0; vi < sc.variants.size(); ++vi) {
        const auto& v = sc.variants[vi];
        const ConcreteModel m =
            model::instantiate(scenario::family_for(sc, v), scenario::true_values(sc));
        std::vector<correlators::CorrelationRequest> reqs;
        for (const auto& idx : indices)
            reqs.push_back(correlators::binned_request(m, scenario::fit_mode(sc), idx.points));
        const auto exact = correlators::evaluate_requests(m, reqs, m.rho0);

        std::vector<estimator::CorrelationEstimate> emp;
        if (!batch_paths.empty()) {
            const TrajectoryBatch batch = batch_io::read(batch_paths[vi]);
            check_batch_matches(sc, v, batch);
            emp = estimator::empirical_correlation(batch, indices);
        }

        const std::string path =
            (fs::path(out_dir) / (sc.name + "_" + v.label + "_correlations.csv")).string();
        std::ofstream out(path);
        out.precision(12);
        out << "request,last_bin_time_us,exact";
        if (!emp.empty()) out << ",empirical,sem";
        out << "\n";
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const int last_bin = indices[i].points.back().second;
            out << request_label(indices[i]) << ","
                << (last_bin + 0.5) * sc.bin_width_us << "," << exact[i];
            if (!emp.empty()) out << "," << emp[i].value << "," << emp[i].sem;
            out << "\n";
        }
        paths.push_back(path);
    }
    return paths;
}

FitReport cmd_fit(const scenario::ScenarioConfig& sc,
                  const std::vector<std::string>& batch_paths, const std::string& out_dir,
                  bool weight_by_sem, bool sweep, int threads) {
    if (batch_paths.size() != sc.variants.size())
        throw std::invalid_argument("fit: need one batch per variant (" +
                                    std::to_string(sc.variants.size()) + ")");
    if (sc.free_params.empty()) throw std::invalid_argument("fit: no free parameters");
    fs::create_directories(out_dir);

    auto variants = make_variants(sc);
    std::vector<TrajectoryBatch> batches(variants.size());
    for (std::size_t i = 0; i < variants.size(); ++i) {
        batches[i] = batch_io::read(batch_paths[i]);
        check_batch_matches(sc, sc.variants[i], batches[i]);
        variants[i].experiment.batch = &batches[i];
        variants[i].experiment.fill_from_batch();
    }
    std::vector<estimator::Experiment> experiments;
    for (auto& vd : variants) experiments.push_back(vd.experiment);

    estimator::FitOptions opts;
    opts.weight_by_sem = weight_by_sem;
    opts.threads = threads;
    const auto guess = scenario::guess_values(sc);
    const auto truth = scenario::true_values(sc);
    estimator::FitResult fr = estimator::least_squares_fit(experiments, guess, opts);
    const auto sub = estimator::subsample_errors(experiments, fr.theta, sc.n_subset, opts);

    FitReport rep;
    rep.param_names = sc.free_params;
    rep.converged = fr.converged;
    rep.iterations = fr.iterations;
    rep.residual_norm = fr.residual_norm;
    rep.chi2_reduced = fr.chi2_reduced;
    for (std::size_t j = 0; j < sc.free_params.size(); ++j) {
        const auto& name = sc.free_params[j];
        rep.guess.push_back(sc.guesses.at(name));
        rep.fitted.push_back(scenario::to_table(sc, name, fr.theta[j]));
        rep.std_dev.push_back(scenario::to_table(sc, name, sub.std_dev[j]));
        rep.truth.push_back(sc.params.at(name));
    }

    json doc;
    doc["scenario"] = sc.name;
    doc["fit_mode"] = sc.fit_mode;
    doc["converged"] = fr.converged;
    doc["iterations"] = fr.iterations;
    doc["n_evaluations"] = fr.n_evaluations;
    doc["residual_norm"] = fr.residual_norm;
    doc["chi2_reduced"] = fr.chi2_reduced;
    doc["n_subset"] = sc.n_subset;
    doc["subset_fits_failed"] = sub.n_failed;
    doc["parameters"] = json::array();
    for (std::size_t j = 0; j < sc.free_params.size(); ++j) {
        doc["parameters"].push_back({{"name", sc.free_params[j]},
                                     {"guess", rep.guess[j]},
                                     {"fitted", rep.fitted[j]},
                                     {"std", rep.std_dev[j]},
                                     {"true", rep.truth[j]},
                                     {"rel_error",
                                      std::abs(rep.fitted[j] - rep.truth[j]) /
                                          std::max(std::abs(rep.truth[j]), 1e-30)}});
    }

    // plot data: one CSV per variant with empirical, SEM, fitted and truth curves
    const auto fitted_vals = estimator::model_values(experiments, fr.theta);
    const auto truth_vals = estimator::model_values(experiments, truth);
    std::size_t off = 0;
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        const auto& ex = experiments[vi];
        const std::string path =
            (fs::path(out_dir) / (sc.name + "_" + sc.variants[vi].label + "_fit.csv"))
                .string();
        std::ofstream out(path);
        out.precision(12);
        out << "request,last_bin_time_us,empirical,sem,fitted,exact_true\n";
        for (std::size_t i = 0; i < ex.indices.size(); ++i) {
            const int last_bin = ex.indices[i].points.back().second;
            out << request_label(ex.indices[i]) << ","
                << (last_bin + 0.5) * sc.bin_width_us << "," << ex.values[i] << ","
                << ex.sems[i] << "," << fitted_vals[off + i] << "," << truth_vals[off + i]
                << "\n";
        }
        off += ex.indices.size();
        rep.plot_paths.push_back(path);
    }

    if (sweep) { // vary one parameter at a time around the fitted point
        for (std::size_t j = 0; j < sc.free_params.size(); ++j) {
            const std::string path =
                (fs::path(out_dir) / (sc.name + "_sweep_" + sc.free_params[j] + ".csv"))
                    .string();
            std::ofstream out(path);
            out.precision(12);
            out << "factor,variant,request,value\n";
            for (double f : {0.8, 0.9, 1.0, 1.1, 1.2}) {
                auto theta = fr.theta;
                theta[j] *= f;
                try {
                    const auto vals = estimator::model_values(experiments, theta);
                    std::size_t o = 0;
                    for (std::size_t vi = 0; vi < variants.size(); ++vi)
                        for (const auto& idx : experiments[vi].indices)
                            out << f << "," << sc.variants[vi].label << ","
                                << request_label(idx) << "," << vals[o++] << "\n";
                } catch (const std::exception&) {
                    // out-of-bounds sweep points are skipped
                }
            }
            rep.plot_paths.push_back(path);
        }
    }

    const std::string report_path = (fs::path(out_dir) / (sc.name + "_fit.json")).string();
    std::ofstream rout(report_path);
    rout << doc.dump(2) << "\n";
    rep.report_path = report_path;
    return rep;
}

SymmetrySummary cmd_symmetry_check(const scenario::ScenarioConfig& sc,
                                   const std::vector<int>& orders) {
    const ConcreteModel m = model::instantiate(scenario::family_for(sc, sc.variants[0]),
                                               scenario::true_values(sc));
    SymmetrySummary s;
    s.report = correlators::symmetry_check(m, correlators::parity_unitary(m.dim()), orders);
    s.passed = s.report.all_conditions_hold();
    return s;
}

GainResult cmd_gain(const std::string& batch_path) {
    const TrajectoryBatch batch = batch_io::read(batch_path);
    const auto [g, std_dev] = estimator::estimate_gain(batch, batch.bin_width);
    return {g, std_dev};
}

int run(int argc, const char* const* argv) {
    CLI::App app{"corrfit — correlation functions of continuously measured quantum "
                 "systems, and parameter estimation by least-squares fitting"};
    app.require_subcommand(1);

    std::string config, builtin, out_dir = ".";
    long n_exp = 0;
    std::uint64_t seed = 0;
    bool has_seed = false;
    int threads = 0;
    std::vector<std::string> batch_paths;

    auto add_config_opts = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "scenario config (JSON)");
        cmd->add_option("--builtin", builtin, "built-in scenario name");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--threads", threads, "worker threads (0: auto)");
    };

    auto* sim = app.add_subcommand("simulate", "simulate SME trajectories and bin them");
    add_config_opts(sim);
    sim->add_option("--n-exp", n_exp, "override the number of trajectories");
    auto* seed_opt = sim->add_option("--seed", seed, "override the RNG seed");

    auto* corr = app.add_subcommand("correlate", "exact (and empirical) correlation values");
    add_config_opts(corr);
    corr->add_option("--batch", batch_paths, "batch file per variant (optional)");

    auto* fit = app.add_subcommand("fit", "least-squares parameter fit against batches");
    add_config_opts(fit);
    fit->add_option("--batch", batch_paths, "batch file per variant")->required();
    bool weight_sem = false, sweep = false;
    fit->add_flag("--weight-sem", weight_sem, "weight residuals by 1/SEM");
    fit->add_flag("--sweep", sweep, "emit per-parameter sweep curves");

    auto* symc = app.add_subcommand("symmetry-check", "parity symmetry conditions and "
                                                      "odd-order correlation values");
    add_config_opts(symc);
    std::vector<int> orders = {1, 3};
    symc->add_option("--orders", orders, "odd orders to verify");

    auto* gain = app.add_subcommand("gain", "estimate the gain from a vacuum batch");
    std::string gain_batch;
    gain->add_option("--batch", gain_batch, "vacuum batch file")->required();

    auto* cfg = app.add_subcommand("config", "print a built-in scenario as JSON");
    cfg->add_option("--builtin", builtin, "built-in scenario name")->required();
    std::string cfg_out;
    cfg->add_option("--out-file", cfg_out, "write to file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (sim->parsed()) {
            Overrides ov;
            ov.n_exp = n_exp;
            ov.threads = threads;
            if (seed_opt->count() > 0) {
                ov.seed = seed;
                ov.has_seed = true;
            } else {
                (void)has_seed;
            }
            const auto paths = cmd_simulate(resolve_config(config, builtin), out_dir, ov);
            for (const auto& p : paths) std::cout << p << "\n";
        } else if (corr->parsed()) {
            const auto paths =
                cmd_correlate(resolve_config(config, builtin), batch_paths, out_dir);
            for (const auto& p : paths) std::cout << p << "\n";
        } else if (fit->parsed()) {
            const auto rep = cmd_fit(resolve_config(config, builtin), batch_paths, out_dir,
                                     weight_sem, sweep, threads);
            std::cout << "fit " << (rep.converged ? "converged" : "did NOT converge")
                      << " after " << rep.iterations << " iterations\n";
            for (std::size_t j = 0; j < rep.param_names.size(); ++j)
                std::cout << "  " << rep.param_names[j] << " = " << rep.fitted[j] << " +- "
                          << rep.std_dev[j] << "  (true " << rep.truth[j] << ")\n";
            std::cout << "report: " << rep.report_path << "\n";
            if (!rep.converged) return 1;
        } else if (symc->parsed()) {
            const auto s = cmd_symmetry_check(resolve_config(config, builtin), orders);
            std::cout << "[L,S]=0: " << (s.report.liouvillian_commutes ? "yes" : "NO")
                      << "\nS(rho0)=rho0: "
                      << (s.report.initial_state_symmetric ? "yes" : "NO")
                      << "\n{C_L,S}=0: "
                      << (s.report.correlation_anticommutes ? "yes" : "NO") << "\n";
            std::cout << "max |odd-order value| = " << s.report.max_abs_odd_value << "\n";
            for (const auto& v : s.report.violated) std::cout << "violated: " << v << "\n";
            if (!s.passed) return 1;
        } else if (gain->parsed()) {
            const auto g = cmd_gain(gain_batch);
            std::cout << "G = " << g.gain << " +- " << g.std_dev << "\n";
        } else if (cfg->parsed()) {
            const std::string text = scenario::to_json(scenario::builtin(builtin));
            if (cfg_out.empty()) {
                std::cout << text << "\n";
            } else {
                std::ofstream out(cfg_out);
                out << text << "\n";
            }
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace corrfit::cli
