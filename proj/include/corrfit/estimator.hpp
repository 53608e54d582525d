// estimator.hpp — Empirical correlation estimates with uncertainties, damped
// least-squares parameter fitting, subsampled error bars, gain calibration,
// and identifiability probes

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corrfit/correlators.hpp"
#include "corrfit/model.hpp"
#include "corrfit/smesim.hpp"

namespace corrfit::estimator {

struct MultiIndex {
    std::vector<std::pair<int, int>> points; // (detector, bin)
};

struct CorrelationEstimate {
    MultiIndex index;
    double value = 0.0;
    double sem = 0.0; // unbiased sample std / sqrt(n_exp)
    long n_exp = 0;
};

// (1/n) sum_j prod_i I^(j)_{det_i, bin_i} with its standard error, over the
// trajectory range [traj_begin, traj_end) (full batch by default)
std::vector<CorrelationEstimate> empirical_correlation(const TrajectoryBatch& batch,
                                                       std::span<const MultiIndex> requests,
                                                       long traj_begin = 0,
                                                       long traj_end = -1);

// gain from the vacuum autocorrelation E[I_k^2] = G^2 / dt, averaged over bins
std::pair<double, double> estimate_gain(const TrajectoryBatch& vacuum_batch,
                                        double bin_width);

// One experimental configuration entering a (possibly joint) fit. All
// experiments of a fit share the same parameter vector; per-configuration
// differences (e.g. a scaled drive) live in the family builders. The model
// side of each data point is the correlation of the bins in `indices`,
// computed in the given mode against the current parameter vector.
struct Experiment {
    ModelFamily family;
    correlators::Mode mode = correlators::Mode::binned_expm;
    std::vector<MultiIndex> indices;
    const TrajectoryBatch* batch = nullptr;  // source of the data, for subsampling
    std::vector<double> values;              // data to fit
    std::vector<double> sems;                // optional
    OdeSolverConfig ode;

    std::size_t n_points() const { return indices.size(); }
    void fill_from_batch(long traj_begin = 0, long traj_end = -1);
};

struct FitOptions {
    double jac_rel_step = 1e-6; // forward-difference step in transformed space
    int max_iters = 200;
    double rel_tol = 1e-10;     // relative residual-norm change at convergence
    bool weight_by_sem = false; // deviation from the unweighted default
    int threads = 0;
};

struct FitResult {
    std::vector<double> theta;     // fitted parameters (natural space)
    std::vector<double> std_dev;   // per-parameter subsampled std (when computed)
    std::vector<double> residuals; // data - model at theta
    double residual_norm = 0.0;
    double chi2_reduced = 0.0;
    bool converged = false;
    bool jacobian_singular = false;
    int iterations = 0;
    int n_evaluations = 0;
};

// model values C_i(theta) for every request of every experiment, concatenated
std::vector<double> model_values(std::span<const Experiment> experiments,
                                 std::span<const double> theta, int threads = 0);

// Levenberg-Marquardt in transformed parameter space
FitResult least_squares_fit(std::span<const Experiment> experiments,
                            std::span<const double> guess, const FitOptions& opts = {});

// multi-start: best residual wins
FitResult multi_start_fit(std::span<const Experiment> experiments,
                          std::span<const std::vector<double>> guesses,
                          const FitOptions& opts = {});

struct SubsampleResult {
    std::vector<double> std_dev; // std over subset fits / sqrt(n_subset)
    int n_subsets = 0;
    int n_failed = 0;
    std::vector<std::vector<double>> subset_thetas;
};

// splits each experiment's batch into n_subset trajectory blocks, refits each
SubsampleResult subsample_errors(std::span<const Experiment> experiments,
                                 std::span<const double> guess, int n_subset,
                                 const FitOptions& opts = {});

struct ProbeReport {
    std::vector<std::string> param_names;
    std::vector<double> exact_recovery_error; // relative, worst over guesses
    std::vector<double> noise_dispersion;     // relative std over noisy refits
    std::vector<bool> degenerate;
    std::vector<std::string> flagged;
};

// (a) fit noise-free exact values from perturbed guesses; (b) fit the same
// values with added Gaussian noise of size noise_level * rms(values). Flags a
// parameter when its exact recovery error exceeds 10x the noise-induced scale.
// guess_spread is the half-width of the uniform perturbation applied to the
// true parameters in transformed space.
ProbeReport identifiability_probe(std::span<const Experiment> experiments,
                                  std::span<const double> theta_true,
                                  double noise_level, const FitOptions& opts = {},
                                  int n_guesses = 4, int n_noise = 6,
                                  std::uint64_t seed = 7777, double guess_spread = 0.3);

} // namespace corrfit::estimator
