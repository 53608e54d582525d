// estimator.cpp — Empirical estimates and the damped least-squares machinery

#include "corrfit/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "corrfit/parallel.hpp"

namespace corrfit::estimator {

std::vector<CorrelationEstimate> empirical_correlation(const TrajectoryBatch& batch,
                                                       std::span<const MultiIndex> requests,
                                                       long traj_begin, long traj_end) {
    if (traj_end < 0) traj_end = batch.n_exp;
    if (traj_begin < 0 || traj_end > batch.n_exp || traj_begin >= traj_end)
        throw std::invalid_argument("empirical_correlation: trajectory range invalid");
    const long n = traj_end - traj_begin;

    std::vector<CorrelationEstimate> out(requests.size());
    for (std::size_t r = 0; r < requests.size(); ++r) {
        const auto& idx = requests[r].points;
        for (const auto& [det, bin] : idx) {
            if (det < 0 || det >= batch.n_detectors || bin < 0 || bin >= batch.n_bins)
                throw std::out_of_range("empirical_correlation: index out of range");
        }
        double mean = 0.0;
        for (long j = traj_begin; j < traj_end; ++j) {
            double prod = 1.0;
            for (const auto& [det, bin] : idx) prod *= batch.at(j, det, bin);
            mean += prod;
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (long j = traj_begin; j < traj_end; ++j) {
            double prod = 1.0;
            for (const auto& [det, bin] : idx) prod *= batch.at(j, det, bin);
            var += (prod - mean) * (prod - mean);
        }
        var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
        out[r].index = requests[r];
        out[r].value = mean;
        out[r].sem = std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
        out[r].n_exp = n;
    }
    return out;
}

std::pair<double, double> estimate_gain(const TrajectoryBatch& vacuum_batch,
                                        double bin_width) {
    if (bin_width <= 0.0) throw std::invalid_argument("estimate_gain: bin width");
    std::vector<MultiIndex> reqs;
    for (int det = 0; det < vacuum_batch.n_detectors; ++det)
        for (int k = 0; k < vacuum_batch.n_bins; ++k)
            reqs.push_back({{{det, k}, {det, k}}});
    const auto est = empirical_correlation(vacuum_batch, reqs);
    double gsum = 0.0, var = 0.0;
    for (const auto& e : est) {
        const double v = std::max(e.value, 0.0); // guard, though E[I^2] >= 0
        const double g = std::sqrt(v * bin_width);
        gsum += g;
        if (g > 0.0) {
            const double dg = e.sem * bin_width / (2.0 * g);
            var += dg * dg;
        }
    }
    const double nb = static_cast<double>(est.size());
    return {gsum / nb, std::sqrt(var) / nb};
}

void Experiment::fill_from_batch(long traj_begin, long traj_end) {
    if (!batch) throw std::invalid_argument("Experiment: no batch attached");
    const auto est = empirical_correlation(*batch, indices, traj_begin, traj_end);
    values.resize(est.size());
    sems.resize(est.size());
    for (std::size_t i = 0; i < est.size(); ++i) {
        values[i] = est[i].value;
        sems[i] = est[i].sem;
    }
}

std::vector<double> model_values(std::span<const Experiment> experiments,
                                 std::span<const double> theta, int threads) {
    (void)threads;
    std::vector<double> out;
    for (const auto& ex : experiments) {
        const ConcreteModel m = model::instantiate(ex.family, {theta.begin(), theta.end()});
        std::vector<correlators::CorrelationRequest> reqs;
        reqs.reserve(ex.indices.size());
        for (const auto& idx : ex.indices)
            reqs.push_back(correlators::binned_request(m, ex.mode, idx.points));
        const auto vals = correlators::evaluate_requests(m, reqs, m.rho0, ex.ode);
        out.insert(out.end(), vals.begin(), vals.end());
    }
    return out;
}

namespace {

struct TransformedProblem {
    std::span<const Experiment> experiments;
    const std::vector<model::ParamSpec>* params;
    std::vector<double> data;
    std::vector<double> weights; // 1 or 1/sem
    int n_evaluations = 0;

    std::vector<double> to_theta(const Eigen::VectorXd& u) const {
        std::vector<double> theta(static_cast<std::size_t>(u.size()));
        for (Eigen::Index i = 0; i < u.size(); ++i)
            theta[static_cast<std::size_t>(i)] = model::from_unconstrained((*params)[i], u[i]);
        return theta;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& u) {
        ++n_evaluations;
        const auto theta = to_theta(u);
        const auto model_vals = model_values(experiments, theta);
        Eigen::VectorXd r(static_cast<Eigen::Index>(model_vals.size()));
        for (std::size_t i = 0; i < model_vals.size(); ++i)
            r[static_cast<Eigen::Index>(i)] = weights[i] * (data[i] - model_vals[i]);
        return r;
    }
};

void validate_shared_params(std::span<const Experiment> experiments) {
    if (experiments.empty()) throw std::invalid_argument("fit: no experiments");
    const auto& ref = experiments[0].family.params;
    for (const auto& ex : experiments) {
        if (ex.family.params.size() != ref.size())
            throw std::invalid_argument("fit: experiments must share the parameter vector");
        for (std::size_t i = 0; i < ref.size(); ++i)
            if (ex.family.params[i].name != ref[i].name)
                throw std::invalid_argument("fit: experiment parameter names differ");
        if (ex.values.size() != ex.n_points())
            throw std::invalid_argument("fit: experiment data missing (values != points)");
    }
}

} // namespace

FitResult least_squares_fit(std::span<const Experiment> experiments,
                            std::span<const double> guess, const FitOptions& opts) {
    validate_shared_params(experiments);
    const auto& params = experiments[0].family.params;
    const int p = static_cast<int>(params.size());
    if (static_cast<int>(guess.size()) != p)
        throw std::invalid_argument("fit: guess size mismatch");

    TransformedProblem prob;
    prob.experiments = experiments;
    prob.params = &params;
    for (const auto& ex : experiments) {
        prob.data.insert(prob.data.end(), ex.values.begin(), ex.values.end());
        for (std::size_t i = 0; i < ex.values.size(); ++i) {
            double w = 1.0;
            if (opts.weight_by_sem && i < ex.sems.size() && ex.sems[i] > 0.0)
                w = 1.0 / ex.sems[i];
            prob.weights.push_back(w);
        }
    }
    const int n_data = static_cast<int>(prob.data.size());
    if (n_data == 0) throw std::invalid_argument("fit: no data");

    Eigen::VectorXd u(p);
    for (int i = 0; i < p; ++i) {
        model::check_bounds(params[static_cast<std::size_t>(i)], guess[static_cast<std::size_t>(i)]);
        u[i] = model::to_unconstrained(params[static_cast<std::size_t>(i)],
                                       guess[static_cast<std::size_t>(i)]);
    }

    Eigen::VectorXd r = prob.residual(u);
    double rnorm = r.norm();
    double lambda = 1e-3;
    bool converged = false, singular = false;
    int iter = 0;

    for (; iter < opts.max_iters && !converged; ++iter) {
        // forward-difference Jacobian of the residual in transformed space
        Eigen::MatrixXd J(n_data, p);
        std::vector<Eigen::VectorXd> cols(static_cast<std::size_t>(p));
        par::parallel_for(p, [&](std::int64_t c0, std::int64_t c1) {
            for (std::int64_t j = c0; j < c1; ++j) {
                TransformedProblem local = prob; // independent evaluation scratch
                Eigen::VectorXd up = u;
                const double h = opts.jac_rel_step * std::max(1.0, std::abs(u[j]));
                up[j] += h;
                cols[static_cast<std::size_t>(j)] = (local.residual(up) - r) / h;
            }
        }, opts.threads);
        prob.n_evaluations += p;
        for (int j = 0; j < p; ++j) J.col(j) = cols[static_cast<std::size_t>(j)];

        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        Eigen::VectorXd diag = JtJ.diagonal();
        const double dmax = diag.maxCoeff();
        if (!(dmax > 0.0)) {
            singular = true;
            break;
        }
        if (diag.minCoeff() < 1e-14 * dmax) singular = true; // flat direction
        for (int j = 0; j < p; ++j) diag[j] = std::max(diag[j], 1e-14 * dmax);

        bool accepted = false;
        for (int tries = 0; tries < 30 && !accepted; ++tries) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal() += lambda * diag;
            const Eigen::VectorXd delta = A.ldlt().solve(-g);
            if (!delta.allFinite()) {
                lambda *= 4.0;
                continue;
            }
            const Eigen::VectorXd u_new = u + delta;
            const Eigen::VectorXd r_new = prob.residual(u_new);
            const double rnorm_new = r_new.norm();
            if (!std::isfinite(rnorm_new)) {
                lambda *= 4.0;
                continue;
            }
            if (rnorm_new <= rnorm) {
                const double drop = rnorm - rnorm_new;
                u = u_new;
                r = r_new;
                if (drop <= opts.rel_tol * std::max(rnorm, 1e-300)) converged = true;
                rnorm = rnorm_new;
                lambda = std::max(lambda / 3.0, 1e-14);
                accepted = true;
            } else {
                lambda *= 2.5;
                if (lambda > 1e14) break;
            }
        }
        if (!accepted) {
            converged = true; // no descent direction left at this scale
            break;
        }
    }

    FitResult res;
    res.theta = prob.to_theta(u);
    res.residuals.resize(static_cast<std::size_t>(n_data));
    double chi2 = 0.0;
    std::size_t off = 0;
    const auto model_vals = model_values(experiments, res.theta);
    for (const auto& ex : experiments) {
        for (std::size_t i = 0; i < ex.values.size(); ++i, ++off) {
            const double resid = ex.values[i] - model_vals[off];
            res.residuals[off] = resid;
            const double sigma = (i < ex.sems.size() && ex.sems[i] > 0.0) ? ex.sems[i] : 1.0;
            chi2 += (resid / sigma) * (resid / sigma);
        }
    }
    res.residual_norm = rnorm;
    res.chi2_reduced = chi2 / std::max(1, n_data - p);
    res.converged = converged;
    res.jacobian_singular = singular;
    res.iterations = iter;
    res.n_evaluations = prob.n_evaluations;
    return res;
}

FitResult multi_start_fit(std::span<const Experiment> experiments,
                          std::span<const std::vector<double>> guesses,
                          const FitOptions& opts) {
    if (guesses.empty()) throw std::invalid_argument("multi_start_fit: no guesses");
    FitResult best;
    bool have = false;
    for (const auto& g : guesses) {
        const FitResult r = least_squares_fit(experiments, g, opts);
        if (!have || r.residual_norm < best.residual_norm) {
            best = r;
            have = true;
        }
    }
    return best;
}

SubsampleResult subsample_errors(std::span<const Experiment> experiments,
                                 std::span<const double> guess, int n_subset,
                                 const FitOptions& opts) {
    if (n_subset < 2) throw std::invalid_argument("subsample_errors: n_subset must be >= 2");
    for (const auto& ex : experiments)
        if (!ex.batch) throw std::invalid_argument("subsample_errors: experiments need batches");

    SubsampleResult out;
    out.n_subsets = n_subset;
    const std::size_t p = experiments[0].family.params.size();

    for (int s = 0; s < n_subset; ++s) {
        std::vector<Experiment> sub(experiments.begin(), experiments.end());
        bool ok = true;
        for (auto& ex : sub) {
            const long n = ex.batch->n_exp;
            const long b = s * n / n_subset, e = (s + 1) * n / n_subset;
            if (e <= b) { ok = false; break; }
            ex.fill_from_batch(b, e);
        }
        if (ok) {
            try {
                const FitResult fr = least_squares_fit(sub, guess, opts);
                out.subset_thetas.push_back(fr.theta);
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok) ++out.n_failed;
    }
    if (out.subset_thetas.size() < static_cast<std::size_t>((n_subset + 1) / 2))
        throw std::runtime_error("subsample_errors: more than half of the subset fits failed");

    out.std_dev.assign(p, 0.0);
    const double ns = static_cast<double>(out.subset_thetas.size());
    for (std::size_t j = 0; j < p; ++j) {
        double mean = 0.0;
        for (const auto& th : out.subset_thetas) mean += th[j];
        mean /= ns;
        double var = 0.0;
        for (const auto& th : out.subset_thetas) var += (th[j] - mean) * (th[j] - mean);
        var = ns > 1 ? var / (ns - 1.0) : 0.0;
        // the subset dispersion estimates a single subset's std; rescale to the
        // full-sample fit
        out.std_dev[j] = std::sqrt(var) / std::sqrt(static_cast<double>(n_subset));
    }
    return out;
}

ProbeReport identifiability_probe(std::span<const Experiment> experiments,
                                  std::span<const double> theta_true,
                                  double noise_level, const FitOptions& opts,
                                  int n_guesses, int n_noise, std::uint64_t seed,
                                  double guess_spread) {
    if (noise_level <= 0.0)
        throw std::invalid_argument("identifiability_probe: noise level must be positive");
    const auto& params = experiments[0].family.params;
    const std::size_t p = params.size();

    // exact values at the true parameters
    const auto exact = model_values(experiments, theta_true);
    std::vector<Experiment> base(experiments.begin(), experiments.end());
    {
        std::size_t off = 0;
        for (auto& ex : base) {
            ex.values.assign(exact.begin() + static_cast<long>(off),
                             exact.begin() + static_cast<long>(off + ex.n_points()));
            ex.sems.clear();
            ex.batch = nullptr;
            off += ex.n_points();
        }
    }

    std::mt19937 gen(static_cast<std::uint32_t>(seed));
    std::uniform_real_distribution<double> unif(-guess_spread, guess_spread);
    // log and logit parameters live on a dimensionless scale; raw parameters
    // are perturbed relative to their own magnitude
    auto perturbed_guess = [&]() {
        std::vector<double> g(p);
        for (std::size_t j = 0; j < p; ++j) {
            const double ut = model::to_unconstrained(params[j], theta_true[j]);
            const double scale = params[j].transform == model::Transform::identity
                                     ? std::max(std::abs(ut), 1e-3)
                                     : 1.0;
            g[j] = model::from_unconstrained(params[j], ut + scale * unif(gen));
        }
        return g;
    };

    ProbeReport rep;
    for (const auto& ps : params) rep.param_names.push_back(ps.name);
    rep.exact_recovery_error.assign(p, 0.0);
    rep.noise_dispersion.assign(p, 0.0);

    std::vector<double> first_guess;
    for (int g = 0; g < n_guesses; ++g) {
        const auto guess = perturbed_guess();
        if (g == 0) first_guess = guess;
        const FitResult fr = least_squares_fit(base, guess, opts);
        for (std::size_t j = 0; j < p; ++j) {
            const double scale = std::max(std::abs(theta_true[j]), 1e-30);
            rep.exact_recovery_error[j] = std::max(
                rep.exact_recovery_error[j], std::abs(fr.theta[j] - theta_true[j]) / scale);
        }
    }

    double rms = 0.0;
    for (double v : exact) rms += v * v;
    rms = std::sqrt(rms / static_cast<double>(exact.size()));
    const double sigma = noise_level * std::max(rms, 1e-30);
    std::normal_distribution<double> gauss(0.0, sigma);

    std::vector<std::vector<double>> noisy_thetas;
    for (int rrep = 0; rrep < n_noise; ++rrep) {
        std::vector<Experiment> noisy = base;
        std::size_t off = 0;
        for (auto& ex : noisy) {
            for (auto& v : ex.values) v = exact[off++] + gauss(gen);
        }
        try {
            const FitResult fr = least_squares_fit(noisy, first_guess, opts);
            noisy_thetas.push_back(fr.theta);
        } catch (const std::exception&) {
        }
    }
    if (noisy_thetas.size() >= 2) {
        const double ns = static_cast<double>(noisy_thetas.size());
        for (std::size_t j = 0; j < p; ++j) {
            double mean = 0.0;
            for (const auto& th : noisy_thetas) mean += th[j];
            mean /= ns;
            double var = 0.0;
            for (const auto& th : noisy_thetas) var += (th[j] - mean) * (th[j] - mean);
            var /= (ns - 1.0);
            rep.noise_dispersion[j] =
                std::sqrt(var) / std::max(std::abs(theta_true[j]), 1e-30);
        }
    }

    rep.degenerate.assign(p, false);
    for (std::size_t j = 0; j < p; ++j) {
        const double scale = std::max(rep.noise_dispersion[j], 1e-12);
        if (rep.exact_recovery_error[j] > 10.0 * scale) {
            rep.degenerate[j] = true;
            rep.flagged.push_back(rep.param_names[j]);
        }
    }
    return rep;
}

} // namespace corrfit::estimator
