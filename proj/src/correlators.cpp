// correlators.cpp — Sensitivity-system assembly and the correlation-function
// computation paths

#include "corrfit/correlators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

namespace corrfit::correlators {

using Vec = Eigen::VectorXcd;

// ---- filters ----------------------------------------------------------------

double FilterSpec::support_begin() const {
    if (kind == Kind::rect_bin) return bin * bin_width;
    return grid_t.empty() ? 0.0 : grid_t.front();
}

double FilterSpec::support_end() const {
    if (kind == Kind::rect_bin) return (bin + 1) * bin_width;
    return grid_t.empty() ? 0.0 : grid_t.back();
}

double FilterSpec::value(double t) const {
    if (kind == Kind::rect_bin) {
        return (t >= support_begin() && t < support_end()) ? scale : 0.0;
    }
    if (grid_t.size() < 2 || t < grid_t.front() || t > grid_t.back()) return 0.0;
    const auto it = std::upper_bound(grid_t.begin(), grid_t.end(), t);
    const std::size_t i = std::min<std::size_t>(grid_t.size() - 1,
                                                static_cast<std::size_t>(it - grid_t.begin()));
    if (i == 0) return grid_v.front();
    const double t0 = grid_t[i - 1], t1 = grid_t[i];
    const double w = t1 > t0 ? (t - t0) / (t1 - t0) : 0.0;
    return grid_v[i - 1] * (1.0 - w) + grid_v[i] * w;
}

double FilterSpec::integral() const {
    if (kind == Kind::rect_bin) return scale * bin_width;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < grid_t.size(); ++i)
        acc += 0.5 * (grid_v[i] + grid_v[i + 1]) * (grid_t[i + 1] - grid_t[i]);
    return acc;
}

double FilterSpec::max_abs() const {
    if (kind == Kind::rect_bin) return std::abs(scale);
    double m = 0.0;
    for (double v : grid_v) m = std::max(m, std::abs(v));
    return m;
}

FilterSpec rect_bin_filter(const DetectorSpec& d, int bin) {
    if (bin < 0) throw std::invalid_argument("rect_bin_filter: negative bin index");
    FilterSpec f;
    f.kind = FilterSpec::Kind::rect_bin;
    f.bin = bin;
    f.bin_width = d.bin_width;
    f.scale = d.kind == DetectorKind::diffusive ? d.gain / d.bin_width : 1.0;
    return f;
}

CorrelationRequest binned_request(const ConcreteModel& m, Mode mode,
                                  const std::vector<std::pair<int, int>>& det_bins) {
    CorrelationRequest req;
    req.mode = mode;
    for (const auto& [det, bin] : det_bins) {
        if (det < 0 || det >= static_cast<int>(m.detectors.size()))
            throw std::invalid_argument("binned_request: detector index out of range");
        CorrelationRequest::Point p;
        p.detector = det;
        p.filter = rect_bin_filter(m.detectors[det], bin);
        req.points.push_back(std::move(p));
    }
    return req;
}

CorrelationRequest sharp_request(const std::vector<std::pair<int, double>>& det_times) {
    CorrelationRequest req;
    req.mode = Mode::sharp;
    for (const auto& [det, t] : det_times) {
        CorrelationRequest::Point p;
        p.detector = det;
        p.is_sharp = true;
        p.time = t;
        req.points.push_back(std::move(p));
    }
    return req;
}

// ---- augmented generator ------------------------------------------------------

AugmentedGenerator::AugmentedGenerator(const ConcreteModel& m,
                                       std::vector<std::pair<int, FilterSpec>> points,
                                       double g_override)
    : n_(static_cast<int>(points.size())), d_(m.dim()), points_(std::move(points)), lop_(m) {
    if (n_ < 1) throw std::invalid_argument("augmented generator: at least one point required");
    if (n_ > 4) throw std::invalid_argument("augmented generator: order above 4 not supported");

    g_ = 0.0;
    for (auto& [det, f] : points_) {
        if (det < 0 || det >= static_cast<int>(m.detectors.size()))
            throw std::invalid_argument("augmented generator: detector index out of range");
        g_ = std::max(g_, f.max_abs());
    }
    if (g_override > 0.0) g_ = g_override;
    if (g_ <= 0.0) g_ = 1.0;
    for (auto& [det, f] : points_) { // normalise so filter values are O(1)
        f.scale /= g_;
        for (double& v : f.grid_v) v /= g_;
    }

    corr_.reserve(points_.size());
    for (const auto& [det, f] : points_) corr_.emplace_back(m.detectors[det]);

    // Differentiating the tilted evolution distributes sources over subsets:
    //   dx_S = L x_S + sum_{i in S} f_i C_i x_{S\i}
    //        + sum_{pairs in S, same diffusive detector} f_i f_l x_{S\{i,l}}
    //        + sum_{T in S, |T|>=2, same jump detector} (prod_T f) C x_{S\T}
    const int n_subsets = 1 << n_;
    for (int S = 1; S < n_subsets; ++S) {
        for (int T = S; T > 0; T = (T - 1) & S) {
            std::vector<int> pts;
            for (int i = 0; i < n_; ++i)
                if (T & (1 << i)) pts.push_back(i);
            const int rest = S & ~T;
            if (pts.size() == 1) {
                sources_.push_back({S, rest, pts[0], pts});
            } else {
                const int det0 = points_[pts[0]].first;
                bool same = true;
                for (int i : pts) same = same && points_[i].first == det0;
                if (same) {
                    const auto kind = m.detectors[det0].kind;
                    if (kind == DetectorKind::jump) {
                        sources_.push_back({S, rest, pts[0], pts});
                    } else if (pts.size() == 2) {
                        sources_.push_back({S, rest, -1, pts});
                    }
                }
            }
        }
    }

    t1_.resize(d_, d_);
    t2_.resize(d_, d_);
}

double AugmentedGenerator::support_end() const {
    double T = 0.0;
    for (const auto& [det, f] : points_) T = std::max(T, f.support_end());
    return T;
}

std::vector<double> AugmentedGenerator::breakpoints() const {
    std::set<double> edges;
    for (const auto& [det, f] : points_) {
        if (f.kind == FilterSpec::Kind::rect_bin) {
            edges.insert(f.support_begin());
            edges.insert(f.support_end());
        } else {
            for (double t : f.grid_t) edges.insert(t);
        }
    }
    return {edges.begin(), edges.end()};
}

std::vector<double> AugmentedGenerator::filter_values(double t) const {
    std::vector<double> v(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) v[i] = points_[i].second.value(t);
    return v;
}

void AugmentedGenerator::apply(double t, const Vec& x, Vec& y) const {
    apply_impl(filter_values(t), x, y);
}

lindblad::LinearMap AugmentedGenerator::frozen_map(std::vector<double> fvals) const {
    return lindblad::LinearMap{stacked_dim(),
                               [this, fv = std::move(fvals)](const Vec& x, Vec& y) {
                                   apply_impl(fv, x, y);
                               }};
}

void AugmentedGenerator::apply_impl(std::span<const double> fvals, const Vec& x,
                                    Vec& y) const {
    const Eigen::Index blk = static_cast<Eigen::Index>(d_) * d_;
    const int n_subsets = 1 << n_;
    y.resize(x.size());
    for (int S = 0; S < n_subsets; ++S) {
        Eigen::Map<const Operator> xs(x.data() + S * blk, d_, d_);
        Eigen::Map<Operator> ys(y.data() + S * blk, d_, d_);
        lop_.apply(xs, t1_);
        ys = t1_;
    }
    for (const auto& src : sources_) {
        double coeff = 1.0;
        for (int i : src.filter_points) coeff *= fvals[i];
        if (coeff == 0.0) continue;
        Eigen::Map<const Operator> xs(x.data() + src.source * blk, d_, d_);
        Eigen::Map<Operator> yt(y.data() + src.target * blk, d_, d_);
        if (src.corr_point >= 0) {
            corr_[src.corr_point].apply(xs, t2_);
            yt += coeff * t2_;
        } else {
            yt += coeff * xs;
        }
    }
}

AugmentedGenerator assemble_augmented_generator(
    const ConcreteModel& m, const std::vector<std::pair<int, FilterSpec>>& points) {
    return AugmentedGenerator(m, points);
}

// ---- sharp path ---------------------------------------------------------------

double sharp_correlation(const ConcreteModel& m,
                         const std::vector<std::pair<int, double>>& det_times,
                         const Operator& rho0, double tol) {
    if (det_times.empty()) throw std::invalid_argument("sharp_correlation: no points");
    for (std::size_t i = 0; i + 1 < det_times.size(); ++i)
        if (det_times[i + 1].second <= det_times[i].second)
            throw std::invalid_argument(
                "sharp_correlation: times must be strictly increasing "
                "(equal-time sharp values are undefined)");
    if (det_times.front().second < 0.0)
        throw std::invalid_argument("sharp_correlation: negative time");

    model::LiouvillianOp lop(m);
    const auto lmap = lindblad::liouvillian_map(lop);
    const int d = m.dim();
    Vec x = lindblad::vec(rho0);
    double t_prev = 0.0;
    for (const auto& [det, t] : det_times) {
        if (det < 0 || det >= static_cast<int>(m.detectors.size()))
            throw std::invalid_argument("sharp_correlation: detector index out of range");
        lindblad::expm_action(lmap, x, t - t_prev, tol);
        const model::CorrelationOp cop(m.detectors[det]);
        x = lindblad::vec(cop.apply(lindblad::unvec(x, d)));
        t_prev = t;
    }
    Complex tr = 0.0;
    for (int k = 0; k < d; ++k) tr += x[k * d + k];
    return tr.real();
}

std::vector<double> sharp_two_point_batch(const ConcreteModel& m, int det0,
                                          double t0, int det1,
                                          std::span<const double> times,
                                          const Operator& rho0, double tol) {
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] <= t0 || (i > 0 && times[i] <= times[i - 1]))
            throw std::invalid_argument("sharp_two_point_batch: times must ascend beyond t0");
    }
    model::LiouvillianOp lop(m);
    const auto lmap = lindblad::liouvillian_map(lop);
    const int d = m.dim();
    const model::CorrelationOp c0(m.detectors.at(det0)), c1(m.detectors.at(det1));

    Vec x = lindblad::vec(rho0);
    lindblad::expm_action(lmap, x, t0, tol);
    x = lindblad::vec(c0.apply(lindblad::unvec(x, d)));

    std::vector<double> out;
    out.reserve(times.size());
    double t_prev = t0;
    for (double t : times) {
        lindblad::expm_action(lmap, x, t - t_prev, tol);
        const Operator last = c1.apply(lindblad::unvec(x, d));
        out.push_back(last.trace().real());
        t_prev = t;
    }
    return out;
}

// ---- filtered / binned paths ----------------------------------------------------

namespace {

Vec stacked_initial(const Operator& rho0, int n_blocks) {
    const Eigen::Index blk = rho0.size();
    Vec x = Vec::Zero(static_cast<Eigen::Index>(n_blocks) * blk);
    x.head(blk) = lindblad::vec(rho0);
    return x;
}

double top_block_trace(const Vec& x, int d, int n_blocks) {
    const Eigen::Index blk = static_cast<Eigen::Index>(d) * d;
    const Eigen::Index off = static_cast<Eigen::Index>(n_blocks - 1) * blk;
    Complex tr = 0.0;
    for (int k = 0; k < d; ++k) tr += x[off + k * d + k];
    return tr.real();
}

std::vector<std::pair<int, FilterSpec>> bins_to_filters(
    const ConcreteModel& m, const std::vector<std::pair<int, int>>& det_bins) {
    std::vector<std::pair<int, FilterSpec>> points;
    points.reserve(det_bins.size());
    for (const auto& [det, bin] : det_bins) {
        if (det < 0 || det >= static_cast<int>(m.detectors.size()))
            throw std::invalid_argument("correlators: detector index out of range");
        points.emplace_back(det, rect_bin_filter(m.detectors[det], bin));
    }
    return points;
}

} // namespace

double filtered_correlation(const ConcreteModel& m,
                            const std::vector<std::pair<int, FilterSpec>>& points,
                            const Operator& rho0, const OdeSolverConfig& cfg) {
    AugmentedGenerator gen(m, points);
    const double T = gen.support_end();
    Vec x = stacked_initial(rho0, 1 << gen.order());
    auto rhs = [&gen](double t, const Vec& y, Vec& dydt) { gen.apply(t, y, dydt); };
    const auto edges = gen.breakpoints();
    ode::integrate(rhs, x, 0.0, T, cfg, edges);
    const double g = gen.normalisation();
    return std::pow(g, gen.order()) * top_block_trace(x, gen.block_dim(), 1 << gen.order());
}

double binned_correlation(const ConcreteModel& m,
                          const std::vector<std::pair<int, int>>& det_bins,
                          const Operator& rho0, double tol) {
    const auto points = bins_to_filters(m, det_bins);
    AugmentedGenerator gen(m, points);
    const double T = gen.support_end();
    auto edges = gen.breakpoints();
    edges.push_back(T);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    Vec x = stacked_initial(rho0, 1 << gen.order());
    double t = 0.0;
    for (double te : edges) {
        if (te <= t) continue;
        const auto fvals = gen.filter_values(0.5 * (t + te));
        const auto map = gen.frozen_map(fvals);
        lindblad::expm_action(map, x, te - t, tol);
        t = te;
    }
    const double g = gen.normalisation();
    return std::pow(g, gen.order()) * top_block_trace(x, gen.block_dim(), 1 << gen.order());
}

double sharp_approx_binned(const ConcreteModel& m,
                           const std::vector<std::pair<int, int>>& det_bins,
                           const Operator& rho0, double tol) {
    // not valid for coincident bins
    std::set<int> bins;
    for (const auto& [det, bin] : det_bins) {
        if (!bins.insert(bin).second)
            throw std::invalid_argument("sharp_approx_binned: coincident bins");
    }
    std::vector<std::pair<int, double>> det_times;
    double scale = 1.0;
    for (const auto& [det, bin] : det_bins) {
        const auto& ds = m.detectors.at(det);
        const auto f = rect_bin_filter(ds, bin);
        scale *= f.integral(); // G for diffusive, Delta t for jump
        det_times.emplace_back(det, (bin + 0.5) * ds.bin_width);
    }
    std::sort(det_times.begin(), det_times.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    return scale * sharp_correlation(m, det_times, rho0, tol);
}

std::vector<double> batch_tail_binned(const ConcreteModel& m,
                                      const std::vector<std::pair<int, int>>& prefix,
                                      int tail_detector,
                                      std::span<const int> tail_bins,
                                      const Operator& rho0, double tol) {
    if (tail_bins.empty()) return {};
    const int p = static_cast<int>(prefix.size());
    if (p + 1 > 4) throw std::invalid_argument("batch_tail_binned: order above 4");
    const double dt = m.detectors.at(tail_detector).bin_width;
    int max_prefix_bin = -1;
    for (const auto& [det, bin] : prefix) {
        if (std::abs(m.detectors.at(det).bin_width - dt) > 1e-12 * dt)
            throw std::invalid_argument("batch_tail_binned: detectors must share a bin grid");
        max_prefix_bin = std::max(max_prefix_bin, bin);
    }
    for (std::size_t i = 0; i < tail_bins.size(); ++i) {
        if (tail_bins[i] <= max_prefix_bin)
            throw std::invalid_argument("batch_tail_binned: tail bins must follow the prefix");
        if (i > 0 && tail_bins[i] <= tail_bins[i - 1])
            throw std::invalid_argument("batch_tail_binned: tail bins must ascend");
    }

    // full generator over prefix + tail; the tail point is the highest bit
    auto full_points = bins_to_filters(m, prefix);
    full_points.emplace_back(tail_detector,
                             rect_bin_filter(m.detectors.at(tail_detector), tail_bins[0]));
    AugmentedGenerator full(m, full_points);
    const int d = full.block_dim();
    const Eigen::Index blk = static_cast<Eigen::Index>(d) * d;
    const int n_full_blocks = 1 << (p + 1);
    const int n_prefix_blocks = 1 << p;
    const double g = full.normalisation();

    // tail-active filter values: prefix filters off, tail filter on
    std::vector<double> tail_fvals(p + 1, 0.0);
    tail_fvals[p] = full_points.back().second.value(
        (tail_bins[0] + 0.5) * dt); // normalised tail scale
    const auto tail_map = full.frozen_map(tail_fvals);

    // the prefix blocks are marched with a 2^p system sharing the same
    // normalisation; the tail system only runs for one bin per requested k
    std::unique_ptr<AugmentedGenerator> pre;
    model::LiouvillianOp plain(m);
    if (p > 0) pre = std::make_unique<AugmentedGenerator>(m, bins_to_filters(m, prefix), g);
    auto march_prefix = [&](Vec& x, int bin) {
        if (p > 0) {
            lindblad::expm_action(pre->frozen_map(pre->filter_values((bin + 0.5) * dt)), x,
                                  dt, tol);
        } else {
            lindblad::expm_action(lindblad::liouvillian_map(plain), x, dt, tol);
        }
    };

    Vec xp = stacked_initial(rho0, n_prefix_blocks);
    Vec xfull(static_cast<Eigen::Index>(n_full_blocks) * blk);
    std::vector<double> out;
    out.reserve(tail_bins.size());
    std::size_t next_tail = 0;
    const int last_bin = tail_bins[tail_bins.size() - 1];
    for (int b = 0; b <= last_bin; ++b) {
        if (next_tail < tail_bins.size() && tail_bins[next_tail] == b) {
            xfull.setZero();
            xfull.head(static_cast<Eigen::Index>(n_prefix_blocks) * blk) = xp;
            lindblad::expm_action(tail_map, xfull, dt, tol);
            out.push_back(std::pow(g, p + 1) * top_block_trace(xfull, d, n_full_blocks));
            ++next_tail;
            if (next_tail == tail_bins.size()) break;
        }
        march_prefix(xp, b);
    }
    return out;
}

std::vector<double> batch_two_point(const ConcreteModel& m, int det0, int det1,
                                    int k_max, const Operator& rho0, double tol) {
    std::vector<int> tails(static_cast<std::size_t>(k_max));
    for (int k = 1; k <= k_max; ++k) tails[static_cast<std::size_t>(k - 1)] = k;
    return batch_tail_binned(m, {{det0, 0}}, det1, tails, rho0, tol);
}

// ---- tilted evolution -----------------------------------------------------------

TiltedResult tilted_evolution(const ConcreteModel& m,
                              const std::vector<FilterSpec>& j_per_detector,
                              const Operator& rho0, double T,
                              const OdeSolverConfig& cfg) {
    if (j_per_detector.size() != m.detectors.size())
        throw std::invalid_argument("tilted_evolution: one source function per detector");
    const int d = m.dim();
    model::LiouvillianOp lop(m);
    std::vector<model::CorrelationOp> cops;
    cops.reserve(m.detectors.size());
    for (const auto& det : m.detectors) cops.emplace_back(det);

    Operator work1(d, d), work2(d, d);
    auto rhs = [&](double t, const Vec& y, Vec& dydt) {
        dydt.resize(y.size());
        Eigen::Map<const Operator> ym(y.data(), d, d);
        Eigen::Map<Operator> dm(dydt.data(), d, d);
        lop.apply(ym, work1);
        dm = work1;
        for (std::size_t k = 0; k < cops.size(); ++k) {
            const double j = j_per_detector[k].value(t);
            if (j == 0.0) continue;
            if (m.detectors[k].kind == DetectorKind::jump) {
                cops[k].apply(ym, work2);
                dm += std::expm1(j) * work2;
            } else {
                cops[k].apply(ym, work2);
                dm += j * work2;
                dm += (0.5 * j * j) * ym;
            }
        }
    };

    std::set<double> edges;
    for (const auto& f : j_per_detector) {
        if (f.kind == FilterSpec::Kind::rect_bin) {
            edges.insert(f.support_begin());
            edges.insert(f.support_end());
        } else {
            for (double t : f.grid_t) edges.insert(t);
        }
    }
    std::vector<double> breakpoints(edges.begin(), edges.end());

    Vec x = lindblad::vec(rho0);
    ode::integrate(rhs, x, 0.0, T, cfg, breakpoints);
    TiltedResult res;
    res.state = lindblad::unvec(x, d);
    res.trace = res.state.trace();
    return res;
}

// ---- symmetry -------------------------------------------------------------------

Operator parity_unitary(int dim) {
    Operator U = Operator::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) U(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
    return U;
}

SymmetryReport symmetry_check(const ConcreteModel& m, const Operator& symmetry_unitary,
                              std::span<const int> orders, double value_tol,
                              double superop_tol) {
    SymmetryReport rep;
    const int d = m.dim();
    const Operator& U = symmetry_unitary;
    const Operator Ud = U.adjoint();
    auto sym = [&](const Operator& x) { return Operator(U * x * Ud); };

    std::mt19937 gen(12345);
    std::normal_distribution<double> dist;
    auto random_op = [&]() {
        Operator X(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) X(i, j) = Complex(dist(gen), dist(gen));
        X /= X.norm();
        return X;
    };

    const int n_probe = 6;
    double comm_rel = 0.0;
    for (int k = 0; k < n_probe; ++k) {
        const Operator X = random_op();
        const Operator a = liouvillian_apply(m, sym(X));
        const Operator b = sym(liouvillian_apply(m, X));
        comm_rel = std::max(comm_rel, (a - b).norm() / std::max(b.norm(), 1e-30));
    }
    rep.liouvillian_commutes = comm_rel <= superop_tol;
    if (!rep.liouvillian_commutes)
        rep.violated.push_back("[L, S] != 0 (relative " + std::to_string(comm_rel) + ")");

    const Operator rho0 = lindblad::resolved_rho0(m);
    const double sym_err = (sym(rho0) - rho0).norm() / std::max(rho0.norm(), 1e-30);
    rep.initial_state_symmetric = sym_err <= 1e-8;
    if (!rep.initial_state_symmetric)
        rep.violated.push_back("S(rho0) != rho0 (relative " + std::to_string(sym_err) + ")");

    double anti_rel = 0.0;
    bool has_diffusive = false;
    for (const auto& det : m.detectors) {
        if (det.kind != DetectorKind::diffusive) continue;
        has_diffusive = true;
        for (int k = 0; k < n_probe; ++k) {
            const Operator X = random_op();
            const Operator a = correlation_superop_apply(det, sym(X));
            const Operator b = sym(correlation_superop_apply(det, X));
            const double den = std::max(b.norm(), 1e-30);
            anti_rel = std::max(anti_rel, (a + b).norm() / den);
        }
    }
    rep.correlation_anticommutes = has_diffusive && anti_rel <= superop_tol;
    if (!has_diffusive) {
        rep.violated.push_back("no diffusive detector to check");
    } else if (!rep.correlation_anticommutes) {
        rep.violated.push_back("{C_L, S} != 0 (relative " + std::to_string(anti_rel) + ")");
    }

    // representative non-overlapping bin tuples for each requested odd order
    int det0 = -1;
    for (std::size_t i = 0; i < m.detectors.size(); ++i)
        if (m.detectors[i].kind == DetectorKind::diffusive) { det0 = static_cast<int>(i); break; }
    if (det0 >= 0) {
        const int nb = std::max(m.detectors[static_cast<std::size_t>(det0)].n_bins, 6);
        for (int order : orders) {
            if (order % 2 == 0) throw std::invalid_argument("symmetry_check: odd orders only");
            std::vector<std::vector<int>> tuples;
            if (order == 1) {
                tuples = {{0}, {nb / 2}, {nb - 1}};
            } else if (order == 3) {
                tuples = {{0, 1, 2}, {0, nb / 2, nb - 1}, {1, nb / 3, 2 * nb / 3}};
            } else {
                throw std::invalid_argument("symmetry_check: orders above 3 not supported");
            }
            for (auto& bins : tuples) {
                std::sort(bins.begin(), bins.end());
                bins.erase(std::unique(bins.begin(), bins.end()), bins.end());
                if (static_cast<int>(bins.size()) != order) continue;
                std::vector<std::pair<int, int>> det_bins;
                for (int b : bins) det_bins.emplace_back(det0, b);
                rep.odd_values.push_back(binned_correlation(m, det_bins, rho0));
            }
        }
        for (double v : rep.odd_values)
            rep.max_abs_odd_value = std::max(rep.max_abs_odd_value, std::abs(v));
        if (rep.all_conditions_hold() && rep.max_abs_odd_value > value_tol)
            rep.violated.push_back("odd-order value above tolerance: " +
                                   std::to_string(rep.max_abs_odd_value));
    }
    return rep;
}

// ---- request dispatch -------------------------------------------------------------

namespace {

std::vector<std::pair<int, int>> request_bins(const CorrelationRequest& req) {
    std::vector<std::pair<int, int>> det_bins;
    for (const auto& p : req.points) {
        if (p.is_sharp || p.filter.kind != FilterSpec::Kind::rect_bin)
            throw std::invalid_argument("correlation: binned request expects rect_bin points");
        det_bins.emplace_back(p.detector, p.filter.bin);
    }
    return det_bins;
}

} // namespace

double correlation(const ConcreteModel& m, const CorrelationRequest& req,
                   const Operator& rho0, const OdeSolverConfig& cfg) {
    switch (req.mode) {
        case Mode::sharp: {
            std::vector<std::pair<int, double>> det_times;
            for (const auto& p : req.points) det_times.emplace_back(p.detector, p.time);
            return sharp_correlation(m, det_times, rho0);
        }
        case Mode::filtered_ode: {
            std::vector<std::pair<int, FilterSpec>> points;
            for (const auto& p : req.points) points.emplace_back(p.detector, p.filter);
            return filtered_correlation(m, points, rho0, cfg);
        }
        case Mode::binned_expm:
            return binned_correlation(m, request_bins(req), rho0);
        case Mode::sharp_approx:
            return sharp_approx_binned(m, request_bins(req), rho0);
    }
    throw std::logic_error("correlation: unknown mode");
}

std::vector<double> evaluate_requests(const ConcreteModel& m,
                                      std::span<const CorrelationRequest> reqs,
                                      const Operator& rho0,
                                      const OdeSolverConfig& cfg) {
    std::vector<double> out(reqs.size(), 0.0);
    // group binned/sharp-approx requests that differ only in their last bin
    struct Group {
        std::vector<std::pair<int, int>> prefix;
        int tail_det = 0;
        Mode mode = Mode::binned_expm;
        std::vector<std::pair<int, std::size_t>> tails; // (bin, output index)
    };
    std::map<std::string, Group> groups;
    std::vector<std::size_t> singles;

    for (std::size_t i = 0; i < reqs.size(); ++i) {
        const auto& req = reqs[i];
        bool binnable = req.mode == Mode::binned_expm || req.mode == Mode::sharp_approx;
        if (binnable) {
            for (const auto& p : req.points)
                binnable = binnable && !p.is_sharp &&
                           p.filter.kind == FilterSpec::Kind::rect_bin;
        }
        if (!binnable || req.points.empty()) {
            singles.push_back(i);
            continue;
        }
        auto det_bins = request_bins(req);
        std::sort(det_bins.begin(), det_bins.end(),
                  [](const auto& a, const auto& b) { return a.second < b.second; });
        const auto tail = det_bins.back();
        det_bins.pop_back();
        bool tail_beyond = true;
        for (const auto& [det, bin] : det_bins) tail_beyond = tail_beyond && tail.second > bin;
        if (!tail_beyond) {
            singles.push_back(i);
            continue;
        }
        std::string key = req.mode == Mode::binned_expm ? "b:" : "s:";
        for (const auto& [det, bin] : det_bins)
            key += std::to_string(det) + "," + std::to_string(bin) + ";";
        key += "|" + std::to_string(tail.first);
        auto& grp = groups[key];
        grp.prefix = det_bins;
        grp.tail_det = tail.first;
        grp.mode = req.mode;
        grp.tails.emplace_back(tail.second, i);
    }

    for (auto& [key, grp] : groups) {
        std::sort(grp.tails.begin(), grp.tails.end());
        bool distinct = true;
        for (std::size_t i = 0; i + 1 < grp.tails.size(); ++i)
            distinct = distinct && grp.tails[i].first != grp.tails[i + 1].first;
        std::vector<int> bins;
        for (const auto& [bin, idx] : grp.tails) bins.push_back(bin);

        if (grp.mode == Mode::binned_expm && distinct) {
            const auto vals = batch_tail_binned(m, grp.prefix, grp.tail_det, bins, rho0);
            for (std::size_t i = 0; i < vals.size(); ++i) out[grp.tails[i].second] = vals[i];
        } else if (grp.mode == Mode::sharp_approx && distinct && grp.prefix.size() == 1 &&
                   grp.prefix[0].second < bins.front()) {
            const auto& d0 = m.detectors.at(grp.prefix[0].first);
            const auto& d1 = m.detectors.at(grp.tail_det);
            const double t0 = (grp.prefix[0].second + 0.5) * d0.bin_width;
            std::vector<double> times;
            for (int b : bins) times.push_back((b + 0.5) * d1.bin_width);
            const double scale = rect_bin_filter(d0, 0).integral() *
                                 rect_bin_filter(d1, 0).integral();
            const auto vals =
                sharp_two_point_batch(m, grp.prefix[0].first, t0, grp.tail_det, times, rho0);
            for (std::size_t i = 0; i < vals.size(); ++i)
                out[grp.tails[i].second] = scale * vals[i];
        } else {
            for (const auto& [bin, idx] : grp.tails) singles.push_back(idx);
        }
    }

    for (std::size_t i : singles) out[i] = correlation(m, reqs[i], rho0, cfg);
    return out;
}

} // namespace corrfit::correlators
