// correlators.hpp — Exact correlation functions of sharp, filtered and binned
// detector signals via the interspersed-superoperator formula and the 2^n-block
// sensitivity ODE systems

#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "corrfit/lindblad.hpp"
#include "corrfit/model.hpp"
#include "corrfit/ode.hpp"

namespace corrfit::correlators {

struct FilterSpec {
    enum class Kind { rect_bin, custom_grid };
    Kind kind = Kind::rect_bin;
    // rect_bin: f(t) = scale on [bin*bin_width, (bin+1)*bin_width)
    int bin = 0;
    double bin_width = 1.0;
    double scale = 1.0;
    // custom_grid: linear interpolation of (grid_t, grid_v), zero outside
    std::vector<double> grid_t, grid_v;

    double support_begin() const;
    double support_end() const;
    double value(double t) const;
    double integral() const; // ∫ f
    double max_abs() const;
};

// rectangular window of the detector's acquisition chain: scale G/Δt for
// diffusive detectors, 1 for photocounters
FilterSpec rect_bin_filter(const DetectorSpec& d, int bin);

enum class Mode { sharp, filtered_ode, binned_expm, sharp_approx };

struct CorrelationRequest {
    Mode mode = Mode::binned_expm;
    struct Point {
        int detector = 0;
        bool is_sharp = false;
        double time = 0.0;  // sharp points
        FilterSpec filter;  // filtered/binned points
        int bin() const { return filter.bin; }
    };
    std::vector<Point> points;
};

CorrelationRequest binned_request(const ConcreteModel& m, Mode mode,
                                  const std::vector<std::pair<int, int>>& det_bins);
CorrelationRequest sharp_request(const std::vector<std::pair<int, double>>& det_times);

// The generator of the 2^n coupled sensitivity equations for an n-point
// filtered correlation function (n <= 4). Blocks are indexed by subsets of
// the requested points; the action never materialises the stacked matrix.
// Filters are pre-scaled by 1/g with g = max |f|; correlation values must be
// multiplied back by g^n.
class AugmentedGenerator {
  public:
    // g_override > 0 pins the filter normalisation (used when two generators
    // must share one scaling, as in the staged batch evaluation)
    AugmentedGenerator(const ConcreteModel& m,
                       std::vector<std::pair<int, FilterSpec>> points,
                       double g_override = 0.0);

    int order() const { return n_; }
    int block_dim() const { return d_; }
    Eigen::Index stacked_dim() const { return static_cast<Eigen::Index>(1 << n_) * d_ * d_; }
    double normalisation() const { return g_; }
    double support_end() const;
    std::vector<double> breakpoints() const; // filter support edges

    // time-dependent action on the stacked blocks
    void apply(double t, const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const;
    // normalised filter values at time t
    std::vector<double> filter_values(double t) const;
    // action frozen at constant filter values (piecewise-constant integration)
    lindblad::LinearMap frozen_map(std::vector<double> fvals) const;

  private:
    struct Source {
        int target;          // subset receiving the term
        int source;          // subset it reads from
        int corr_point;      // point whose detector's C_L is applied; -1: none
        std::vector<int> filter_points; // product of these filters
    };

    void apply_impl(std::span<const double> fvals, const Eigen::VectorXcd& x,
                    Eigen::VectorXcd& y) const;

    int n_ = 0, d_ = 0;
    double g_ = 1.0;
    std::vector<std::pair<int, FilterSpec>> points_; // filters pre-scaled by 1/g
    model::LiouvillianOp lop_;
    std::vector<model::CorrelationOp> corr_; // one per point
    std::vector<Source> sources_;
    mutable Operator t1_, t2_;
};

AugmentedGenerator assemble_augmented_generator(
    const ConcreteModel& m, const std::vector<std::pair<int, FilterSpec>>& points);

// Tr[C e^{(t_n - t_{n-1})L} ... C e^{t_1 L}(rho0)] for strictly increasing times
double sharp_correlation(const ConcreteModel& m,
                         const std::vector<std::pair<int, double>>& det_times,
                         const Operator& rho0, double tol = 1e-12);

// E[I_{f_1} ... I_{f_n}] by adaptive integration of the sensitivity system
double filtered_correlation(const ConcreteModel& m,
                            const std::vector<std::pair<int, FilterSpec>>& points,
                            const Operator& rho0, const OdeSolverConfig& cfg = {});

// same value via piecewise-constant exponentiation (rectangular filters only)
double binned_correlation(const ConcreteModel& m,
                          const std::vector<std::pair<int, int>>& det_bins,
                          const Operator& rho0, double tol = 1e-12);

// centre-of-bin sharp-formula approximation; bins must be non-coincident
double sharp_approx_binned(const ConcreteModel& m,
                           const std::vector<std::pair<int, int>>& det_bins,
                           const Operator& rho0, double tol = 1e-12);

// E[I_{b_1} ... I_{b_p} I_k] for every k in tail_bins (ascending, beyond all
// prefix bins): the prefix blocks are evolved once and branched per k
std::vector<double> batch_tail_binned(const ConcreteModel& m,
                                      const std::vector<std::pair<int, int>>& prefix,
                                      int tail_detector,
                                      std::span<const int> tail_bins,
                                      const Operator& rho0, double tol = 1e-12);

// E[I_0 I_k] for k = 1..k_max between two detectors
std::vector<double> batch_two_point(const ConcreteModel& m, int det0, int det1,
                                    int k_max, const Operator& rho0,
                                    double tol = 1e-12);

// E[I_{t0} I_{t}] for t in times (ascending, > t0), sharing the evolution
std::vector<double> sharp_two_point_batch(const ConcreteModel& m, int det0,
                                          double t0, int det1,
                                          std::span<const double> times,
                                          const Operator& rho0, double tol = 1e-12);

// generating density matrix evolution under the tilted generator
// L^j = L + sum_jump (e^{j}-1) C + sum_diff (j C + j^2/2)
struct TiltedResult {
    Operator state;
    Complex trace; // Z(j)
};
TiltedResult tilted_evolution(const ConcreteModel& m,
                              const std::vector<FilterSpec>& j_per_detector,
                              const Operator& rho0, double T,
                              const OdeSolverConfig& cfg = {});

// numerical verification of the odd-order-null symmetry conditions
struct SymmetryReport {
    bool liouvillian_commutes = false;     // [L, S] = 0
    bool initial_state_symmetric = false;  // S(rho0) = rho0
    bool correlation_anticommutes = false; // {C_L, S} = 0 for every diffusive detector
    std::vector<std::string> violated;
    std::vector<double> odd_values; // requested odd-order exact values
    double max_abs_odd_value = 0.0;
    bool all_conditions_hold() const { return violated.empty(); }
};
SymmetryReport symmetry_check(const ConcreteModel& m, const Operator& symmetry_unitary,
                              std::span<const int> orders, double value_tol = 1e-8,
                              double superop_tol = 1e-10);

// e^{i pi a†a} on an n-dimensional Fock space
Operator parity_unitary(int dim);

// dispatch by request mode
double correlation(const ConcreteModel& m, const CorrelationRequest& req,
                   const Operator& rho0, const OdeSolverConfig& cfg = {});

// evaluates a request list, sharing staged evolutions across requests with a
// common prefix (vectorised multi-time computation)
std::vector<double> evaluate_requests(const ConcreteModel& m,
                                      std::span<const CorrelationRequest> reqs,
                                      const Operator& rho0,
                                      const OdeSolverConfig& cfg = {});

} // namespace corrfit::correlators
