#ifndef PANELKIT_SIMPLEX_SOLVER_HPP
#define PANELKIT_SIMPLEX_SOLVER_HPP

#include <map>
#include <string>
#include <vector>

namespace panelkit {

/// Least-squares problem over the probability simplex:
///   minimize (1/L) * sum_r (target[r] - sum_d w[d] * dictionary(r, d))^2
///   subject to w >= 0, sum w = 1.
struct SimplexLsProblem {
    std::vector<std::string> donor_ids;  // one per dictionary column
    std::vector<double> target;          // length L
    std::vector<double> dictionary;      // row-major, L x n_donors
    double tolerance = 1e-10;            // relative objective-decrease threshold
    int max_iterations = 100000;

    std::size_t rows() const { return target.size(); }
    std::size_t cols() const { return donor_ids.size(); }
    double entry(std::size_t r, std::size_t d) const { return dictionary[r * cols() + d]; }
};

/// Simplex weights keyed by donor id. Feasibility is exact: weights are
/// non-negative and sum to one up to additive rounding (|sum - 1| <= 1e-12).
struct WeightVector {
    std::map<std::string, double> weights;
    double objective_value = 0.0;  // mean squared pre-period error at the solution
    int iterations_used = 0;
    bool converged = true;

    double at(const std::string& donor) const; // 0 for donors without an entry
};

/// Euclidean projection onto {w : w >= 0, sum w = 1} via the sort-based
/// threshold rule, O(n log n). Throws ValidationError on an empty input.
std::vector<double> project_to_simplex(const std::vector<double>& v);

/// Deterministic accelerated projected-gradient solve started from uniform
/// weights. Ties between multiple optima (collinear donors) resolve to the
/// uniform-start solution. Non-convergence within max_iterations is flagged
/// on the result, never silently returned as converged.
WeightVector solve_simplex_ls(const SimplexLsProblem& problem);

namespace detail {

/// Convex quadratic over a product of simplices, as used by both the single
/// fit above and the partially pooled fit across cohorts.
struct BlockQuadratic {
    // Objective value at w.
    double (*objective)(const void* ctx, const std::vector<double>& w) = nullptr;
    // Gradient into g (same length as w).
    void (*gradient)(const void* ctx, const std::vector<double>& w, std::vector<double>& g) = nullptr;
    const void* ctx = nullptr;
    double lipschitz_bound = 1.0;
};

struct PgdResult {
    std::vector<double> w;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace; // accepted objective after each iteration
};

/// Monotone accelerated projected gradient over blocks of w that each live on
/// their own simplex. blocks holds (offset, length) pairs. Convergence needs
/// both a small relative objective decrease and a small Frank-Wolfe gap, the
/// latter scaled by max(1, |objective|).
PgdResult accelerated_pgd(const BlockQuadratic& model, std::vector<double> w0,
                          const std::vector<std::pair<std::size_t, std::size_t>>& blocks,
                          double tolerance, int max_iterations);

/// Frank-Wolfe gap for the block-simplex feasible set given the gradient.
double frank_wolfe_gap(const std::vector<double>& w, const std::vector<double>& grad,
                       const std::vector<std::pair<std::size_t, std::size_t>>& blocks);

} // namespace detail

} // namespace panelkit

#endif
