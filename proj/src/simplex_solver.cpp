#include "panelkit/simplex_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "panelkit/errors.hpp"

namespace panelkit {

double WeightVector::at(const std::string& donor) const {
    auto it = weights.find(donor);
    return it == weights.end() ? 0.0 : it->second;
}

std::vector<double> project_to_simplex(const std::vector<double>& v) {
    if (v.empty()) throw ValidationError("cannot project an empty vector onto the simplex");
    const std::size_t n = v.size();

    // Sort-based threshold rule: find the largest support for which all kept
    // coordinates stay positive after the common shift.
    std::vector<double> sorted(v);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cumsum += sorted[j];
        const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) {
            theta = candidate;
        }
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::max(v[i] - theta, 0.0);
    }
    return w;
}

namespace detail {

double frank_wolfe_gap(const std::vector<double>& w, const std::vector<double>& grad,
                       const std::vector<std::pair<std::size_t, std::size_t>>& blocks) {
    // For a product of simplices the best vertex puts all block mass on the
    // smallest gradient coordinate, so the gap decomposes per block.
    double gap = 0.0;
    for (const auto& [offset, length] : blocks) {
        double dot = 0.0;
        double gmin = grad[offset];
        for (std::size_t i = offset; i < offset + length; ++i) {
            dot += grad[i] * w[i];
            gmin = std::min(gmin, grad[i]);
        }
        gap += dot - gmin;
    }
    return gap;
}

namespace {

void project_blocks(std::vector<double>& w,
                    const std::vector<std::pair<std::size_t, std::size_t>>& blocks,
                    std::vector<double>& scratch) {
    for (const auto& [offset, length] : blocks) {
        scratch.assign(w.begin() + static_cast<std::ptrdiff_t>(offset),
                       w.begin() + static_cast<std::ptrdiff_t>(offset + length));
        std::vector<double> projected = project_to_simplex(scratch);
        std::copy(projected.begin(), projected.end(),
                  w.begin() + static_cast<std::ptrdiff_t>(offset));
    }
}

// Largest Hessian eigenvalue of the quadratic model via power iteration,
// using H v = grad(v) - grad(0). Deterministic start; the Rayleigh quotient
// increases monotonically, so the running maximum is kept.
double estimate_top_eigenvalue(const BlockQuadratic& model, std::size_t n) {
    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> g0(n), gv(n), hv(n);
    std::vector<double> zero(n, 0.0);
    model.gradient(model.ctx, zero, g0);
    double lambda = 0.0;
    for (int it = 0; it < 128; ++it) {
        model.gradient(model.ctx, v, gv);
        double norm_sq = 0.0;
        double rayleigh = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            hv[i] = gv[i] - g0[i];
            rayleigh += hv[i] * v[i];
            norm_sq += v[i] * v[i];
        }
        if (norm_sq <= 0.0) break;
        lambda = std::max(lambda, rayleigh / norm_sq);
        double hv_norm = 0.0;
        for (double x : hv) hv_norm += x * x;
        hv_norm = std::sqrt(hv_norm);
        if (hv_norm <= 0.0) break;
        for (std::size_t i = 0; i < n; ++i) v[i] = hv[i] / hv_norm;
    }
    return lambda;
}

} // namespace

PgdResult accelerated_pgd(const BlockQuadratic& model, std::vector<double> w0,
                          const std::vector<std::pair<std::size_t, std::size_t>>& blocks,
                          double tolerance, int max_iterations) {
    const std::size_t n = w0.size();
    std::vector<double> scratch;
    project_blocks(w0, blocks, scratch);

    std::vector<double> x = w0;       // current accepted iterate
    std::vector<double> x_prev = w0;  // previous accepted iterate
    std::vector<double> y = w0;       // extrapolated point
    std::vector<double> grad(n), candidate(n);

    double f_x = model.objective(model.ctx, x);

    // Step sizes: the Hessian-trace bound is always safe; the power-iteration
    // estimate is far tighter on wide dictionaries and is used for the fast
    // phase, protected by the monotone guard below.
    const double safe_step = 1.0 / std::max(model.lipschitz_bound, 1e-300);
    const double top = estimate_top_eigenvalue(model, n);
    const double fast_step =
        top > 0.0 ? std::max(safe_step, 1.0 / (1.2 * top)) : safe_step;

    // The convergence certificate is a Frank-Wolfe gap of 10 * tolerance;
    // the iteration aims two orders tighter so the returned point is pinned
    // by the data rather than by where the descent happened to stop.
    const double gap_target = 0.1 * tolerance;
    const double gap_certificate = 10.0 * tolerance;

    double momentum = 1.0;
    int iter = 0;
    bool polish = false;
    std::vector<double> trace;
    trace.reserve(256);

    // Phase 1: monotone accelerated descent on the objective.
    for (; iter < max_iterations; ++iter) {
        model.gradient(model.ctx, y, grad);
        for (std::size_t i = 0; i < n; ++i) candidate[i] = y[i] - fast_step * grad[i];
        project_blocks(candidate, blocks, scratch);
        double f_candidate = model.objective(model.ctx, candidate);

        // If the accelerated step overshoots, fall back to a plain projected
        // gradient step from the accepted iterate and reset the momentum.
        bool stalled = false;
        if (f_candidate > f_x) {
            model.gradient(model.ctx, x, grad);
            for (std::size_t i = 0; i < n; ++i) candidate[i] = x[i] - safe_step * grad[i];
            project_blocks(candidate, blocks, scratch);
            f_candidate = model.objective(model.ctx, candidate);
            momentum = 1.0;
            if (f_candidate > f_x) {
                // Objective comparisons have hit their rounding floor.
                candidate = x;
                f_candidate = f_x;
                stalled = true;
            }
        }

        const double rel_decrease = (f_x - f_candidate) / std::max(1.0, std::abs(f_x));

        x_prev.swap(x);
        x = candidate;
        f_x = f_candidate;
        trace.push_back(f_x);

        const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        const double beta = (momentum - 1.0) / next_momentum;
        momentum = next_momentum;
        for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + beta * (x[i] - x_prev[i]);

        if (rel_decrease <= tolerance) {
            model.gradient(model.ctx, x, grad);
            const double gap = frank_wolfe_gap(x, grad, blocks);
            if (gap <= gap_target * std::max(1.0, std::abs(f_x))) {
                ++iter;
                break;
            }
            if (stalled) {
                polish = true;
                ++iter;
                break;
            }
        }
    }

    // Phase 2: fixed-point polishing. The objective can no longer be
    // compared reliably, but plain projected-gradient steps still shrink the
    // distance to the optimum; stop at a bitwise fixed point (an exact KKT
    // point at this precision) or at the gap target.
    if (polish) {
        const double threshold = gap_target * std::max(1.0, std::abs(f_x));
        for (; iter < max_iterations; ++iter) {
            model.gradient(model.ctx, x, grad);
            if (frank_wolfe_gap(x, grad, blocks) <= threshold) break;
            for (std::size_t i = 0; i < n; ++i) candidate[i] = x[i] - safe_step * grad[i];
            project_blocks(candidate, blocks, scratch);
            if (candidate == x) break;
            x.swap(candidate);
        }
        f_x = model.objective(model.ctx, x);
    }

    model.gradient(model.ctx, x, grad);
    const double gap = frank_wolfe_gap(x, grad, blocks);
    const bool converged = gap <= gap_certificate * std::max(1.0, std::abs(f_x));

    return PgdResult{std::move(x), f_x, iter, converged, std::move(trace)};
}

} // namespace detail

namespace {

struct LsContext {
    std::vector<double> gram; // n x n, (2/L) * C'C on the scaled centered data
    std::size_t n = 0;
};

double ls_objective(const void* ctx_ptr, const std::vector<double>& w) {
    const auto& ctx = *static_cast<const LsContext*>(ctx_ptr);
    const std::size_t n = ctx.n;
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        const double* g = ctx.gram.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) row += g[j] * w[j];
        quad += w[i] * row;
    }
    return 0.5 * quad;
}

void ls_gradient(const void* ctx_ptr, const std::vector<double>& w, std::vector<double>& g) {
    const auto& ctx = *static_cast<const LsContext*>(ctx_ptr);
    const std::size_t n = ctx.n;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        const double* gr = ctx.gram.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) row += gr[j] * w[j];
        g[i] = row;
    }
}

} // namespace

WeightVector solve_simplex_ls(const SimplexLsProblem& problem) {
    const std::size_t n = problem.cols();
    const std::size_t rows = problem.rows();
    if (n == 0) throw ValidationError("simplex LS problem has no donors");
    if (rows == 0) throw ValidationError("simplex LS problem has an empty target");
    if (problem.dictionary.size() != rows * n) {
        throw ValidationError("simplex LS dictionary does not match target length x donors");
    }
    if (!(problem.tolerance > 0.0)) throw ValidationError("solver tolerance must be positive");
    for (double v : problem.target) {
        if (!std::isfinite(v)) throw ValidationError("simplex LS target contains non-finite values");
    }
    for (double v : problem.dictionary) {
        if (!std::isfinite(v)) {
            throw ValidationError("simplex LS dictionary contains non-finite values");
        }
    }

    // Canonical form: center every row by its target value (identical
    // objective on the simplex, and common per-period levels drop out of the
    // data itself), rescale to unit size, and sort columns into a canonical
    // order so donor reordering permutes the output and nothing else.
    std::vector<double> centered(rows * n);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            centered[r * n + i] = problem.dictionary[r * n + i] - problem.target[r];
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double va = centered[r * n + a];
            const double vb = centered[r * n + b];
            if (va != vb) return va < vb;
        }
        return problem.donor_ids[a] < problem.donor_ids[b];
    });

    double sum_sq = 0.0;
    for (double v : centered) sum_sq += v * v;
    const double data_scale = std::sqrt(sum_sq / static_cast<double>(centered.size()));
    const double inv_scale = data_scale > 0.0 ? 1.0 / data_scale : 1.0;

    std::vector<double> dict(rows * n);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            dict[r * n + i] = centered[r * n + order[i]] * inv_scale;
        }
    }

    // Minimize (1/L) ||dict * w||^2 over the simplex: a pure quadratic.
    LsContext ctx;
    ctx.n = n;
    ctx.gram.assign(n * n, 0.0);
    const double scale = 2.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = dict.data() + r * n;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                ctx.gram[i * n + j] += scale * row[i] * row[j];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) ctx.gram[i * n + j] = ctx.gram[j * n + i];
    }

    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += ctx.gram[i * n + i];

    detail::BlockQuadratic model;
    model.objective = &ls_objective;
    model.gradient = &ls_gradient;
    model.ctx = &ctx;
    model.lipschitz_bound = std::max(trace, 1e-12);

    std::vector<double> w0(n, 1.0 / static_cast<double>(n));
    const std::vector<std::pair<std::size_t, std::size_t>> blocks = {{0, n}};
    detail::PgdResult res =
        detail::accelerated_pgd(model, std::move(w0), blocks, problem.tolerance,
                                problem.max_iterations);

    WeightVector out;
    for (std::size_t i = 0; i < n; ++i) {
        out.weights.emplace(problem.donor_ids[order[i]], res.w[i]);
    }
    // Report the exact mean squared error on the original data at the
    // returned weights.
    double sse = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double fit = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            fit += problem.dictionary[r * n + order[i]] * res.w[i];
        }
        const double gap = problem.target[r] - fit;
        sse += gap * gap;
    }
    out.objective_value = sse / static_cast<double>(rows);
    out.iterations_used = res.iterations;
    out.converged = res.converged;
    return out;
}

} // namespace panelkit
