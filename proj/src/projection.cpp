#include "ectail/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "ectail/bounds.hpp"

namespace ectail {

double node_cap(const NodeParams& node, double t, double epsilon) {
    const double slope = t + node.rate_alpha * std::expm1(node.shift_beta * t);
    if (!(slope > 0.0)) return -std::numeric_limits<double>::infinity();
    return (-epsilon - t * (t - node.rate_alpha)) / slope;
}

FeasibleRegion feasible_region(const SystemModel& model, const AuxVector& t) {
    FeasibleRegion region;
    for (const auto& f : model.files) {
        region.support.push_back(f.placement);
        region.row_targets.push_back(f.code_k);
        region.arrival_rates.push_back(f.arrival_rate);
    }
    for (std::size_t j = 0; j < model.node_count(); ++j)
        region.caps.push_back(node_cap(model.nodes[j], t[j], model.epsilon));
    return region;
}

std::vector<double> project_capped_simplex(std::span<const double> v, double k) {
    const std::size_t n = v.size();
    std::vector<double> out(n);
    if (k >= static_cast<double>(n)) {
        std::fill(out.begin(), out.end(), 1.0);
        return out;
    }
    if (k <= 0.0) return out;
    // h(mu) = sum clamp(v - mu, 0, 1) is nonincreasing and linear between the
    // breakpoints v_j - 1 and v_j; find the segment where it crosses k.
    auto h = [&](double mu) {
        double sum = 0.0;
        for (double vj : v) sum += std::clamp(vj - mu, 0.0, 1.0);
        return sum;
    };
    std::vector<double> knots;
    knots.reserve(2 * n);
    for (double vj : v) {
        knots.push_back(vj - 1.0);
        knots.push_back(vj);
    }
    std::sort(knots.begin(), knots.end());
    double mu = knots.back();
    double lo = knots.front();
    double h_lo = h(lo);
    for (std::size_t l = 1; l < knots.size(); ++l) {
        const double hi = knots[l];
        const double h_hi = h(hi);
        if (h_hi <= k) {
            mu = h_lo > h_hi ? lo + (h_lo - k) * (hi - lo) / (h_lo - h_hi) : lo;
            break;
        }
        lo = hi;
        h_lo = h_hi;
    }
    for (std::size_t j = 0; j < n; ++j) out[j] = std::clamp(v[j] - mu, 0.0, 1.0);
    return out;
}

namespace {

// Layout of the support entries of every row in one flat vector.
struct SupportLayout {
    std::vector<std::size_t> row_offset;  // size r + 1
    std::vector<std::size_t> entry_row;
    std::vector<std::size_t> entry_col;
    std::vector<std::vector<std::size_t>> node_entries;

    SupportLayout(const SystemModel& model) : node_entries(model.node_count()) {
        row_offset.push_back(0);
        for (std::size_t i = 0; i < model.file_count(); ++i) {
            for (std::size_t j : model.files[i].placement) {
                node_entries[j].push_back(entry_row.size());
                entry_row.push_back(i);
                entry_col.push_back(j);
            }
            row_offset.push_back(entry_row.size());
        }
    }
    std::size_t size() const { return entry_row.size(); }
};

double cap_scale(double cap) { return std::max(1.0, std::abs(cap)); }

}  // namespace

bool is_feasible(const AccessMatrix& pi, const AuxVector& t, const SystemModel& model,
                 double tolerance) {
    try {
        check_access_matrix(model, pi, tolerance);
    } catch (const ConfigError&) {
        return false;
    }
    for (double v : pi.values())
        if (v < 0.0 || v > 1.0) return false;
    const auto loads = aggregate_arrival(pi, model.files);
    for (std::size_t j = 0; j < model.node_count(); ++j)
        if (!(loads[j] <= node_cap(model.nodes[j], t[j], model.epsilon))) return false;
    return true;
}

namespace {

// Shared data of one projection problem in flattened support coordinates.
struct Problem {
    const SupportLayout& layout;
    const FeasibleRegion& region;
    std::vector<double> v;       // point being projected
    std::vector<double> target;  // tightened caps
    std::vector<double> slack;

    double coef(std::size_t e) const { return region.arrival_rates[layout.entry_row[e]]; }

    double load(const std::vector<double>& z, std::size_t j) const {
        double sum = 0.0;
        for (std::size_t e : layout.node_entries[j]) sum += coef(e) * z[e];
        return sum;
    }

    bool within_caps(const std::vector<double>& z) const {
        for (std::size_t j = 0; j < target.size(); ++j)
            if (load(z, j) - target[j] >= slack[j]) return false;
        return true;
    }
};

// Primal point of the dual at multipliers nu: each row is the capped-simplex
// projection of v shifted by the weighted multipliers of its nodes.
struct DualPoint {
    std::vector<double> x;
    std::vector<char> free;  // strictly inside (0, 1)
    std::vector<double> grad;  // load - target, the dual gradient
    double value = 0.0;
};

DualPoint evaluate_dual(const Problem& pr, const std::vector<double>& nu) {
    const auto& layout = pr.layout;
    const std::size_t m = nu.size();
    DualPoint d;
    d.x.resize(layout.size());
    d.free.assign(layout.size(), 0);
    for (std::size_t i = 0; i + 1 < layout.row_offset.size(); ++i) {
        const std::size_t b = layout.row_offset[i];
        const std::size_t end = layout.row_offset[i + 1];
        std::vector<double> w(end - b);
        for (std::size_t e = b; e < end; ++e) w[e - b] = pr.v[e] - pr.coef(e) * nu[layout.entry_col[e]];
        const auto proj = project_capped_simplex(w, pr.region.row_targets[i]);
        for (std::size_t e = b; e < end; ++e) {
            d.x[e] = proj[e - b];
            d.free[e] = d.x[e] > 0.0 && d.x[e] < 1.0;
        }
    }
    for (std::size_t e = 0; e < d.x.size(); ++e) d.value += 0.5 * (d.x[e] - pr.v[e]) * (d.x[e] - pr.v[e]);
    d.grad.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        d.grad[j] = pr.load(d.x, j) - pr.target[j];
        d.value += nu[j] * d.grad[j];
    }
    return d;
}

bool kkt_satisfied(const Problem& pr, const std::vector<double>& nu, const DualPoint& d) {
    for (std::size_t j = 0; j < nu.size(); ++j) {
        const double tol = 0.5 * pr.slack[j];
        if (d.grad[j] > tol) return false;
        if (nu[j] > 0.0 && d.grad[j] < -tol) return false;
    }
    return true;
}

// Maximizes the concave dual over nu >= 0 by projected Newton steps with the
// generalized Hessian A J A^T, J the capped-simplex Jacobian of each row.
std::optional<std::vector<double>> dual_newton(const Problem& pr, int iterations) {
    const auto& layout = pr.layout;
    const std::size_t m = pr.target.size();
    // Curvature scale of the dual: the largest diagonal entry of A A^T.
    double curvature = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double sum = 0.0;
        for (std::size_t e : layout.node_entries[j]) sum += pr.coef(e) * pr.coef(e);
        curvature = std::max(curvature, sum);
    }
    if (curvature == 0.0) curvature = 1.0;

    std::vector<double> nu(m, 0.0);
    DualPoint d = evaluate_dual(pr, nu);
    for (int it = 0; it < iterations; ++it) {
        if (kkt_satisfied(pr, nu, d)) return d.x;

        std::vector<std::size_t> moving;
        for (std::size_t j = 0; j < m; ++j)
            if (nu[j] > 0.0 || d.grad[j] > 0.0) moving.push_back(j);
        std::vector<int> slot(m, -1);
        for (std::size_t s = 0; s < moving.size(); ++s) slot[moving[s]] = static_cast<int>(s);

        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(moving.size(), moving.size());
        for (std::size_t i = 0; i + 1 < layout.row_offset.size(); ++i) {
            std::vector<std::size_t> cols;
            std::size_t free_count = 0;
            for (std::size_t e = layout.row_offset[i]; e < layout.row_offset[i + 1]; ++e) {
                if (!d.free[e]) continue;
                ++free_count;
                if (slot[layout.entry_col[e]] >= 0) cols.push_back(static_cast<std::size_t>(slot[layout.entry_col[e]]));
            }
            if (free_count == 0) continue;
            const double a2 = pr.region.arrival_rates[i] * pr.region.arrival_rates[i];
            for (std::size_t p : cols) {
                h(p, p) += a2;
                for (std::size_t q : cols) h(p, q) -= a2 / static_cast<double>(free_count);
            }
        }
        Eigen::VectorXd g(moving.size());
        for (std::size_t s = 0; s < moving.size(); ++s) g(s) = d.grad[moving[s]];
        // Rows without free entries have no curvature; the ridge turns their
        // step into a long gradient step that the line search then shortens.
        h.diagonal().array() += 1e-10 * curvature;
        Eigen::VectorXd step = h.ldlt().solve(g);
        if (!step.allFinite() || step.dot(g) <= 0.0) step = g / curvature;

        // Projected Armijo search on the dual.
        bool moved = false;
        for (double s = 1.0; s > 1e-30; s *= 0.5) {
            std::vector<double> trial = nu;
            for (std::size_t q = 0; q < moving.size(); ++q)
                trial[moving[q]] = std::max(0.0, nu[moving[q]] + s * step(q));
            double rise = 0.0;
            for (std::size_t j = 0; j < m; ++j) rise += d.grad[j] * (trial[j] - nu[j]);
            if (rise <= 0.0) break;
            DualPoint next = evaluate_dual(pr, trial);
            if (next.value >= d.value + 1e-4 * rise) {
                nu = std::move(trial);
                d = std::move(next);
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    if (kkt_satisfied(pr, nu, d)) return d.x;
    return std::nullopt;
}

std::optional<std::vector<double>> dykstra(const Problem& pr, const SystemModel& model,
                                           int iterations, double tolerance) {
    const auto& layout = pr.layout;
    const std::size_t n = layout.size();
    const std::size_t m = model.node_count();
    std::vector<double> coef_norm(m, 0.0);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t e : layout.node_entries[j]) coef_norm[j] += pr.coef(e) * pr.coef(e);

    std::vector<double> x = pr.v, p(n, 0.0), q(n, 0.0), y(n), prev(n);
    bool feasible = false;
    for (int it = 0; it < iterations; ++it) {
        prev = x;
        // Halfspaces (one per node, disjoint variables).
        for (std::size_t e = 0; e < n; ++e) y[e] = x[e] + p[e];
        for (std::size_t j = 0; j < m; ++j) {
            if (coef_norm[j] == 0.0) continue;
            const double excess = pr.load(y, j) - pr.target[j];
            if (excess <= 0.0) continue;
            const double scale = excess / coef_norm[j];
            for (std::size_t e : layout.node_entries[j]) y[e] -= scale * pr.coef(e);
        }
        for (std::size_t e = 0; e < n; ++e) p[e] = x[e] + p[e] - y[e];

        // Capped simplices (one per file).
        for (std::size_t i = 0; i < model.file_count(); ++i) {
            const std::size_t b = layout.row_offset[i];
            const std::size_t end = layout.row_offset[i + 1];
            std::vector<double> v(end - b);
            for (std::size_t e = b; e < end; ++e) v[e - b] = y[e] + q[e];
            const auto proj = project_capped_simplex(v, pr.region.row_targets[i]);
            for (std::size_t e = b; e < end; ++e) {
                x[e] = proj[e - b];
                q[e] = v[e - b] - x[e];
            }
        }

        feasible = pr.within_caps(x);
        double change = 0.0;
        for (std::size_t e = 0; e < n; ++e) change = std::max(change, std::abs(x[e] - prev[e]));
        if (feasible && change <= 1e-3 * tolerance) break;
    }
    // A feasible iterate that has not fully settled is still returned.
    if (!feasible) return std::nullopt;
    return x;
}

}  // namespace

AccessMatrix project_feasible(const AccessMatrix& pi0, const AuxVector& t,
                              const SystemModel& model, const ProjectionOptions& options) {
    if (pi0.rows() != model.file_count() || pi0.cols() != model.node_count())
        throw ConfigError("access matrix shape does not match model");
    for (std::size_t j = 0; j < model.node_count(); ++j)
        if (!(t[j] < model.nodes[j].rate_alpha))
            throw InfeasibleRegion("t_" + std::to_string(j) + " is not below alpha");

    const auto region = feasible_region(model, t);
    double capacity = 0.0;
    for (std::size_t j = 0; j < region.caps.size(); ++j) {
        if (region.caps[j] < 0.0)
            throw InfeasibleRegion("node " + std::to_string(j) +
                                   " violates the stability margin even when idle");
        capacity += region.caps[j];
    }
    if (model.total_chunk_rate() > capacity)
        throw InfeasibleRegion("offered chunk load " + std::to_string(model.total_chunk_rate()) +
                               " exceeds total node capacity " + std::to_string(capacity));

    if (is_feasible(pi0, t, model)) return pi0;

    const SupportLayout layout(model);
    const std::size_t m = model.node_count();
    Problem pr{layout, region, std::vector<double>(layout.size()), std::vector<double>(m),
               std::vector<double>(m)};
    for (std::size_t e = 0; e < layout.size(); ++e)
        pr.v[e] = pi0(layout.entry_row[e], layout.entry_col[e]);
    for (std::size_t j = 0; j < m; ++j) {
        pr.slack[j] = options.tolerance * cap_scale(region.caps[j]);
        pr.target[j] = region.caps[j] - pr.slack[j];
    }

    auto x = dual_newton(pr, options.newton_iterations);
    if (!x || !pr.within_caps(*x)) x = dykstra(pr, model, options.max_iterations, options.tolerance);
    if (!x)
        throw InfeasibleRegion("projection did not reach the node caps within " +
                               std::to_string(options.max_iterations) + " iterations");

    AccessMatrix out(model.file_count(), m, 0.0);
    for (std::size_t e = 0; e < layout.size(); ++e) out(layout.entry_row[e], layout.entry_col[e]) = (*x)[e];
    return out;
}

AccessMatrix equal_access_pattern(const SystemModel& model) {
    AccessMatrix pattern(model.file_count(), model.node_count(), 0.0);
    for (std::size_t i = 0; i < model.file_count(); ++i) {
        const auto& f = model.files[i];
        for (std::size_t j : f.placement)
            pattern(i, j) = static_cast<double>(f.code_k) / static_cast<double>(f.code_n);
    }
    return pattern;
}

FeasibleStart feasible_start(const SystemModel& model, const AccessMatrix& pattern, double t0) {
    AuxVector t(model.node_count(), t0);
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < 40; ++attempt) {
        try {
            auto pi = project_feasible(pattern, t, model);
            const auto loads = aggregate_arrival(pi, model.files);
            if (jointly_feasible(model, loads, t, model.epsilon)) return {std::move(pi), t};
            last_error = "projected point violates the stability margin";
        } catch (const InfeasibleRegion& e) {
            last_error = e.what();
        }
        for (double& v : t.t) v *= 0.5;
    }
    throw InfeasibleRegion("no feasible starting point: " + last_error);
}

FeasibleStart nearest_feasible_init(const SystemModel& model) {
    return feasible_start(model, equal_access_pattern(model));
}

}  // namespace ectail
