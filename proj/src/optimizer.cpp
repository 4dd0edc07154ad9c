#include "ectail/optimizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "ectail/bounds.hpp"

namespace ectail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Golden-section minimization of a unimodal function on [lo, hi].
template <class F>
double golden_section(F&& f, double lo, double hi) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 300 && (b - a) > 1e-13 * std::max(1.0, b); ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc <= fd ? c : d;
}

// Minimizer of the node term over the feasible t interval at a fixed load.
double best_node_t(const NodeParams& node, double load, double x, double epsilon) {
    const auto range = feasible_t_interval(node, load, epsilon);
    auto term = [&](double t) { return log_node_term(t, load, x, node); };
    double best_t = golden_section(term, range.lo, range.hi);
    double best = term(best_t);
    for (double edge : {range.lo, range.hi}) {
        const double v = term(edge);
        if (v < best) {
            best = v;
            best_t = edge;
        }
    }
    return best_t;
}

double relative_decrease(double log_before, double log_after) {
    if (log_before == log_after) return 0.0;
    return -std::expm1(log_after - log_before);
}

// Gradient steps on log f can be astronomically large toward a node whose
// weighted load has vanished, so trial points are clipped. The projection is
// invariant to adding a constant to a row's support entries, and its shift mu
// lies in [v_(k) - 1, v_(k)) with v_(k) the k-th largest entry. Each row is
// therefore first shifted so v_(k) = 1/2, which leaves the active window well
// inside the clip band. Only cap shifts larger than kClip are distorted.
AccessMatrix gradient_trial(const AccessMatrix& pi, const AccessMatrix& grad, double step,
                            const SystemModel& model) {
    constexpr double kClip = 10.0;
    AccessMatrix trial(pi.rows(), pi.cols(), 0.0);
    std::vector<double> row;
    for (std::size_t i = 0; i < pi.rows(); ++i) {
        const auto& f = model.files[i];
        row.clear();
        for (std::size_t j : f.placement) row.push_back(pi(i, j) - step * grad(i, j));
        auto kth = row;
        const auto k = static_cast<std::size_t>(std::clamp(f.code_k, 1, static_cast<int>(kth.size())));
        std::nth_element(kth.begin(), kth.begin() + (k - 1), kth.end(), std::greater<>());
        const double shift = std::isfinite(kth[k - 1]) ? 0.5 - kth[k - 1] : 0.0;
        for (std::size_t q = 0; q < row.size(); ++q)
            trial(i, f.placement[q]) = std::clamp(row[q] + shift, -kClip, kClip + 1.0);
    }
    return trial;
}

double dot_support(const AccessMatrix& a, const AccessMatrix& b) {
    double s = 0.0;
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t e = 0; e < va.size(); ++e) s += va[e] * vb[e];
    return s;
}

}  // namespace

std::string_view policy_name(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::Wltp: return "WLTP";
        case PolicyKind::WltpRp: return "WLTP-RP";
        case PolicyKind::WltpRpFixedT: return "WLTP-RP-FixedT";
        case PolicyKind::Peap: return "PEAP";
        case PolicyKind::PeapRp: return "PEAP-RP";
        case PolicyKind::Pspp: return "PSPP";
        case PolicyKind::PsppRp: return "PSPP-RP";
    }
    return "?";
}

PolicyKind parse_policy(std::string_view name) {
    const auto wanted = lower(name);
    for (PolicyKind kind : kAllPolicies)
        if (lower(policy_name(kind)) == wanted) return kind;
    throw ConfigError("unknown policy: " + std::string(name));
}

FreeBlocks free_blocks(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::Wltp: return {true, true, true};
        case PolicyKind::WltpRp: return {true, true, false};
        case PolicyKind::WltpRpFixedT: return {false, true, false};
        case PolicyKind::Peap: return {true, false, true};
        case PolicyKind::PeapRp: return {true, false, false};
        case PolicyKind::Pspp: return {true, false, true};
        case PolicyKind::PsppRp: return {true, false, false};
    }
    return {};
}

bool uses_random_placement(PolicyKind kind) {
    return kind == PolicyKind::WltpRp || kind == PolicyKind::WltpRpFixedT ||
           kind == PolicyKind::PeapRp || kind == PolicyKind::PsppRp;
}

// ---------------------------------------------------------------------------
// t step

AuxVector optimize_t(const AccessMatrix& pi, const SystemModel& model, double x) {
    return optimize_t(pi, AuxVector(model.node_count(), 0.0), model, x);
}

AuxVector optimize_t(const AccessMatrix& pi, const AuxVector& current, const SystemModel& model,
                     double x) {
    const auto loads = aggregate_arrival(pi, model.files);
    AuxVector out(model.node_count(), 0.0);
    for (std::size_t j = 0; j < model.node_count(); ++j) {
        const auto& node = model.nodes[j];
        const double load = loads[j];
        double best_t = best_node_t(node, load, x, model.epsilon);
        const double old = current[j];
        if (old > 0.0 && stability_margin(old, load, node) <= -model.epsilon &&
            log_node_term(old, load, x, node) <= log_node_term(best_t, load, x, node))
            best_t = old;
        out[j] = best_t;
    }
    return out;
}

// ---------------------------------------------------------------------------
// pi step

AccessMatrix optimize_pi(const AccessMatrix& pi, const AuxVector& t, const SystemModel& model,
                         double x, const OptimizerOptions& options) {
    constexpr double kSlope = 1e-4;
    constexpr double kShrink = 0.5;
    constexpr int kMaxHalvings = 60;

    AccessMatrix current = pi;
    double log_f = log_weighted_objective(model, current, t, x);
    double last_step = 1.0;
    for (int it = 0; it < options.max_inner; ++it) {
        const auto grad = log_objective_gradient(model, current, t, x);
        // Backtracking starts from twice the last accepted step (at most 1).
        double step = std::min(1.0, 2.0 * last_step);
        bool accepted = false;
        AccessMatrix candidate;
        double log_candidate = 0.0;
        for (int h = 0; h < kMaxHalvings; ++h, step *= kShrink) {
            candidate = project_feasible(gradient_trial(current, grad, step, model), t, model);

            AccessMatrix delta = candidate;
            auto dv = delta.values();
            const auto cv = current.values();
            for (std::size_t e = 0; e < dv.size(); ++e) dv[e] -= cv[e];
            const double slope = dot_support(grad, delta);
            if (slope >= 0.0) {
                // Projection returned no descent direction; shrinking further only
                // helps if the step overshot a constraint kink.
                if (candidate == current) break;
                continue;
            }
            log_candidate = log_weighted_objective(model, candidate, t, x);
            if (log_candidate <= log_f + kSlope * slope) {
                accepted = true;
                last_step = step;
                break;
            }
        }
        if (!accepted) break;
        const double rel = relative_decrease(log_f, log_candidate);
        current = std::move(candidate);
        log_f = log_candidate;
        if (rel < options.inner_tol) break;
    }
    return current;
}

double projected_gradient_norm(const AccessMatrix& pi, const AuxVector& t,
                               const SystemModel& model, double x) {
    const auto grad = log_objective_gradient(model, pi, t, x);
    const auto projected = project_feasible(gradient_trial(pi, grad, 1.0, model), t, model);
    double sq = 0.0;
    const auto pv = projected.values();
    const auto v = pi.values();
    for (std::size_t e = 0; e < v.size(); ++e) sq += (pv[e] - v[e]) * (pv[e] - v[e]);
    return std::sqrt(sq);
}

// ---------------------------------------------------------------------------
// placement step

namespace {

// Retuned t for a node whose current t cannot carry `load`; nullopt when no t can.
std::optional<double> retuned_t(const NodeParams& node, double load, double x, double epsilon) {
    try {
        return best_node_t(node, load, x, epsilon);
    } catch (const NoFeasibleT&) {
        return std::nullopt;
    }
}

// log D[u][v]; -inf for zero rows and +inf where the move breaks stability.
// With `retune`, a destination whose current t cannot carry the new load is
// priced at its best t for that load instead.
std::vector<double> edge_log_weights(std::size_t file, const AccessMatrix& pi, const AuxVector& t,
                                     const SystemModel& model, double x, bool retune) {
    const std::size_t m = model.node_count();
    const auto loads = aggregate_arrival(pi, model.files);
    const double lambda = model.files[file].arrival_rate;
    std::vector<double> out(m * m, -kInf);
    for (std::size_t u = 0; u < m; ++u) {
        const double moved = lambda * pi(file, u);
        if (moved <= 0.0) continue;
        for (std::size_t v = 0; v < m; ++v) {
            const auto& node = model.nodes[v];
            const double load = std::max(0.0, loads[v] - lambda * pi(file, v)) + moved;
            double tv = t[v];
            if (!(stability_margin(tv, load, node) <= -model.epsilon)) {
                const auto tuned = retune ? retuned_t(node, load, x, model.epsilon) : std::nullopt;
                if (!tuned) {
                    out[u * m + v] = kInf;
                    continue;
                }
                tv = *tuned;
            }
            out[u * m + v] = std::log(moved) + log_node_term(tv, load, x, node);
        }
    }
    return out;
}

// Converts log weights to costs scaled by exp(-shift), with penalties.
CostMatrix to_costs(const std::vector<double>& logs, std::size_t m, double shift) {
    CostMatrix cost(m, 0.0);
    double finite_total = 0.0;
    for (std::size_t e = 0; e < logs.size(); ++e) {
        if (logs[e] == -kInf || logs[e] == kInf) continue;
        const double c = std::exp(logs[e] - shift);
        cost(e / m, e % m) = c;
        finite_total += c;
    }
    const double penalty = 1.0 + 2.0 * finite_total;
    for (std::size_t e = 0; e < logs.size(); ++e)
        if (logs[e] == kInf) cost(e / m, e % m) = penalty;
    return cost;
}

}  // namespace

CostMatrix placement_edge_weights(std::size_t file, const AccessMatrix& pi, const AuxVector& t,
                                  const SystemModel& model, double x) {
    return to_costs(edge_log_weights(file, pi, t, model, x, false), model.node_count(), 0.0);
}

PlacementResult optimize_placement(const AccessMatrix& pi, const AuxVector& t,
                                   const SystemModel& model, double x, Rng& rng, bool retune) {
    const std::size_t m = model.node_count();
    PlacementResult result{pi, t, model.placements(), 0};
    SystemModel working = model;

    std::vector<std::size_t> order(model.file_count());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);

    double log_f = log_weighted_objective(working, result.pi, result.t, x);
    for (std::size_t i : order) {
        const auto logs = edge_log_weights(i, result.pi, result.t, working, x, retune);
        double peak = -kInf;
        for (double v : logs)
            if (v != kInf) peak = std::max(peak, v);
        if (peak == -kInf) continue;
        const auto assignment = hungarian(to_costs(logs, m, peak));

        AccessMatrix next = result.pi;
        for (std::size_t u = 0; u < m; ++u) next(i, assignment.target[u]) = result.pi(i, u);
        if (next == result.pi) continue;

        Placement moved;
        for (std::size_t u : working.files[i].placement) moved.push_back(assignment.target[u]);
        std::sort(moved.begin(), moved.end());

        const auto loads = aggregate_arrival(next, working.files);
        AuxVector t_next = result.t;
        bool carried = true;
        for (std::size_t j = 0; j < m && carried; ++j) {
            const auto& node = working.nodes[j];
            if (stability_margin(t_next[j], loads[j], node) <= -working.epsilon) continue;
            const auto tuned = retune ? retuned_t(node, loads[j], x, working.epsilon) : std::nullopt;
            if (tuned) {
                t_next[j] = *tuned;
            } else {
                carried = false;
            }
        }
        if (!carried || !jointly_feasible(working, loads, t_next, working.epsilon)) continue;
        const double log_next = log_weighted_objective(working, next, t_next, x);
        if (!(log_next <= log_f)) continue;

        result.pi = std::move(next);
        result.t = std::move(t_next);
        working.files[i].placement = moved;
        result.placement[i] = std::move(moved);
        log_f = log_next;
        ++result.accepted;
    }
    return result;
}

// ---------------------------------------------------------------------------
// outer loop

Solution alternating_optimize(const SystemModel& model, const FeasibleStart& start,
                              FreeBlocks blocks, double x, const OptimizerOptions& options) {
    SystemModel working = model;
    Solution sol;
    sol.pi = start.pi;
    sol.t = start.t;
    Rng order_rng(derive_seed(options.seed, 1));

    // The t block is minimized once up front so iteration k compares two
    // points that are both optimal in t.
    if (blocks.t) sol.t = optimize_t(sol.pi, sol.t, working, x);
    double log_f = log_weighted_objective(working, sol.pi, sol.t, x);
    sol.log_objective_trace.push_back(log_f);

    for (int k = 1; k <= options.max_outer; ++k) {
        if (blocks.t) sol.t = optimize_t(sol.pi, sol.t, working, x);
        if (blocks.pi) sol.pi = optimize_pi(sol.pi, sol.t, working, x, options);
        if (blocks.placement) {
            auto placed = optimize_placement(sol.pi, sol.t, working, x, order_rng, blocks.t);
            sol.pi = std::move(placed.pi);
            sol.t = std::move(placed.t);
            working = with_placements(working, placed.placement);
        }
        const double log_next = log_weighted_objective(working, sol.pi, sol.t, x);
        const double rel = relative_decrease(log_f, log_next);
        sol.log_objective_trace.push_back(log_next);
        log_f = log_next;
        sol.iterations = k;
        if (rel < options.tol) {
            sol.converged = true;
            break;
        }
    }
    sol.placement = working.placements();
    for (double v : sol.log_objective_trace) sol.objective_trace.push_back(std::exp(v));
    return sol;
}

Solution alternating_optimize(const SystemModel& model, double x, const OptimizerOptions& options) {
    return alternating_optimize(model, nearest_feasible_init(model), FreeBlocks{}, x, options);
}

AccessMatrix service_proportional_pattern(const SystemModel& model) {
    AccessMatrix pattern(model.file_count(), model.node_count(), 0.0);
    for (std::size_t i = 0; i < model.file_count(); ++i) {
        const auto& f = model.files[i];
        double total = 0.0;
        for (std::size_t j : f.placement) total += model.nodes[j].service_rate();
        for (std::size_t j : f.placement)
            pattern(i, j) = f.code_k * model.nodes[j].service_rate() / total;
    }
    return pattern;
}

std::vector<Placement> random_placement(const SystemModel& model, Rng& rng) {
    std::vector<Placement> out;
    std::map<std::pair<std::size_t, int>, Placement> drawn;
    std::vector<std::size_t> nodes(model.node_count());
    for (const auto& f : model.files) {
        auto [it, fresh] = drawn.try_emplace({f.group, f.code_n});
        if (fresh) {
            std::iota(nodes.begin(), nodes.end(), 0);
            shuffle(nodes, rng);
            it->second.assign(nodes.begin(), nodes.begin() + f.code_n);
            std::sort(it->second.begin(), it->second.end());
        }
        out.push_back(it->second);
    }
    return out;
}

Solution baseline_policy(PolicyKind kind, const SystemModel& model, double x,
                         const OptimizerOptions& options) {
    SystemModel placed = model;
    if (uses_random_placement(kind)) {
        Rng rng(options.placement_seed ? *options.placement_seed : derive_seed(options.seed, 0));
        placed = with_placements(model, random_placement(model, rng));
    }
    const bool proportional = kind == PolicyKind::Pspp || kind == PolicyKind::PsppRp;
    const auto pattern =
        proportional ? service_proportional_pattern(placed) : equal_access_pattern(placed);
    return alternating_optimize(placed, feasible_start(placed, pattern), free_blocks(kind), x,
                                options);
}

}  // namespace ectail
