#pragma once

// Random instance generators shared by the unit tests and the acceptance run.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ectail/model.hpp"
#include "ectail/projection.hpp"
#include "ectail/random.hpp"
#include "oracles/qp_oracle.hpp"

namespace testing_support {

inline double uniform(ectail::Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * ectail::uniform01(rng);
}

inline int uniform_int(ectail::Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(ectail::uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

inline std::vector<long long> random_subset(ectail::Rng& rng, int m, int n) {
    std::vector<long long> nodes(static_cast<std::size_t>(m));
    std::iota(nodes.begin(), nodes.end(), 0);
    ectail::shuffle(nodes, rng);
    nodes.resize(static_cast<std::size_t>(n));
    std::sort(nodes.begin(), nodes.end());
    return nodes;
}

inline ectail::RawNode random_node(ectail::Rng& rng) {
    return {uniform(rng, 10.0, 30.0), uniform(rng, 5.0, 15.0)};
}

// Random heterogeneous system whose equal-access loads sit at utilization
// `peak` on the busiest node.
inline ectail::SystemModel random_model(ectail::Rng& rng, int m, int groups, double peak) {
    ectail::RawScenario raw;
    for (int j = 0; j < m; ++j) raw.nodes.push_back(random_node(rng));
    for (int g = 0; g < groups; ++g) {
        ectail::RawFileGroup group;
        group.count = uniform_int(rng, 1, 3);
        group.n = uniform_int(rng, 2, m);
        group.k = uniform_int(rng, 1, group.n);
        group.lambda_per_sec = uniform(rng, 0.5, 2.0);
        group.placement = random_subset(rng, m, group.n);
        raw.groups.push_back(group);
    }
    std::vector<double> load(static_cast<std::size_t>(m), 0.0);
    for (const auto& g : raw.groups)
        for (long long j : g.placement)
            load[static_cast<std::size_t>(j)] += g.count * g.lambda_per_sec * g.k / g.n;
    double worst = 0.0;
    for (int j = 0; j < m; ++j) {
        const double mean = 1.0 / raw.nodes[j].alpha_per_sec + raw.nodes[j].beta_ms / 1000.0;
        worst = std::max(worst, load[static_cast<std::size_t>(j)] * mean);
    }
    for (auto& g : raw.groups) g.lambda_per_sec *= peak / worst;
    return ectail::validate_system(raw);
}

// t maximizing node_cap, by golden section (the cap is unimodal on (0, alpha)).
inline double best_cap_t(const ectail::NodeParams& node, double epsilon) {
    double lo = 0.0, hi = node.rate_alpha;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 200; ++it) {
        const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
        if (ectail::node_cap(node, a, epsilon) < ectail::node_cap(node, b, epsilon)) lo = a;
        else hi = b;
    }
    return 0.5 * (lo + hi);
}

// t above best_cap_t with node_cap(t) == cap.
inline double t_for_cap(const ectail::NodeParams& node, double epsilon, double cap) {
    double lo = best_cap_t(node, epsilon), hi = node.rate_alpha;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ectail::node_cap(node, mid, epsilon) > cap) lo = mid;
        else hi = mid;
    }
    return lo;
}

struct ProjectionInstance {
    ectail::SystemModel model;
    ectail::AuxVector t;
    ectail::AccessMatrix interior;  // strictly feasible point
    ectail::AccessMatrix point;     // point to project, garbage off the support
};

// r files on m nodes, every k_i < n_i so the region has an interior. Caps sit
// 2% to 60% above the interior point's loads so that several of them bind.
inline ProjectionInstance random_projection_instance(ectail::Rng& rng, int r, int m,
                                                     double noise) {
    ectail::RawScenario raw;
    for (int j = 0; j < m; ++j) raw.nodes.push_back(random_node(rng));
    for (int i = 0; i < r; ++i) {
        ectail::RawFileGroup group;
        group.n = uniform_int(rng, 2, m);
        group.k = uniform_int(rng, 1, group.n - 1);
        group.lambda_per_sec = uniform(rng, 0.5, 2.0);
        group.placement = random_subset(rng, m, group.n);
        raw.groups.push_back(group);
    }
    ProjectionInstance inst;
    inst.model = ectail::validate_system(raw);
    const auto& model = inst.model;

    inst.interior = ectail::AccessMatrix(r, m);
    for (int i = 0; i < r; ++i) {
        const auto& f = model.files[i];
        const double base = static_cast<double>(f.code_k) / f.code_n;
        const double room = 0.4 * std::min(base, 1.0 - base);
        std::vector<double> u(f.placement.size());
        for (double& x : u) x = uniform(rng, -1.0, 1.0);
        const double mean = std::accumulate(u.begin(), u.end(), 0.0) / u.size();
        for (std::size_t q = 0; q < u.size(); ++q)
            inst.interior(i, f.placement[q]) = base + room * (u[q] - mean);
    }

    // Scale rates so every load is at most half the best cap, then pick t per node.
    auto loads = ectail::aggregate_arrival(inst.interior, model.files);
    double scale = 0.0;
    for (int j = 0; j < m; ++j) {
        const auto& node = model.nodes[j];
        const double best = ectail::node_cap(node, best_cap_t(node, model.epsilon), model.epsilon);
        scale = std::max(scale, loads[j] / (0.5 * best));
    }
    for (auto& f : inst.model.files) f.arrival_rate /= scale;
    loads = ectail::aggregate_arrival(inst.interior, model.files);
    inst.t = ectail::AuxVector(static_cast<std::size_t>(m), 0.0);
    for (int j = 0; j < m; ++j) {
        const auto& node = model.nodes[j];
        inst.t[j] = loads[j] > 0.0
                        ? t_for_cap(node, model.epsilon, loads[j] * uniform(rng, 1.02, 1.6))
                        : best_cap_t(node, model.epsilon);
    }

    inst.point = ectail::AccessMatrix(r, m);
    for (int i = 0; i < r; ++i) {
        std::vector<bool> on(m, false);
        for (std::size_t j : model.files[i].placement) on[j] = true;
        for (int j = 0; j < m; ++j) {
            const double z = std::sqrt(-2.0 * std::log1p(-ectail::uniform01(rng))) *
                             std::cos(2.0 * M_PI * ectail::uniform01(rng));
            inst.point(i, j) = on[j] ? inst.interior(i, j) + noise * z : uniform(rng, -1.0, 2.0);
        }
    }
    return inst;
}

// Flattened support coordinates, file by file.
struct Layout {
    std::vector<std::pair<std::size_t, std::size_t>> entries;
};

inline Layout support_layout(const ectail::SystemModel& model) {
    Layout layout;
    for (std::size_t i = 0; i < model.file_count(); ++i)
        for (std::size_t j : model.files[i].placement) layout.entries.push_back({i, j});
    return layout;
}

inline oracle::DenseQp dense_projection_qp(const ProjectionInstance& inst, const Layout& layout) {
    const auto& model = inst.model;
    const int n = static_cast<int>(layout.entries.size());
    const int r = static_cast<int>(model.file_count());
    const int m = static_cast<int>(model.node_count());
    oracle::DenseQp qp;
    qp.v.resize(n);
    qp.a_eq = Eigen::MatrixXd::Zero(r, n);
    qp.b_eq.resize(r);
    qp.c = Eigen::MatrixXd::Zero(m, n);
    qp.d.resize(m);
    for (int e = 0; e < n; ++e) {
        const auto [i, j] = layout.entries[e];
        qp.v[e] = inst.point(i, j);
        qp.a_eq(static_cast<int>(i), e) = 1.0;
        qp.c(static_cast<int>(j), e) = model.files[i].arrival_rate;
    }
    for (int i = 0; i < r; ++i) qp.b_eq[i] = model.files[i].code_k;
    for (int j = 0; j < m; ++j) qp.d[j] = ectail::node_cap(model.nodes[j], inst.t[j], model.epsilon);
    return qp;
}

inline Eigen::VectorXd flatten(const ectail::AccessMatrix& pi, const Layout& layout) {
    Eigen::VectorXd out(static_cast<int>(layout.entries.size()));
    for (std::size_t e = 0; e < layout.entries.size(); ++e)
        out[static_cast<int>(e)] = pi(layout.entries[e].first, layout.entries[e].second);
    return out;
}

struct QpComparison {
    double max_error = 0.0;
    int active_caps = 0;  // caps binding at the oracle solution
};

inline QpComparison compare_with_qp_oracle(const ProjectionInstance& inst) {
    const Layout layout = support_layout(inst.model);
    const oracle::DenseQp qp = dense_projection_qp(inst, layout);
    const Eigen::VectorXd reference = oracle::solve_qp(qp, flatten(inst.interior, layout));
    const auto projected = ectail::project_feasible(inst.point, inst.t, inst.model);
    QpComparison cmp;
    cmp.max_error = (flatten(projected, layout) - reference).cwiseAbs().maxCoeff();
    for (std::size_t i = 0; i < projected.rows(); ++i) {
        std::vector<bool> on(projected.cols(), false);
        for (std::size_t j : inst.model.files[i].placement) on[j] = true;
        for (std::size_t j = 0; j < projected.cols(); ++j)
            if (!on[j]) cmp.max_error = std::max(cmp.max_error, std::abs(projected(i, j)));
    }
    const Eigen::VectorXd slack = qp.d - qp.c * reference;
    for (int j = 0; j < slack.size(); ++j)
        if (slack[j] < 1e-7 * std::max(1.0, qp.d[j])) ++cmp.active_caps;
    return cmp;
}

}  // namespace testing_support
