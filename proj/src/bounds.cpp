#include "ectail/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ectail {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum exp(v)) over the finite entries; -inf when there are none.
double log_sum_exp(std::span<const double> logs) {
    double peak = kNegInf;
    for (double v : logs) peak = std::max(peak, v);
    if (peak == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double v : logs)
        if (v != kNegInf) acc += std::exp(v - peak);
    return peak + std::log(acc);
}

double margin_slope(double t, double load, const NodeParams& node) {
    const double a = node.rate_alpha;
    const double b = node.shift_beta;
    return 2.0 * t - a + load + load * a * b * std::exp(b * t);
}

// Weighted loads W_j = sum_i omega_i pi_ij.
std::vector<double> weighted_loads(const SystemModel& model, const AccessMatrix& pi) {
    std::vector<double> w(pi.cols(), 0.0);
    for (std::size_t i = 0; i < pi.rows(); ++i) {
        const double omega = model.files[i].weight;
        const auto row = pi.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) w[j] += omega * row[j];
    }
    return w;
}

}  // namespace

double log_mgf_shifted_exp(const NodeParams& node, double t) {
    if (t >= node.rate_alpha)
        throw PoleError("mgf evaluated at t = " + std::to_string(t) +
                        " >= alpha = " + std::to_string(node.rate_alpha));
    return std::log(node.rate_alpha) - std::log(node.rate_alpha - t) + node.shift_beta * t;
}

double mgf_shifted_exp(const NodeParams& node, double t) {
    return std::exp(log_mgf_shifted_exp(node, t));
}

double stability_margin(double t, double load, const NodeParams& node) {
    const double a = node.rate_alpha;
    return t * (t - a + load) + load * a * std::expm1(node.shift_beta * t);
}

TInterval feasible_t_interval(const NodeParams& node, double load, double epsilon) {
    load = std::max(load, 0.0);
    const double a = node.rate_alpha;
    if (margin_slope(0.0, load, node) >= 0.0)
        throw NoFeasibleT("node is unstable (rho >= 1); no feasible t exists");

    // Minimizer of the convex margin: root of its increasing derivative.
    double lo = 0.0;
    double hi = a;
    for (int it = 0; it < 400 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (margin_slope(mid, load, node) < 0.0 ? lo : hi) = mid;
    }
    const double t_star = lo;
    if (stability_margin(t_star, load, node) > -epsilon)
        throw NoFeasibleT("stability margin never reaches -epsilon for this load");

    auto root = [&](double inside, double outside) {
        // inside: margin <= -eps, outside: margin > -eps. Returns a feasible end.
        for (int it = 0; it < 400; ++it) {
            const double mid = 0.5 * (inside + outside);
            if (mid == inside || mid == outside) break;
            (stability_margin(mid, load, node) <= -epsilon ? inside : outside) = mid;
        }
        return inside;
    };
    return {root(t_star, 0.0), root(t_star, a)};
}

double t_max(const NodeParams& node, double load, double epsilon) {
    return feasible_t_interval(node, load, epsilon).hi;
}

double log_sojourn_mgf(double t, double load, const NodeParams& node) {
    const double margin = stability_margin(t, load, node);
    if (!(t > 0.0) || !(margin < 0.0))
        throw InfeasibleT("sojourn mgf undefined at t = " + std::to_string(t) +
                          " (margin " + std::to_string(margin) + ")");
    // The PK denominator t - Lambda (M(t) - 1) equals -margin / (alpha - t), which
    // cancels the MGF pole: E[exp(tQ)] = (1 - rho) t alpha exp(beta t) / (-margin).
    const double rho = traffic_intensity(load, node).rho;
    return std::log1p(-rho) + std::log(t) + std::log(node.rate_alpha) + node.shift_beta * t -
           std::log(-margin);
}

double sojourn_mgf(double t, double load, const NodeParams& node) {
    return std::exp(log_sojourn_mgf(t, load, node));
}

double log_node_term(double t, double load, double x, const NodeParams& node) {
    return log_sojourn_mgf(t, load, node) - t * x;
}

double dlog_sojourn_mgf_dload(double t, double load, const NodeParams& node) {
    const double margin = stability_margin(t, load, node);
    if (!(t > 0.0) || !(margin < 0.0)) throw InfeasibleT("derivative undefined at infeasible t");
    const double a = node.rate_alpha;
    const double c1 = node.mean_service();
    const double rho = load * c1;
    // (M - 1)(alpha - t) = alpha expm1(beta t) + t
    return -c1 / (1.0 - rho) + (a * std::expm1(node.shift_beta * t) + t) / (-margin);
}

double lst_shifted_exp(const NodeParams& node, double s) {
    return node.rate_alpha / (node.rate_alpha + s) * std::exp(-node.shift_beta * s);
}

double sojourn_lst(const ServiceLst& service_lst, double mean_service, double load, double s) {
    const double rho = load * mean_service;
    if (rho >= 1.0) throw UnstableNode("sojourn LST requires rho < 1, got " + std::to_string(rho));
    if (s == 0.0) return 1.0;
    const double l = service_lst(s);
    return (1.0 - rho) * s * l / (s - load * (1.0 - l));
}

double sojourn_lst(double s, double load, const NodeParams& node) {
    return sojourn_lst([&node](double v) { return lst_shifted_exp(node, v); }, node.mean_service(),
                       load, s);
}

double mean_sojourn(double load, const NodeParams& node) {
    const auto in = traffic_intensity(load, node);
    if (in.unstable) throw UnstableNode("mean sojourn requires rho < 1");
    return node.mean_service() + load * node.second_moment() / (2.0 * (1.0 - in.rho));
}

double log_file_tail_bound(const SystemModel& model, const AccessMatrix& pi, const AuxVector& t,
                           std::size_t file, double x) {
    const auto loads = aggregate_arrival(pi, model.files);
    std::vector<double> logs;
    for (std::size_t j = 0; j < pi.cols(); ++j) {
        const double p = pi(file, j);
        if (p <= 0.0) continue;
        logs.push_back(std::log(p) + log_node_term(t[j], loads[j], x, model.nodes[j]));
    }
    return log_sum_exp(logs);
}

double file_tail_bound(const SystemModel& model, const AccessMatrix& pi, const AuxVector& t,
                       std::size_t file, double x) {
    return std::exp(log_file_tail_bound(model, pi, t, file, x));
}

namespace {

// sum_j pi_ij complement_j / (1 - exp(-s_j x)) where complement_j = 1 - E[exp(-s_j Q_j)].
template <class Complement>
double lst_bound_sum(const AccessMatrix& pi, std::size_t file, std::span<const double> s, double x,
                     Complement complement) {
    double bound = 0.0;
    for (std::size_t j = 0; j < pi.cols(); ++j) {
        const double p = pi(file, j);
        if (p <= 0.0) continue;
        if (!(s[j] > 0.0)) throw Error("LST bound requires s_j > 0");
        bound += p * complement(j) / (-std::expm1(-s[j] * x));
    }
    return bound;
}

}  // namespace

double lst_tail_bound(const AccessMatrix& pi, std::span<const double> loads, std::size_t file,
                      std::span<const ServiceLst> service_lst,
                      std::span<const double> mean_service, std::span<const double> s, double x) {
    return lst_bound_sum(pi, file, s, x, [&](std::size_t j) {
        return 1.0 - sojourn_lst(service_lst[j], mean_service[j], loads[j], s[j]);
    });
}

double lst_tail_bound(const SystemModel& model, const AccessMatrix& pi, std::size_t file,
                      std::span<const double> s, double x) {
    const auto loads = aggregate_arrival(pi, model.files);
    // 1 - E[exp(-sQ)] = (s c + Lambda (E[X] s l - c)) / (s - Lambda c) with
    // l = E[exp(-sX)] and c = 1 - l taken from expm1, which stays accurate for
    // small s where 1 - l would cancel.
    return lst_bound_sum(pi, file, s, x, [&](std::size_t j) {
        const auto& node = model.nodes[j];
        const double load = loads[j];
        if (traffic_intensity(load, node).unstable)
            throw UnstableNode("sojourn LST requires rho < 1 at node " + std::to_string(j));
        const double c = -std::expm1(-std::log1p(s[j] / node.rate_alpha) - node.shift_beta * s[j]);
        const double l = 1.0 - c;
        return (s[j] * c + load * (node.mean_service() * s[j] * l - c)) / (s[j] - load * c);
    });
}

double log_weighted_objective(const SystemModel& model, const AccessMatrix& pi,
                              const AuxVector& t, double x) {
    const auto loads = aggregate_arrival(pi, model.files);
    const auto weights = weighted_loads(model, pi);
    std::vector<double> logs(pi.cols(), kNegInf);
    for (std::size_t j = 0; j < pi.cols(); ++j) {
        if (weights[j] <= 0.0) continue;
        logs[j] = std::log(weights[j]) + log_node_term(t[j], loads[j], x, model.nodes[j]);
    }
    return log_sum_exp(logs);
}

double weighted_objective(const SystemModel& model, const AccessMatrix& pi, const AuxVector& t,
                          double x) {
    return std::exp(log_weighted_objective(model, pi, t, x));
}

AccessMatrix log_objective_gradient(const SystemModel& model, const AccessMatrix& pi,
                                    const AuxVector& t, double x) {
    const auto loads = aggregate_arrival(pi, model.files);
    const auto weights = weighted_loads(model, pi);
    const double log_f = log_weighted_objective(model, pi, t, x);
    const std::size_t m = pi.cols();

    // Per node: T_j / f and the load sensitivity of log T_j.
    std::vector<double> ratio(m), dlog(m);
    for (std::size_t j = 0; j < m; ++j) {
        const auto& node = model.nodes[j];
        ratio[j] = std::exp(log_node_term(t[j], loads[j], x, node) - log_f);
        dlog[j] = dlog_sojourn_mgf_dload(t[j], loads[j], node);
    }
    AccessMatrix grad(pi.rows(), m);
    for (std::size_t i = 0; i < pi.rows(); ++i) {
        const auto& f = model.files[i];
        for (std::size_t j = 0; j < m; ++j)
            grad(i, j) = ratio[j] * (f.weight + f.arrival_rate * weights[j] * dlog[j]);
    }
    return grad;
}

AccessMatrix objective_gradient(const SystemModel& model, const AccessMatrix& pi,
                                const AuxVector& t, double x) {
    auto grad = log_objective_gradient(model, pi, t, x);
    const double f = weighted_objective(model, pi, t, x);
    for (double& g : grad.values()) g *= f;
    return grad;
}

BoundReport evaluate_bounds(const SystemModel& model, const AccessMatrix& pi, const AuxVector& t,
                            double x) {
    BoundReport report;
    const auto loads = aggregate_arrival(pi, model.files);
    const auto weights = weighted_loads(model, pi);
    report.per_node_terms.assign(pi.cols(), 0.0);
    for (std::size_t j = 0; j < pi.cols(); ++j)
        if (weights[j] > 0.0)
            report.per_node_terms[j] = std::exp(log_node_term(t[j], loads[j], x, model.nodes[j]));

    for (std::size_t i = 0; i < pi.rows(); ++i) {
        const double b = file_tail_bound(model, pi, t, i, x);
        report.per_file_bound.push_back(b);
        report.per_file_clipped.push_back(std::min(b, 1.0));
        report.objective += model.files[i].weight * b;
    }
    report.log_objective = log_weighted_objective(model, pi, t, x);
    return report;
}

bool jointly_feasible(const SystemModel& model, std::span<const double> loads, const AuxVector& t,
                      double epsilon) {
    for (std::size_t j = 0; j < model.node_count(); ++j)
        if (!(stability_margin(t[j], loads[j], model.nodes[j]) <= -epsilon)) return false;
    return true;
}

}  // namespace ectail
