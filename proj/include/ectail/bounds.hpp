#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ectail/model.hpp"

namespace ectail {

// Moment generating function of the shifted exponential,
// alpha / (alpha - t) * exp(beta t). Throws PoleError for t >= alpha.
double mgf_shifted_exp(const NodeParams& node, double t);
double log_mgf_shifted_exp(const NodeParams& node, double t);

// t (t - alpha + Lambda) + Lambda alpha (exp(beta t) - 1).
// The sojourn transform at t exists iff this is negative.
double stability_margin(double t, double load, const NodeParams& node);

struct TInterval {
    double lo = 0.0;
    double hi = 0.0;
};

// Interval of t on which stability_margin <= -epsilon. The margin is convex in
// t and zero at t = 0, so the set is a single interval. Throws NoFeasibleT when
// it is empty (in particular whenever rho >= 1).
TInterval feasible_t_interval(const NodeParams& node, double load, double epsilon);

// Upper end of feasible_t_interval.
double t_max(const NodeParams& node, double load, double epsilon);

// E[exp(t Q)] for the M/G/1 sojourn time Q (Pollaczek-Khinchine at s = -t).
// Throws InfeasibleT unless t > 0 and stability_margin < 0.
double sojourn_mgf(double t, double load, const NodeParams& node);
double log_sojourn_mgf(double t, double load, const NodeParams& node);

// log(exp(-t x) E[exp(t Q)]), the Markov bound on Pr(Q >= x) in log form.
double log_node_term(double t, double load, double x, const NodeParams& node);

// d/dLambda of log E[exp(t Q)] at fixed t.
double dlog_sojourn_mgf_dload(double t, double load, const NodeParams& node);

// Laplace-Stieltjes transform of the shifted exponential, E[exp(-s X)].
double lst_shifted_exp(const NodeParams& node, double s);

// E[exp(-s Q)] via Pollaczek-Khinchine for an arbitrary service LST.
using ServiceLst = std::function<double(double s)>;
double sojourn_lst(const ServiceLst& service_lst, double mean_service, double load, double s);
double sojourn_lst(double s, double load, const NodeParams& node);

// Mean sojourn E[Q] = E[X] + Lambda E[X^2] / (2 (1 - rho)).
double mean_sojourn(double load, const NodeParams& node);

// Markov/Chernoff bound on Pr(L_i >= x):
//   sum_j pi_ij exp(-t_j x) E[exp(t_j Q_j)].
// Nodes with pi_ij = 0 are skipped. Propagates InfeasibleT.
double file_tail_bound(const SystemModel& model, const AccessMatrix& pi, const AuxVector& t,
                       std::size_t file, double x);
double log_file_tail_bound(const SystemModel& model, const AccessMatrix& pi, const AuxVector& t,
                           std::size_t file, double x);

// Bound from the sojourn LST directly:
//   sum_j pi_ij (1 - E[exp(-s_j Q_j)]) / (1 - exp(-s_j x)).
// Throws UnstableNode when a used node has rho >= 1.
double lst_tail_bound(const SystemModel& model, const AccessMatrix& pi, std::size_t file,
                      std::span<const double> s, double x);

// Same bound with caller-supplied per-node service LSTs and mean service times.
double lst_tail_bound(const AccessMatrix& pi, std::span<const double> loads, std::size_t file,
                      std::span<const ServiceLst> service_lst,
                      std::span<const double> mean_service, std::span<const double> s, double x);

struct BoundReport {
    std::vector<double> per_file_bound;
    std::vector<double> per_file_clipped;
    double objective = 0.0;
    double log_objective = 0.0;
    std::vector<double> per_node_terms;  // exp(-t_j x) E[exp(t_j Q_j)], 0 for idle nodes
};

BoundReport evaluate_bounds(const SystemModel& model, const AccessMatrix& pi, const AuxVector& t,
                            double x);

// Weighted tail objective in node-sum form: sum_j W_j exp(-t_j x) E[exp(t_j Q_j)]
// with W_j = sum_i omega_i pi_ij. Equals sum_i omega_i file_tail_bound(i).
double weighted_objective(const SystemModel& model, const AccessMatrix& pi, const AuxVector& t,
                          double x);

// Natural log of weighted_objective, finite even when the objective underflows.
// Returns -infinity if no node carries weight.
double log_weighted_objective(const SystemModel& model, const AccessMatrix& pi,
                              const AuxVector& t, double x);

// Gradient of log_weighted_objective with respect to every pi_ij (dense r x m).
AccessMatrix log_objective_gradient(const SystemModel& model, const AccessMatrix& pi,
                                    const AuxVector& t, double x);

// Gradient of weighted_objective with respect to every pi_ij.
AccessMatrix objective_gradient(const SystemModel& model, const AccessMatrix& pi,
                                const AuxVector& t, double x);

// True when every node satisfies stability_margin <= -epsilon.
bool jointly_feasible(const SystemModel& model, std::span<const double> loads, const AuxVector& t,
                      double epsilon);

}  // namespace ectail
