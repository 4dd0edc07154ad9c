#pragma once

#include <span>
#include <vector>

#include "ectail/model.hpp"

namespace ectail {

// Largest node load Lambda with stability_margin(t, Lambda) <= -epsilon.
// The margin is affine in Lambda at fixed t, so this is exact:
//   (-epsilon - t (t - alpha)) / (t + alpha (exp(beta t) - 1)).
// Negative when t is infeasible even for an idle node.
double node_cap(const NodeParams& node, double t, double epsilon);

// Constraint data of the scheduling polytope at a fixed t.
struct FeasibleRegion {
    std::vector<Placement> support;
    std::vector<double> row_targets;   // k_i
    std::vector<double> arrival_rates; // lambda_i, the halfspace coefficients
    std::vector<double> caps;          // per node
};

FeasibleRegion feasible_region(const SystemModel& model, const AuxVector& t);

// Euclidean projection onto {0 <= p <= 1, sum p = k}.
std::vector<double> project_capped_simplex(std::span<const double> v, double k);

struct ProjectionOptions {
    int newton_iterations = 200;  // dual projected-Newton steps
    int max_iterations = 10000;   // Dykstra sweeps if the Newton solve stalls
    double tolerance = 1e-8;      // relative cap slack and KKT tolerance
};

// Euclidean projection of pi0 (restricted to each file's placement) onto the
// capped simplices intersected with the node caps at t. Solved in the dual:
// one multiplier per node cap, each file row is a capped-simplex projection of
// the shifted row, and a projected Newton iteration drives the multipliers to
// the KKT point. Dykstra's alternating projections serve as a fallback.
// Caps are tightened by tolerance * max(1, cap) so the result meets them
// exactly. Returns pi0 untouched when it is already feasible. Throws
// InfeasibleRegion when the polytope is empty or both methods fail.
AccessMatrix project_feasible(const AccessMatrix& pi0, const AuxVector& t,
                              const SystemModel& model, const ProjectionOptions& options = {});

// True when pi satisfies rows, box, support and every node cap at t.
bool is_feasible(const AccessMatrix& pi, const AuxVector& t, const SystemModel& model,
                 double tolerance = kRowSumTolerance);

struct FeasibleStart {
    AccessMatrix pi;
    AuxVector t;
};

inline constexpr double kInitialT = 0.01;

// Projects `pattern` at t = t0 on every node, halving t until the region is
// nonempty. Throws InfeasibleRegion if no halving helps.
FeasibleStart feasible_start(const SystemModel& model, const AccessMatrix& pattern,
                             double t0 = kInitialT);

// pi_ij = k_i / n_i on the placement.
AccessMatrix equal_access_pattern(const SystemModel& model);

// feasible_start(model, equal_access_pattern(model)).
FeasibleStart nearest_feasible_init(const SystemModel& model);

}  // namespace ectail
