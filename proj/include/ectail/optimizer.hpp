#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ectail/hungarian.hpp"
#include "ectail/model.hpp"
#include "ectail/projection.hpp"
#include "ectail/random.hpp"

namespace ectail {

enum class PolicyKind { Wltp, WltpRp, WltpRpFixedT, Peap, PeapRp, Pspp, PsppRp };

inline constexpr PolicyKind kAllPolicies[] = {
    PolicyKind::Wltp, PolicyKind::WltpRp, PolicyKind::WltpRpFixedT, PolicyKind::Peap,
    PolicyKind::PeapRp, PolicyKind::Pspp, PolicyKind::PsppRp};

std::string_view policy_name(PolicyKind kind);
// Accepts the names returned by policy_name, case-insensitively.
PolicyKind parse_policy(std::string_view name);

// Which blocks the alternating loop is allowed to move.
struct FreeBlocks {
    bool t = true;
    bool pi = true;
    bool placement = true;
};

FreeBlocks free_blocks(PolicyKind kind);
bool uses_random_placement(PolicyKind kind);

struct OptimizerOptions {
    double tol = 1e-6;       // relative objective decrease that stops the outer loop
    int max_outer = 500;
    int max_inner = 500;     // projected-gradient iterations per pi step
    double inner_tol = 1e-8;
    std::uint64_t seed = 1;
    // Seed for *-RP placements; when unset a stream derived from `seed` is used.
    std::optional<std::uint64_t> placement_seed;
};

struct Solution {
    AccessMatrix pi;
    AuxVector t;
    std::vector<Placement> placement;
    std::vector<double> objective_trace;      // entry 0 is the initialized point
    std::vector<double> log_objective_trace;  // same trace, natural log
    int iterations = 0;
    bool converged = false;

    double objective() const { return objective_trace.back(); }
    double log_objective() const { return log_objective_trace.back(); }
};

// Per node, minimizes exp(-t x) E[exp(t Q)] over the feasible t interval by
// golden-section search. The objective is separable in t, so this is the exact
// t-block minimizer. With `current`, a node keeps its old t whenever the search
// does not improve on it.
AuxVector optimize_t(const AccessMatrix& pi, const SystemModel& model, double x);
AuxVector optimize_t(const AccessMatrix& pi, const AuxVector& current, const SystemModel& model,
                     double x);

// Projected gradient descent on the log objective with Armijo backtracking
// (step 1, shrink 0.5, slope 1e-4). Every iterate is feasible for the fixed t.
AccessMatrix optimize_pi(const AccessMatrix& pi, const AuxVector& t, const SystemModel& model,
                         double x, const OptimizerOptions& options = {});

// ||pi - P(pi - grad log f)||, the gradient-mapping norm at unit step.
double projected_gradient_norm(const AccessMatrix& pi, const AuxVector& t,
                               const SystemModel& model, double x);

// m x m matching costs for relocating file `file`'s access probabilities:
//   D[u][v] = lambda_i pi_iu exp(-t_v x) F_v(Lambda_v^{-i} + lambda_i pi_iu)
// where F_v is the sojourn MGF at node v. Entries whose shifted load breaks the
// stability margin at v get a finite penalty larger than any feasible matching.
CostMatrix placement_edge_weights(std::size_t file, const AccessMatrix& pi, const AuxVector& t,
                                  const SystemModel& model, double x);

struct PlacementResult {
    AccessMatrix pi;
    AuxVector t;
    std::vector<Placement> placement;
    std::size_t accepted = 0;  // files whose permutation was applied
};

// One randomized pass over the files. Each file's permutation comes from a
// minimum-cost matching and is kept only if the full objective does not grow.
// With `retune`, a destination node whose t cannot absorb the moved load is
// priced, and if the move is kept updated, at its best t for the new load;
// otherwise such moves are penalized and never applied.
PlacementResult optimize_placement(const AccessMatrix& pi, const AuxVector& t,
                                   const SystemModel& model, double x, Rng& rng,
                                   bool retune = false);

// Alternates t, pi and placement steps from `start` until the relative decrease
// falls below options.tol or options.max_outer iterations run.
Solution alternating_optimize(const SystemModel& model, const FeasibleStart& start,
                              FreeBlocks blocks, double x, const OptimizerOptions& options = {});

// Full joint optimization from nearest_feasible_init.
Solution alternating_optimize(const SystemModel& model, double x,
                              const OptimizerOptions& options = {});

// pi_ij = k_i mu_j / sum_{l in S_i} mu_l with mu the mean service rate.
AccessMatrix service_proportional_pattern(const SystemModel& model);

// Uniformly random n-subset of the nodes, drawn once per file group (and code
// length) and shared by the group's files, in order of first appearance.
std::vector<Placement> random_placement(const SystemModel& model, Rng& rng);

Solution baseline_policy(PolicyKind kind, const SystemModel& model, double x,
                         const OptimizerOptions& options = {});

}  // namespace ectail
