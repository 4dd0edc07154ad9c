#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ectail/model.hpp"
#include "ectail/optimizer.hpp"
#include "ectail/simulation.hpp"

namespace ectail {

// Twelve heterogeneous nodes, (7,4) code, four equal file groups with base
// rates 2, 4, 6 and 3 per 150 s placed on nodes 1-7, 2-8, 4-10 and 6-12
// (0-based in the returned scenario).
RawScenario table1_raw_scenario(int files_per_group = 250, double rate_multiplier = 1.0);
SystemModel builtin_table1_scenario(int files_per_group = 250, double rate_multiplier = 1.0);

inline constexpr int kDeskFilesPerGroup = 5;

// Applies a sweep point to a raw scenario: every group's count becomes
// files_per_group (when > 0) and every rate is multiplied.
RawScenario scale_scenario(RawScenario raw, int files_per_group, double rate_multiplier);

struct ExperimentSpec {
    std::optional<std::string> scenario_path;  // otherwise the builtin table1 scenario
    std::vector<PolicyKind> policies{PolicyKind::Wltp};
    std::vector<double> x_grid{20, 30, 40, 50, 60, 70};
    std::vector<double> rate_multipliers{1.0};
    std::vector<int> files_per_group;  // empty: builtin uses kDeskFilesPerGroup, files use as-is
    std::optional<double> epsilon;
    OptimizerOptions optimizer;
    bool simulate = false;
    SimConfig sim;
    bool with_timing = false;  // timing column breaks byte-for-byte reproducibility
    int jobs = 1;
};

// Throws ConfigError for an empty or non-increasing x grid, nonpositive
// multipliers or an empty policy list.
void validate_spec(const ExperimentSpec& spec);

struct ResultRow {
    std::string policy;
    double rate_multiplier = 1.0;
    int files_per_group = 0;  // 0 when the scenario's own counts are used
    std::size_t file_count = 0;
    double x = 0.0;
    double objective = 0.0;
    double log_objective = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> file_bounds;
    std::vector<double> sim_tail;        // empty unless simulated
    std::vector<double> sim_half_width;
    std::optional<double> wall_time_s;

    bool operator==(const ResultRow&) const = default;
};

// Runs every (rate multiplier, files per group) point, policy and x. Rows are
// ordered by point, then policy, then x. Point p uses seed optimizer.seed + p.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

// Optimizes the first policy at the first x and sweep point, then simulates it
// with the per-request trace kept.
SimResult simulate_first_point(const ExperimentSpec& spec);

// CSV with header
//   policy,rate_multiplier,files_per_group,file_count,x,objective,log_objective,
//   iterations,converged,file_bounds,sim_tail,sim_half_width[,wall_time_s]
// List-valued fields are ';'-separated. Reals use 17 significant digits.
std::string emit_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(const std::string& text);

}  // namespace ectail
