// ectail: optimize, simulate and sweep latency-tail bounds for erasure-coded storage.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ectail/errors.hpp"
#include "ectail/experiment.hpp"
#include "ectail/log.hpp"

namespace {

struct Common {
    std::string scenario;
    std::string builtin = "table1";
    std::vector<std::string> policies;
    std::vector<double> x_grid;
    std::vector<double> rate_mult;
    std::vector<int> files_per_group;
    std::uint64_t seed = 1;
    double tol = 1e-6;
    int max_iter = 500;
    int inner_iter = 500;
    double epsilon = 0.0;
    std::size_t requests = 100000;
    std::size_t replications = 1;
    int jobs = 1;
    std::string out;
    std::string trace;
    bool with_timing = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--scenario", c.scenario, "Scenario JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--builtin", c.builtin, "Builtin scenario")
        ->check(CLI::IsMember({"table1"}))
        ->capture_default_str();
    cmd->add_option("--policy", c.policies,
                    "Policy: WLTP, WLTP-RP, WLTP-RP-FixedT, PEAP, PEAP-RP, PSPP, PSPP-RP, all")
        ->take_all();
    cmd->add_option("--x-grid", c.x_grid, "Latency thresholds in seconds")->delimiter(',');
    cmd->add_option("--rate-mult", c.rate_mult, "Arrival-rate multipliers")->delimiter(',');
    cmd->add_option("--files-per-group", c.files_per_group, "Files per group overrides")
        ->delimiter(',');
    cmd->add_option("--seed", c.seed, "Base seed")->capture_default_str();
    cmd->add_option("--tol", c.tol, "Relative outer convergence tolerance")->capture_default_str();
    cmd->add_option("--max-iter", c.max_iter, "Outer iteration limit")->capture_default_str();
    cmd->add_option("--inner-iter", c.inner_iter, "Inner gradient iteration limit")
        ->capture_default_str();
    cmd->add_option("--epsilon", c.epsilon, "Stability margin relaxation (overrides scenario)");
    cmd->add_option("--jobs", c.jobs, "Sweep points evaluated concurrently")->capture_default_str();
    cmd->add_option("--out", c.out, "CSV output path (default stdout)");
    cmd->add_flag("--with-timing", c.with_timing, "Append a wall_time_s column");
}

ectail::ExperimentSpec make_spec(const Common& c) {
    ectail::ExperimentSpec spec;
    if (!c.scenario.empty()) spec.scenario_path = c.scenario;
    if (!c.policies.empty()) {
        spec.policies.clear();
        for (const auto& name : c.policies) {
            if (name == "all" || name == "ALL") {
                spec.policies.assign(std::begin(ectail::kAllPolicies), std::end(ectail::kAllPolicies));
            } else {
                spec.policies.push_back(ectail::parse_policy(name));
            }
        }
    }
    if (!c.x_grid.empty()) spec.x_grid = c.x_grid;
    if (!c.rate_mult.empty()) spec.rate_multipliers = c.rate_mult;
    spec.files_per_group = c.files_per_group;
    if (c.epsilon > 0.0) spec.epsilon = c.epsilon;
    spec.optimizer.tol = c.tol;
    spec.optimizer.max_outer = c.max_iter;
    spec.optimizer.max_inner = c.inner_iter;
    spec.optimizer.seed = c.seed;
    spec.sim.request_count = c.requests;
    spec.sim.replications = c.replications;
    spec.with_timing = c.with_timing;
    spec.jobs = c.jobs;
    return spec;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ectail::ConfigError("cannot open output file: " + path);
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latency-tail bounds and joint scheduling/placement for erasure-coded storage"};
    app.require_subcommand(1);

    Common opt, sim, sweep;
    auto* optimize_cmd = app.add_subcommand("optimize", "Optimize policies over an x grid");
    add_common(optimize_cmd, opt);

    auto* simulate_cmd =
        app.add_subcommand("simulate", "Optimize, then simulate and report empirical tails");
    add_common(simulate_cmd, sim);
    simulate_cmd->add_option("--requests", sim.requests, "Requests per replication")
        ->capture_default_str();
    simulate_cmd->add_option("--replications", sim.replications, "Independent replications")
        ->capture_default_str();
    simulate_cmd->add_option("--trace", sim.trace,
                             "Per-request trace CSV (first policy, first x)");

    auto* sweep_cmd =
        app.add_subcommand("sweep", "Sweep arrival-rate multipliers and files per group");
    add_common(sweep_cmd, sweep);

    CLI11_PARSE(app, argc, argv);

    try {
        if (optimize_cmd->parsed()) {
            write_output(opt.out, ectail::emit_csv(ectail::run_experiment(make_spec(opt))));
        } else if (simulate_cmd->parsed()) {
            auto spec = make_spec(sim);
            spec.simulate = true;
            const auto rows = ectail::run_experiment(spec);
            write_output(sim.out, ectail::emit_csv(rows));
            if (!sim.trace.empty()) {
                // Re-run the first point with tracing enabled.
                spec.policies.resize(1);
                spec.x_grid.resize(1);
                spec.rate_multipliers.resize(1);
                if (!spec.files_per_group.empty()) spec.files_per_group.resize(1);
                const auto result = ectail::simulate_first_point(spec);
                std::ofstream trace(sim.trace, std::ios::binary);
                if (!trace) throw ectail::ConfigError("cannot open trace file: " + sim.trace);
                ectail::write_trace(result, trace);
            }
        } else if (sweep_cmd->parsed()) {
            auto spec = make_spec(sweep);
            if (sweep.x_grid.empty()) spec.x_grid = {50.0};
            if (sweep.rate_mult.empty()) spec.rate_multipliers = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4};
            write_output(sweep.out, ectail::emit_csv(ectail::run_experiment(spec)));
        }
    } catch (const std::exception& e) {
        std::cerr << "ectail: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
