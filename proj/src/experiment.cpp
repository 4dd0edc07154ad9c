#include "ectail/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <limits>
#include <sstream>

#include "ectail/bounds.hpp"
#include "ectail/log.hpp"

namespace ectail {

RawScenario table1_raw_scenario(int files_per_group, double rate_multiplier) {
    static constexpr double kAlpha[12] = {20.0015, 26.1252, 14.9850, 17.0526, 27.1422, 22.8919,
                                          30.0000, 21.3812, 11.9106, 25.1599, 28.8188, 23.8067};
    static constexpr double kBetaMs[12] = {10.5368, 15.6018, 8.2756,  10.0120, 12.8544, 13.6722,
                                           12.6616, 9.9156,  10.7872, 8.6166,  13.8721, 10.8964};
    static constexpr double kRate[4] = {2.0 / 150.0, 4.0 / 150.0, 6.0 / 150.0, 3.0 / 150.0};
    static constexpr long long kFirstNode[4] = {0, 1, 3, 5};

    RawScenario raw;
    for (int j = 0; j < 12; ++j) raw.nodes.push_back({kAlpha[j], kBetaMs[j]});
    for (int g = 0; g < 4; ++g) {
        RawFileGroup group;
        group.count = files_per_group;
        group.lambda_per_sec = kRate[g] * rate_multiplier;
        group.n = 7;
        group.k = 4;
        for (long long j = 0; j < 7; ++j) group.placement.push_back(kFirstNode[g] + j);
        raw.groups.push_back(std::move(group));
    }
    return raw;
}

SystemModel builtin_table1_scenario(int files_per_group, double rate_multiplier) {
    return validate_system(table1_raw_scenario(files_per_group, rate_multiplier));
}

RawScenario scale_scenario(RawScenario raw, int files_per_group, double rate_multiplier) {
    for (auto& g : raw.groups) {
        if (files_per_group > 0) g.count = files_per_group;
        g.lambda_per_sec *= rate_multiplier;
    }
    return raw;
}

void validate_spec(const ExperimentSpec& spec) {
    if (spec.policies.empty()) throw ConfigError("no policies requested");
    if (spec.x_grid.empty()) throw ConfigError("x grid is empty");
    for (std::size_t i = 0; i < spec.x_grid.size(); ++i) {
        if (!(spec.x_grid[i] > 0.0)) throw ConfigError("x grid values must be positive");
        if (i > 0 && !(spec.x_grid[i] > spec.x_grid[i - 1]))
            throw ConfigError("x grid must be strictly increasing");
    }
    if (spec.rate_multipliers.empty()) throw ConfigError("no rate multipliers");
    for (double mult : spec.rate_multipliers)
        if (!(mult > 0.0)) throw ConfigError("rate multipliers must be positive");
    for (int f : spec.files_per_group)
        if (f < 1) throw ConfigError("files per group must be at least 1");
}

namespace {

struct SweepPoint {
    double rate_multiplier;
    int files_per_group;
};

SystemModel point_model(const ExperimentSpec& spec, const RawScenario& base,
                        const SweepPoint& point) {
    RawScenario raw = scale_scenario(base, point.files_per_group, point.rate_multiplier);
    if (spec.epsilon) raw.epsilon = *spec.epsilon;
    return validate_system(raw);
}

RawScenario base_scenario(const ExperimentSpec& spec) {
    return spec.scenario_path ? load_scenario(*spec.scenario_path) : table1_raw_scenario();
}

int default_count(const ExperimentSpec& spec) {
    return spec.scenario_path ? 0 : kDeskFilesPerGroup;
}

std::vector<ResultRow> run_point(const ExperimentSpec& spec, const RawScenario& base,
                                 const SweepPoint& point, std::uint64_t seed) {
    const SystemModel model = point_model(spec, base, point);

    OptimizerOptions options = spec.optimizer;
    options.seed = seed;
    // Random placements are shared by all sweep points so that trends compare
    // like with like.
    if (!options.placement_seed) options.placement_seed = derive_seed(spec.optimizer.seed, 0);

    std::vector<ResultRow> rows;
    std::uint64_t sim_stream = 0;
    for (PolicyKind kind : spec.policies) {
        for (double x : spec.x_grid) {
            std::ostringstream where;
            where << "policy=" << policy_name(kind) << " rate_multiplier=" << point.rate_multiplier
                  << " files_per_group=" << point.files_per_group << " x=" << x;
            try {
                const auto started = std::chrono::steady_clock::now();
                const Solution sol = baseline_policy(kind, model, x, options);
                const auto elapsed = std::chrono::steady_clock::now() - started;

                const SystemModel placed = with_placements(model, sol.placement);
                ResultRow row;
                row.policy = std::string(policy_name(kind));
                row.rate_multiplier = point.rate_multiplier;
                row.files_per_group = point.files_per_group;
                row.file_count = model.file_count();
                row.x = x;
                row.objective = sol.objective();
                row.log_objective = sol.log_objective();
                row.iterations = sol.iterations;
                row.converged = sol.converged;
                for (std::size_t i = 0; i < placed.file_count(); ++i)
                    row.file_bounds.push_back(file_tail_bound(placed, sol.pi, sol.t, i, x));
                if (spec.simulate) {
                    SimConfig sim = spec.sim;
                    sim.seed = derive_seed(seed, sim_stream);
                    const auto result = run_simulation(placed, sol.pi, sim);
                    const double grid[] = {x};
                    for (const auto& file_tail : empirical_tail(result, grid)) {
                        row.sim_tail.push_back(file_tail[0].probability);
                        row.sim_half_width.push_back(file_tail[0].half_width);
                    }
                }
                ++sim_stream;
                if (spec.with_timing)
                    row.wall_time_s = std::chrono::duration<double>(elapsed).count();
                log(LogLevel::Info, where.str() + " log_objective=" +
                                        std::to_string(row.log_objective) +
                                        " iterations=" + std::to_string(row.iterations));
                rows.push_back(std::move(row));
            } catch (const Error& e) {
                throw Error(where.str() + ": " + e.what());
            }
        }
    }
    return rows;
}

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_real(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw ConfigError("malformed number in CSV: " + s);
    return v;
}

std::string join(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ';';
        out += format_real(values[i]);
    }
    return out;
}

std::vector<double> split_reals(const std::string& field) {
    std::vector<double> out;
    if (field.empty()) return out;
    std::stringstream ss(field);
    std::string item;
    while (std::getline(ss, item, ';')) out.push_back(parse_real(item));
    return out;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

constexpr const char* kHeader =
    "policy,rate_multiplier,files_per_group,file_count,x,objective,log_objective,iterations,"
    "converged,file_bounds,sim_tail,sim_half_width";

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
    validate_spec(spec);
    const RawScenario base = base_scenario(spec);

    std::vector<int> counts = spec.files_per_group;
    if (counts.empty()) counts.push_back(default_count(spec));
    std::vector<SweepPoint> points;
    for (double mult : spec.rate_multipliers)
        for (int count : counts) points.push_back({mult, count});

    std::vector<std::vector<ResultRow>> per_point(points.size());
    const std::size_t width = static_cast<std::size_t>(std::max(1, spec.jobs));
    for (std::size_t first = 0; first < points.size(); first += width) {
        std::vector<std::future<std::vector<ResultRow>>> batch;
        for (std::size_t p = first; p < std::min(points.size(), first + width); ++p) {
            const std::uint64_t seed = spec.optimizer.seed + p;
            batch.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred,
                                       [&spec, &base, point = points[p], seed] {
                                           return run_point(spec, base, point, seed);
                                       }));
        }
        for (std::size_t b = 0; b < batch.size(); ++b) per_point[first + b] = batch[b].get();
    }

    std::vector<ResultRow> rows;
    for (auto& chunk : per_point)
        for (auto& row : chunk) rows.push_back(std::move(row));
    return rows;
}

SimResult simulate_first_point(const ExperimentSpec& spec) {
    validate_spec(spec);
    const SweepPoint point{spec.rate_multipliers.front(),
                           spec.files_per_group.empty() ? default_count(spec)
                                                        : spec.files_per_group.front()};
    const SystemModel model = point_model(spec, base_scenario(spec), point);
    OptimizerOptions options = spec.optimizer;
    const Solution sol = baseline_policy(spec.policies.front(), model, spec.x_grid.front(), options);
    SimConfig sim = spec.sim;
    sim.seed = derive_seed(options.seed, 0);
    sim.keep_trace = true;
    return run_simulation(with_placements(model, sol.placement), sol.pi, sim);
}

std::string emit_csv(const std::vector<ResultRow>& rows) {
    const bool timing = !rows.empty() && rows.front().wall_time_s.has_value();
    std::string out = kHeader;
    if (timing) out += ",wall_time_s";
    out += '\n';
    for (const auto& row : rows) {
        out += row.policy + ',' + format_real(row.rate_multiplier) + ',' +
               std::to_string(row.files_per_group) + ',' + std::to_string(row.file_count) + ',' +
               format_real(row.x) + ',' + format_real(row.objective) + ',' +
               format_real(row.log_objective) + ',' + std::to_string(row.iterations) + ',' +
               (row.converged ? "1" : "0") + ',' + join(row.file_bounds) + ',' +
               join(row.sim_tail) + ',' + join(row.sim_half_width);
        if (timing) out += ',' + format_real(row.wall_time_s.value_or(0.0));
        out += '\n';
    }
    return out;
}

std::vector<ResultRow> parse_csv(const std::string& text) {
    std::stringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty CSV");
    const bool timing = line == std::string(kHeader) + ",wall_time_s";
    if (!timing && line != kHeader) throw ConfigError("unexpected CSV header: " + line);
    const std::size_t expected = timing ? 13 : 12;

    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != expected) throw ConfigError("CSV row has wrong field count: " + line);
        ResultRow row;
        row.policy = f[0];
        row.rate_multiplier = parse_real(f[1]);
        row.files_per_group = std::stoi(f[2]);
        row.file_count = std::stoul(f[3]);
        row.x = parse_real(f[4]);
        row.objective = parse_real(f[5]);
        row.log_objective = parse_real(f[6]);
        row.iterations = std::stoi(f[7]);
        row.converged = f[8] == "1";
        row.file_bounds = split_reals(f[9]);
        row.sim_tail = split_reals(f[10]);
        row.sim_half_width = split_reals(f[11]);
        if (timing) row.wall_time_s = parse_real(f[12]);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace ectail
