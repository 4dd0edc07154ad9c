#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "ectail/bounds.hpp"
#include "ectail/optimizer.hpp"
#include "ectail/simulation.hpp"
#include "oracles/madow.hpp"
#include "oracles/stats.hpp"
#include "support.hpp"

using namespace ectail;
namespace ts = testing_support;

namespace {

SystemModel single_node(double alpha, double beta_ms, double rate) {
    RawScenario raw;
    raw.nodes.push_back({alpha, beta_ms});
    RawFileGroup g;
    g.lambda_per_sec = rate;
    g.placement = {0};
    raw.groups.push_back(g);
    return validate_system(raw);
}

}  // namespace

TEST_CASE("sampling degenerate rows") {
    Rng rng(1);
    const std::vector<double> indicator{0.0, 1.0, 0.0, 1.0, 1.0};
    for (int q = 0; q < 100; ++q)
        CHECK(sample_access_set(indicator, 3, rng) == std::vector<std::size_t>{1, 3, 4});
    const std::vector<double> full{1.0, 1.0};
    CHECK(sample_access_set(full, 2, rng) == std::vector<std::size_t>{0, 1});
    const std::vector<double> bad{0.5, 0.4};
    CHECK_THROWS_AS(sample_access_set(bad, 1, rng), ConfigError);
    const std::vector<double> box{1.5, -0.5};
    CHECK_THROWS_AS(sample_access_set(box, 1, rng), ConfigError);
}

TEST_CASE("sampling frequencies on a small row") {
    Rng rng(2);
    const std::vector<double> pi{0.5, 0.5, 1.0};
    const int draws = 100000;
    int count[3] = {0, 0, 0};
    for (int q = 0; q < draws; ++q) {
        const auto set = sample_access_set(pi, 2, rng);
        REQUIRE(set.size() == 2);
        for (std::size_t j : set) ++count[j];
    }
    CHECK(count[2] == draws);
    const double sigma = std::sqrt(draws * 0.25);
    CHECK(std::abs(count[0] - draws * 0.5) < 3 * sigma);
    CHECK(std::abs(count[1] - draws * 0.5) < 3 * sigma);
}

TEST_CASE("sampling matches the exact systematic design") {
    Rng rng(3);
    Rng draw_rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = ts::uniform_int(rng, 3, 8);
        const int k = ts::uniform_int(rng, 1, n - 1);
        std::vector<double> u(n);
        for (double& x : u) x = ts::uniform(rng, -1.0, 1.0);
        const auto pi = project_capped_simplex(u, k);

        const auto exact = oracle::madow_set_probabilities(pi);
        std::map<oracle::SampleSet, double> seen;
        std::vector<double> inclusion(n, 0.0);
        const int draws = 100000;
        for (int q = 0; q < draws; ++q) {
            const auto set = sample_access_set(pi, k, draw_rng);
            REQUIRE(static_cast<int>(std::set<std::size_t>(set.begin(), set.end()).size()) == k);
            seen[set] += 1.0;
            for (std::size_t j : set) inclusion[j] += 1.0;
        }
        std::vector<double> observed, expected;
        for (const auto& [set, p] : exact) {
            observed.push_back(seen.count(set) ? seen[set] : 0.0);
            expected.push_back(p * draws);
            seen.erase(set);
        }
        CHECK(seen.empty());  // no set outside the design's support
        CHECK(oracle::pearson_p(observed, expected) > 0.01);

        // Per-node inclusion counts are binomial(draws, pi_j); each statistic is
        // chi-square with one degree of freedom. Bonferroni over the nodes.
        for (int j = 0; j < n; ++j) {
            if (pi[j] <= 0.0 || pi[j] >= 1.0) {
                CHECK(inclusion[j] == pi[j] * draws);
                continue;
            }
            const double e = pi[j] * draws;
            const double stat = (inclusion[j] - e) * (inclusion[j] - e) / (e * (1.0 - pi[j]));
            CHECK(oracle::chi_square_p(stat, 1.0) > 0.01 / n);
        }
    }
}

TEST_CASE("light traffic latency is the service mean") {
    const auto model = single_node(20.0, 10.0, 0.01);
    SimConfig cfg;
    cfg.request_count = 100000;
    cfg.seed = 4;
    const auto res = run_simulation(model, AccessMatrix(1, 1, 1.0), cfg);
    const auto est = oracle::batch_means(res.latencies[0], 50);
    CHECK(std::abs(est.mean - mean_sojourn(0.01, model.nodes[0])) < 3 * est.sigma);
    CHECK(std::abs(est.mean - 0.06) < 1e-3);
}

TEST_CASE("M/G/1 mean sojourn, utilization and Little's law") {
    const auto model = single_node(20.0, 10.0, 5.0);
    SimConfig cfg;
    cfg.request_count = 400000;
    cfg.seed = 5;
    const auto res = run_simulation(model, AccessMatrix(1, 1, 1.0), cfg);
    const auto est = oracle::batch_means(res.latencies[0], 100);
    const double pk = 0.06 + 5.0 * 0.0061 / (2.0 * 0.7);
    CHECK(std::abs(est.mean - pk) < 3 * est.sigma);
    CHECK(std::abs(res.utilization[0] - 0.3) < 0.01 * 0.3);
    CHECK(std::abs(res.mean_in_node[0] - 5.0 * res.mean_sojourn[0]) < 0.02 * res.mean_in_node[0]);
    CHECK(res.mean_sojourn[0] == doctest::Approx(est.mean).epsilon(1e-9));
}

TEST_CASE("multi-node utilization and Little's law") {
    Rng rng(6);
    const auto model = ts::random_model(rng, 6, 3, 0.6);
    const auto start = nearest_feasible_init(model);
    SimConfig cfg;
    // Utilization estimates scatter by about 0.5% at 3e5 requests, so run long
    // enough that the 1% band is well outside the noise.
    cfg.request_count = 1500000;
    cfg.seed = 7;
    const auto res = run_simulation(model, start.pi, cfg);
    const auto loads = aggregate_arrival(start.pi, model.files);
    for (std::size_t j = 0; j < 6; ++j) {
        if (loads[j] == 0.0) continue;
        const double rho = traffic_intensity(loads[j], model.nodes[j]).rho;
        CHECK(std::abs(res.utilization[j] - rho) < 0.01 * rho);
        CHECK(std::abs(res.mean_in_node[j] - loads[j] * res.mean_sojourn[j]) < 0.02 * res.mean_in_node[j]);
    }
}

TEST_CASE("two-node file tail stays below the bound") {
    RawScenario raw;
    raw.nodes.push_back({20.0, 10.0});
    raw.nodes.push_back({12.0, 20.0});
    RawFileGroup g;
    g.lambda_per_sec = 9.0;
    g.n = 2;
    g.placement = {0, 1};
    raw.groups.push_back(g);
    const auto model = validate_system(raw);
    AccessMatrix pi(1, 2);
    pi(0, 0) = 0.6;
    pi(0, 1) = 0.4;
    SimConfig cfg;
    cfg.request_count = 1000000;
    cfg.seed = 8;
    const auto res = run_simulation(model, pi, cfg);
    const double grid[] = {0.1, 0.2, 0.5, 1.0, 2.0};
    const auto tails = empirical_tail(res, grid);
    const double n = static_cast<double>(res.latencies[0].size());
    for (std::size_t q = 0; q < 5; ++q) {
        const double x = grid[q];
        const auto t = optimize_t(pi, model, x);
        const double bound = file_tail_bound(model, pi, t, 0, x);
        const double p = tails[0][q].probability;
        CHECK(p - 3.0 * std::sqrt(p * (1 - p) / n) <= bound);

        std::vector<double> s{3.0, 3.0};
        CHECK(p - 3.0 * std::sqrt(p * (1 - p) / n) <= lst_tail_bound(model, pi, 0, s, x));
    }
    CHECK(tails[0][0].probability > 0.01);  // the check is not vacuous at small x
}

TEST_CASE("simulation is deterministic") {
    Rng rng(9);
    const auto model = ts::random_model(rng, 5, 3, 0.5);
    const auto start = nearest_feasible_init(model);
    SimConfig cfg;
    cfg.request_count = 20000;
    cfg.replications = 3;
    cfg.seed = 10;
    cfg.keep_trace = true;
    const auto a = run_simulation(model, start.pi, cfg);
    const auto b = run_simulation(model, start.pi, cfg);
    CHECK(a.latencies == b.latencies);
    CHECK(a.utilization == b.utilization);
    CHECK(a.mean_sojourn == b.mean_sojourn);
    CHECK(a.trace.size() == b.trace.size());
    std::ostringstream sa, sb;
    write_trace(a, sa);
    write_trace(b, sb);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().rfind("file_id,arrival_time_s,latency_s\n", 0) == 0);

    cfg.seed = 11;
    CHECK(run_simulation(model, start.pi, cfg).latencies != a.latencies);
}

TEST_CASE("empirical tail estimator") {
    std::vector<double> small(200, 0.5);
    const double g1[] = {0.0, 0.6};
    const auto t1 = empirical_tail(small, g1);
    CHECK(t1[0].probability == 1.0);
    CHECK(t1[1].probability == 0.0);
    CHECK(t1[1].half_width == 0.0);

    Rng rng(12);
    std::vector<double> expo(100000);
    for (double& v : expo) v = exponential(rng, 2.0);
    const double g2[] = {0.25, 0.5, 1.0, 2.0};
    for (const auto& est : empirical_tail(expo, g2)) {
        const double sigma = std::sqrt(est.probability * (1 - est.probability) / 100000.0);
        CHECK(est.half_width == doctest::Approx(2.5758 * sigma).epsilon(1e-3));
        CHECK(std::abs(est.probability - std::exp(-2.0 * est.x)) <= 3.0 * sigma);
    }

    std::vector<double> few(50, 1.0);
    CHECK_THROWS_AS(empirical_tail(few, g2), InsufficientSamples);
}

TEST_CASE("configuration errors") {
    const auto model = single_node(20.0, 10.0, 1.0);
    SimConfig cfg;
    cfg.warmup = 0.5;
    CHECK_THROWS_AS(run_simulation(model, AccessMatrix(1, 1, 1.0), cfg), ConfigError);
    cfg.warmup = 0.1;
    CHECK_THROWS_AS(run_simulation(model, AccessMatrix(1, 1, 0.5), cfg), ConfigError);
}
