#include <doctest.h>

#include <algorithm>
#include <vector>

#include "ectail/hungarian.hpp"
#include "oracles/brute_force.hpp"
#include "support.hpp"

using namespace ectail;
namespace ts = testing_support;

namespace {

CostMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
    CostMatrix c(rows.size());
    for (std::size_t u = 0; u < rows.size(); ++u)
        for (std::size_t v = 0; v < rows.size(); ++v) c(u, v) = rows[u][v];
    return c;
}

bool is_permutation(std::vector<std::size_t> p) {
    std::sort(p.begin(), p.end());
    for (std::size_t q = 0; q < p.size(); ++q)
        if (p[q] != q) return false;
    return true;
}

}  // namespace

TEST_CASE("small fixed matrices") {
    const auto a = hungarian(to_matrix({{1, 2}, {2, 1}}));
    CHECK(a.target == std::vector<std::size_t>{0, 1});
    CHECK(a.cost == 2.0);

    const auto b = hungarian(to_matrix({{3, 3, 3}, {3, 3, 3}, {3, 3, 3}}));
    CHECK(b.cost == 9.0);
    CHECK(is_permutation(b.target));

    const auto c = hungarian(to_matrix({{7}}));
    CHECK(c.target == std::vector<std::size_t>{0});
    CHECK(c.cost == 7.0);

    const auto d = hungarian(to_matrix({{4, 1, 3}, {2, 0, 5}, {3, 2, 2}}));
    CHECK(d.cost == 5.0);
}

TEST_CASE("matches brute force on random matrices") {
    Rng rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = ts::uniform_int(rng, 1, 7);
        std::vector<std::vector<double>> rows(n, std::vector<double>(n));
        const bool integer = trial % 3 == 0;  // integer costs produce many ties
        for (auto& row : rows)
            for (double& v : row)
                v = integer ? static_cast<double>(ts::uniform_int(rng, 0, 4)) : ts::uniform(rng, -5.0, 5.0);
        const auto a = hungarian(to_matrix(rows));
        REQUIRE(is_permutation(a.target));
        double recomputed = 0.0;
        for (int u = 0; u < n; ++u) recomputed += rows[u][a.target[u]];
        CHECK(a.cost == doctest::Approx(recomputed).epsilon(1e-12));
        CHECK(a.cost == doctest::Approx(oracle::min_assignment_cost(rows)).epsilon(1e-12));
    }
}

TEST_CASE("deterministic under repetition") {
    Rng rng(5);
    CostMatrix c(6);
    for (std::size_t u = 0; u < 6; ++u)
        for (std::size_t v = 0; v < 6; ++v) c(u, v) = static_cast<double>(ts::uniform_int(rng, 0, 2));
    const auto first = hungarian(c);
    for (int q = 0; q < 5; ++q) CHECK(hungarian(c).target == first.target);
}
