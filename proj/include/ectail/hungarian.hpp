#pragma once

#include <cstddef>
#include <vector>

namespace ectail {

// Square cost matrix, row-major.
class CostMatrix {
public:
    explicit CostMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

    std::size_t size() const { return n_; }
    double& operator()(std::size_t u, std::size_t v) { return data_[u * n_ + v]; }
    double operator()(std::size_t u, std::size_t v) const { return data_[u * n_ + v]; }

private:
    std::size_t n_;
    std::vector<double> data_;
};

struct Assignment {
    std::vector<std::size_t> target;  // row u is matched to column target[u]
    double cost = 0.0;
};

// Minimum-cost perfect matching (Kuhn-Munkres with potentials, O(n^3)).
// Ties resolve to the lowest column index, so the result is deterministic.
Assignment hungarian(const CostMatrix& cost);

}  // namespace ectail
