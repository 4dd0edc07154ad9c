#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ectail/errors.hpp"

namespace ectail {

// Shifted-exponential chunk service time: shift_beta + Exp(rate_alpha).
// Both fields are in SI units (1/s and s).
struct NodeParams {
    double rate_alpha = 1.0;
    double shift_beta = 0.0;

    double mean_service() const { return 1.0 / rate_alpha + shift_beta; }
    double second_moment() const {
        const double m = mean_service();
        return 1.0 / (rate_alpha * rate_alpha) + m * m;
    }
    // Mean service rate 1 / E[X].
    double service_rate() const { return 1.0 / mean_service(); }
};

using Placement = std::vector<std::size_t>;

struct FileClass {
    int code_n = 1;
    int code_k = 1;
    double arrival_rate = 0.0;  // requests/s
    double weight = 0.0;        // normalized over all files
    Placement placement;        // sorted node indices, size code_n
    std::size_t group = 0;      // index of the scenario file group it came from
};

// Dense r x m matrix of access probabilities.
class AccessMatrix {
public:
    AccessMatrix() = default;
    AccessMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }

    bool operator==(const AccessMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Per-node Markov/Chernoff exponents t_j in 1/s.
struct AuxVector {
    std::vector<double> t;

    AuxVector() = default;
    explicit AuxVector(std::vector<double> values) : t(std::move(values)) {}
    AuxVector(std::size_t m, double fill) : t(m, fill) {}

    std::size_t size() const { return t.size(); }
    double operator[](std::size_t j) const { return t[j]; }
    double& operator[](std::size_t j) { return t[j]; }

    bool operator==(const AuxVector&) const = default;
};

inline constexpr double kDefaultEpsilon = 1e-6;
inline constexpr double kRowSumTolerance = 1e-9;

struct SystemModel {
    std::vector<NodeParams> nodes;
    std::vector<FileClass> files;
    double epsilon = kDefaultEpsilon;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t file_count() const { return files.size(); }
    double total_arrival_rate() const;
    // Sum over files of lambda_i * k_i.
    double total_chunk_rate() const;
    std::vector<Placement> placements() const;
};

// Returns a copy of the model with file placements replaced.
SystemModel with_placements(const SystemModel& model, const std::vector<Placement>& placements);

// ---------------------------------------------------------------------------
// Scenario ingestion

struct RawNode {
    double alpha_per_sec = 0.0;
    double beta_ms = 0.0;
};

struct RawFileGroup {
    int count = 1;
    double lambda_per_sec = 0.0;
    int n = 1;
    int k = 1;
    std::vector<long long> placement;
    std::optional<double> weight;  // per-file weight before normalization
};

struct RawScenario {
    std::vector<RawNode> nodes;
    std::vector<RawFileGroup> groups;
    double epsilon = kDefaultEpsilon;
};

RawScenario parse_scenario(const std::string& json_text);
RawScenario load_scenario(const std::string& path);
std::string scenario_to_json(const RawScenario& raw);

// Checks every invariant, converts beta from ms to s and expands groups into
// files. Weights are lambda_i / sum(lambda) unless every group sets `weight`.
SystemModel validate_system(const RawScenario& raw);

// Throws ConfigError when pi is not a valid access matrix for the model.
void check_access_matrix(const SystemModel& model, const AccessMatrix& pi,
                         double tolerance = kRowSumTolerance);

// Lambda_j = sum_i lambda_i pi_ij.
std::vector<double> aggregate_arrival(const AccessMatrix& pi, const std::vector<FileClass>& files);

struct Intensity {
    double rho = 0.0;
    bool unstable = false;
};

// rho_j = Lambda_j (1/alpha_j + beta_j).
Intensity traffic_intensity(double load, const NodeParams& node);

}  // namespace ectail
