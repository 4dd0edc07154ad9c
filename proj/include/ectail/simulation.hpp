#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ectail/model.hpp"
#include "ectail/random.hpp"

namespace ectail {

// Madow systematic sampling: returns exactly k distinct node indices, node j
// included with probability pi_row[j]. Throws ConfigError when the row does not
// sum to k or leaves [0, 1].
std::vector<std::size_t> sample_access_set(std::span<const double> pi_row, int k, Rng& rng);

struct SimConfig {
    std::size_t request_count = 100000;  // file requests per replication
    double warmup = 0.1;                 // leading fraction of requests discarded
    std::uint64_t seed = 1;
    std::size_t replications = 1;
    bool keep_trace = false;
};

struct TraceRecord {
    std::size_t file = 0;
    double arrival_time = 0.0;  // s
    double latency = 0.0;       // s
};

struct SimResult {
    std::vector<std::vector<double>> latencies;  // per file, seconds
    std::vector<double> utilization;             // busy fraction per node
    std::vector<double> mean_queue_delay;        // waiting before service, s
    std::vector<double> mean_sojourn;            // per chunk at the node, s
    std::vector<double> mean_in_node;            // time-average number present
    std::vector<double> chunk_arrival_rate;      // observed per node, 1/s
    std::vector<TraceRecord> trace;              // only with keep_trace
    bool unstable = false;                       // some rho_j >= 1
};

// Event-driven fork-join simulation: Poisson file arrivals, k-of-n access sets
// drawn by sample_access_set, FCFS shifted-exponential service per node. File
// latency is the last chunk completion minus the request arrival. Replications
// use derived seeds, run concurrently and are pooled in replication order.
SimResult run_simulation(const SystemModel& model, const AccessMatrix& pi, const SimConfig& config);

struct TailEstimate {
    double x = 0.0;
    double probability = 0.0;
    double half_width = 0.0;  // 99% normal-approximation interval
};

// Per file, for each x: fraction of latencies >= x. Throws InsufficientSamples
// when a file has fewer than 100 samples.
std::vector<std::vector<TailEstimate>> empirical_tail(const SimResult& result,
                                                      std::span<const double> x_grid);

// Tail estimate for one sample set.
std::vector<TailEstimate> empirical_tail(std::span<const double> samples,
                                         std::span<const double> x_grid);

// Writes "file_id,arrival_time_s,latency_s" records.
void write_trace(const SimResult& result, std::ostream& out);

}  // namespace ectail
