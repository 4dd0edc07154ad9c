#include "ectail/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <ostream>
#include <queue>
#include <string>

#include "ectail/log.hpp"

namespace ectail {

std::vector<std::size_t> sample_access_set(std::span<const double> pi_row, int k, Rng& rng) {
    double sum = 0.0;
    for (double p : pi_row) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("access probability outside [0,1]");
        sum += p;
    }
    if (std::abs(sum - k) > kRowSumTolerance * std::max(1, k))
        throw ConfigError("access row sums to " + std::to_string(sum) + ", expected " +
                          std::to_string(k));

    // Points U, U+1, ..., U+k-1 on the cumulative scale; an item of width <= 1
    // can hold at most one of them.
    const double u = uniform01(rng);
    std::vector<std::size_t> chosen;
    chosen.reserve(static_cast<std::size_t>(k));
    std::size_t j = 0;
    double upper = 0.0;  // cumulative sum through item j - 1
    std::size_t last_positive = pi_row.size();
    for (std::size_t l = 0; l < pi_row.size(); ++l)
        if (pi_row[l] > 0.0) last_positive = l;

    for (int h = 0; h < k; ++h) {
        const double point = u + h;
        while (j < pi_row.size() && upper + pi_row[j] <= point) {
            upper += pi_row[j];
            ++j;
        }
        std::size_t pick = j < pi_row.size() ? j : last_positive;
        if (!chosen.empty() && pick <= chosen.back()) {
            // Rounding at an item boundary: take the next item with mass.
            pick = chosen.back() + 1;
            while (pick < pi_row.size() && pi_row[pick] <= 0.0) ++pick;
            if (pick >= pi_row.size()) throw ConfigError("access row cannot supply k items");
        }
        chosen.push_back(pick);
    }
    return chosen;
}

namespace {

struct Event {
    double time;
    int kind;  // 0 = service completion, 1 = arrival; completions go first on ties
    std::size_t node;
    std::uint64_t seq;
};

struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.kind != b.kind) return a.kind > b.kind;
        if (a.node != b.node) return a.node > b.node;
        return a.seq > b.seq;
    }
};

struct Chunk {
    std::size_t request;
    double arrival;
};

struct Request {
    std::size_t file;
    double arrival;
    int outstanding;
};

struct Replication {
    std::vector<std::vector<double>> latencies;
    std::vector<TraceRecord> trace;
    std::vector<double> busy_time, area, wait_sum, sojourn_sum;
    std::vector<std::size_t> chunk_count, window_chunks;
    double window = 0.0;
};

double service_time(const NodeParams& node, Rng& rng) {
    return node.shift_beta + exponential(rng, node.rate_alpha);
}

Replication simulate_once(const SystemModel& model, const AccessMatrix& pi,
                          const SimConfig& config, std::uint64_t seed) {
    const std::size_t m = model.node_count();
    const std::size_t r = model.file_count();
    const std::size_t total = config.request_count;
    const auto warm = static_cast<std::size_t>(std::floor(config.warmup * total));
    Rng rng(seed);

    std::vector<double> cumulative(r);
    double rate = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        rate += model.files[i].arrival_rate;
        cumulative[i] = rate;
    }

    Replication rep;
    rep.latencies.resize(r);
    rep.busy_time.assign(m, 0.0);
    rep.area.assign(m, 0.0);
    rep.wait_sum.assign(m, 0.0);
    rep.sojourn_sum.assign(m, 0.0);
    rep.chunk_count.assign(m, 0);
    rep.window_chunks.assign(m, 0);

    std::vector<std::deque<Chunk>> queues(m);
    std::vector<Request> requests;
    requests.reserve(total);
    std::priority_queue<Event, std::vector<Event>, EventLater> events;
    std::uint64_t seq = 0;

    constexpr double kNever = std::numeric_limits<double>::infinity();
    double window_start = kNever;
    double window_end = kNever;
    double last_time = 0.0;
    auto integrate = [&](double now) {
        const double lo = std::max(last_time, window_start);
        const double hi = std::min(now, window_end);
        if (hi > lo) {
            const double dt = hi - lo;
            for (std::size_t j = 0; j < m; ++j) {
                if (!queues[j].empty()) rep.busy_time[j] += dt;
                rep.area[j] += dt * static_cast<double>(queues[j].size());
            }
        }
        last_time = now;
    };
    auto start_service = [&](std::size_t j, double now) {
        events.push({now + service_time(model.nodes[j], rng), 0, j, seq++});
    };

    if (total > 0) events.push({exponential(rng, rate), 1, 0, seq++});
    while (!events.empty()) {
        const Event ev = events.top();
        events.pop();
        integrate(ev.time);
        if (ev.kind == 1) {
            const std::size_t id = requests.size();
            const double pick = uniform01(rng) * rate;
            const auto file = static_cast<std::size_t>(
                std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
            const std::size_t fi = std::min(file, r - 1);
            const auto nodes = sample_access_set(pi.row(fi), model.files[fi].code_k, rng);
            requests.push_back({fi, ev.time, static_cast<int>(nodes.size())});
            if (id == warm) window_start = ev.time;
            for (std::size_t j : nodes) {
                queues[j].push_back({id, ev.time});
                if (id >= warm) ++rep.window_chunks[j];
                if (queues[j].size() == 1) start_service(j, ev.time);
            }
            if (requests.size() < total) {
                events.push({ev.time + exponential(rng, rate), 1, 0, seq++});
            } else {
                window_end = ev.time;
            }
        } else {
            const std::size_t j = ev.node;
            const Chunk done = queues[j].front();
            queues[j].pop_front();
            if (done.request >= warm) {
                rep.sojourn_sum[j] += ev.time - done.arrival;
                ++rep.chunk_count[j];
            }
            Request& req = requests[done.request];
            if (--req.outstanding == 0 && done.request >= warm) {
                const double latency = ev.time - req.arrival;
                rep.latencies[req.file].push_back(latency);
                if (config.keep_trace) rep.trace.push_back({req.file, req.arrival, latency});
            }
            if (!queues[j].empty()) {
                const Chunk& next = queues[j].front();
                if (next.request >= warm) rep.wait_sum[j] += ev.time - next.arrival;
                start_service(j, ev.time);
            }
        }
    }
    rep.window = (window_end < kNever && window_start < kNever) ? window_end - window_start : 0.0;
    return rep;
}

}  // namespace

SimResult run_simulation(const SystemModel& model, const AccessMatrix& pi, const SimConfig& config) {
    if (!(config.warmup >= 0.0 && config.warmup < 0.5))
        throw ConfigError("warmup fraction must lie in [0, 0.5)");
    if (config.replications == 0) throw ConfigError("at least one replication is required");
    check_access_matrix(model, pi, 1e-6);

    const std::size_t m = model.node_count();
    SimResult result;
    const auto loads = aggregate_arrival(pi, model.files);
    for (std::size_t j = 0; j < m; ++j) {
        if (traffic_intensity(loads[j], model.nodes[j]).unstable) {
            result.unstable = true;
            log(LogLevel::Warn, "node " + std::to_string(j) +
                                    " has rho >= 1; simulated latencies will not be stationary");
        }
    }

    std::vector<std::future<Replication>> jobs;
    for (std::size_t rep = 0; rep < config.replications; ++rep) {
        const std::uint64_t seed = rep == 0 ? config.seed : derive_seed(config.seed, rep);
        jobs.push_back(std::async(config.replications > 1 ? std::launch::async : std::launch::deferred,
                                  [&model, &pi, &config, seed] {
                                      return simulate_once(model, pi, config, seed);
                                  }));
    }

    result.latencies.resize(model.file_count());
    std::vector<double> busy(m, 0.0), area(m, 0.0), wait(m, 0.0), sojourn(m, 0.0);
    std::vector<double> chunks(m, 0.0), window_chunks(m, 0.0);
    double window = 0.0;
    for (auto& job : jobs) {
        Replication rep = job.get();
        for (std::size_t i = 0; i < rep.latencies.size(); ++i)
            result.latencies[i].insert(result.latencies[i].end(), rep.latencies[i].begin(),
                                       rep.latencies[i].end());
        result.trace.insert(result.trace.end(), rep.trace.begin(), rep.trace.end());
        for (std::size_t j = 0; j < m; ++j) {
            busy[j] += rep.busy_time[j];
            area[j] += rep.area[j];
            wait[j] += rep.wait_sum[j];
            sojourn[j] += rep.sojourn_sum[j];
            chunks[j] += static_cast<double>(rep.chunk_count[j]);
            window_chunks[j] += static_cast<double>(rep.window_chunks[j]);
        }
        window += rep.window;
    }
    for (std::size_t j = 0; j < m; ++j) {
        result.utilization.push_back(window > 0.0 ? busy[j] / window : 0.0);
        result.mean_in_node.push_back(window > 0.0 ? area[j] / window : 0.0);
        result.chunk_arrival_rate.push_back(window > 0.0 ? window_chunks[j] / window : 0.0);
        result.mean_queue_delay.push_back(chunks[j] > 0.0 ? wait[j] / chunks[j] : 0.0);
        result.mean_sojourn.push_back(chunks[j] > 0.0 ? sojourn[j] / chunks[j] : 0.0);
    }
    return result;
}

std::vector<TailEstimate> empirical_tail(std::span<const double> samples,
                                         std::span<const double> x_grid) {
    constexpr double kZ99 = 2.5758293035489004;
    if (samples.size() < 100)
        throw InsufficientSamples("tail estimate needs at least 100 samples, got " +
                                  std::to_string(samples.size()));
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    std::vector<TailEstimate> out;
    for (double x : x_grid) {
        const auto below = std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
        const double p = (n - static_cast<double>(below)) / n;
        out.push_back({x, p, kZ99 * std::sqrt(p * (1.0 - p) / n)});
    }
    return out;
}

std::vector<std::vector<TailEstimate>> empirical_tail(const SimResult& result,
                                                      std::span<const double> x_grid) {
    std::vector<std::vector<TailEstimate>> out;
    for (const auto& samples : result.latencies) out.push_back(empirical_tail(samples, x_grid));
    return out;
}

void write_trace(const SimResult& result, std::ostream& out) {
    out << "file_id,arrival_time_s,latency_s\n";
    out.precision(17);
    for (const auto& rec : result.trace)
        out << rec.file << ',' << rec.arrival_time << ',' << rec.latency << '\n';
}

}  // namespace ectail
