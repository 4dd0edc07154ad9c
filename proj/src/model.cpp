#include "ectail/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ectail {

double SystemModel::total_arrival_rate() const {
    double sum = 0.0;
    for (const auto& f : files) sum += f.arrival_rate;
    return sum;
}

double SystemModel::total_chunk_rate() const {
    double sum = 0.0;
    for (const auto& f : files) sum += f.arrival_rate * f.code_k;
    return sum;
}

std::vector<Placement> SystemModel::placements() const {
    std::vector<Placement> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(f.placement);
    return out;
}

SystemModel with_placements(const SystemModel& model, const std::vector<Placement>& placements) {
    if (placements.size() != model.files.size())
        throw ConfigError("placement list size does not match file count");
    SystemModel out = model;
    for (std::size_t i = 0; i < placements.size(); ++i) {
        out.files[i].placement = placements[i];
        std::sort(out.files[i].placement.begin(), out.files[i].placement.end());
    }
    return out;
}

namespace {

using nlohmann::json;

void from_json(const json& j, RawNode& n) {
    j.at("alpha_per_sec").get_to(n.alpha_per_sec);
    j.at("beta_ms").get_to(n.beta_ms);
}

void from_json(const json& j, RawFileGroup& g) {
    g.count = j.value("count", 1);
    j.at("lambda_per_sec").get_to(g.lambda_per_sec);
    j.at("n").get_to(g.n);
    j.at("k").get_to(g.k);
    j.at("placement").get_to(g.placement);
    if (j.contains("weight") && !j.at("weight").is_null()) g.weight = j.at("weight").get<double>();
}

}  // namespace

RawScenario parse_scenario(const std::string& json_text) {
    RawScenario raw;
    try {
        const json doc = json::parse(json_text);
        for (const auto& n : doc.at("nodes")) {
            RawNode node;
            from_json(n, node);
            raw.nodes.push_back(node);
        }
        for (const auto& g : doc.at("file_groups")) {
            RawFileGroup group;
            from_json(g, group);
            raw.groups.push_back(std::move(group));
        }
        raw.epsilon = doc.value("epsilon", kDefaultEpsilon);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed scenario: ") + e.what());
    }
    return raw;
}

RawScenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str());
}

std::string scenario_to_json(const RawScenario& raw) {
    json doc;
    doc["nodes"] = json::array();
    for (const auto& n : raw.nodes)
        doc["nodes"].push_back({{"alpha_per_sec", n.alpha_per_sec}, {"beta_ms", n.beta_ms}});
    doc["file_groups"] = json::array();
    for (const auto& g : raw.groups) {
        json jg = {{"count", g.count},
                   {"lambda_per_sec", g.lambda_per_sec},
                   {"n", g.n},
                   {"k", g.k},
                   {"placement", g.placement}};
        if (g.weight) jg["weight"] = *g.weight;
        doc["file_groups"].push_back(std::move(jg));
    }
    doc["epsilon"] = raw.epsilon;
    return doc.dump(2);
}

SystemModel validate_system(const RawScenario& raw) {
    SystemModel model;
    if (raw.nodes.empty()) throw ConfigError("scenario has no nodes");
    if (!(raw.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    model.epsilon = raw.epsilon;

    for (std::size_t j = 0; j < raw.nodes.size(); ++j) {
        const auto& n = raw.nodes[j];
        if (!(n.alpha_per_sec > 0.0) || !std::isfinite(n.alpha_per_sec))
            throw ConfigError("node " + std::to_string(j) + ": rate alpha must be positive");
        if (!(n.beta_ms >= 0.0) || !std::isfinite(n.beta_ms))
            throw ConfigError("node " + std::to_string(j) + ": shift beta must be nonnegative");
        model.nodes.push_back({n.alpha_per_sec, n.beta_ms / 1000.0});
    }
    const auto m = static_cast<long long>(model.nodes.size());

    const bool any_weight = std::any_of(raw.groups.begin(), raw.groups.end(),
                                        [](const RawFileGroup& g) { return g.weight.has_value(); });
    const bool all_weight = std::all_of(raw.groups.begin(), raw.groups.end(),
                                        [](const RawFileGroup& g) { return g.weight.has_value(); });
    if (any_weight && !all_weight)
        throw ConfigError("either every file group sets a weight or none does");

    std::vector<double> raw_weights;
    for (std::size_t g = 0; g < raw.groups.size(); ++g) {
        const auto& group = raw.groups[g];
        const std::string where = "file group " + std::to_string(g) + ": ";
        if (group.count < 1) throw ConfigError(where + "count must be at least 1");
        if (group.k < 1) throw ConfigError(where + "k must be at least 1");
        if (group.k > group.n) throw ConfigError(where + "k exceeds n");
        if (group.n > m) throw ConfigError(where + "n exceeds node count");
        if (!(group.lambda_per_sec > 0.0) || !std::isfinite(group.lambda_per_sec))
            throw ConfigError(where + "arrival rate must be positive");
        if (static_cast<long long>(group.placement.size()) != group.n)
            throw ConfigError(where + "placement size " + std::to_string(group.placement.size()) +
                              " does not match n = " + std::to_string(group.n));
        Placement placement;
        for (long long idx : group.placement) {
            if (idx < 0 || idx >= m)
                throw ConfigError(where + "placement node index out of range: " + std::to_string(idx));
            placement.push_back(static_cast<std::size_t>(idx));
        }
        std::sort(placement.begin(), placement.end());
        if (std::adjacent_find(placement.begin(), placement.end()) != placement.end())
            throw ConfigError(where + "duplicate node index in placement");
        if (group.weight && !(*group.weight > 0.0))
            throw ConfigError(where + "weight must be positive");

        for (int c = 0; c < group.count; ++c) {
            FileClass f;
            f.code_n = group.n;
            f.code_k = group.k;
            f.arrival_rate = group.lambda_per_sec;
            f.placement = placement;
            f.group = g;
            model.files.push_back(f);
            raw_weights.push_back(group.weight ? *group.weight : group.lambda_per_sec);
        }
    }
    if (model.files.empty()) throw ConfigError("scenario has no files");

    double total = 0.0;
    for (double w : raw_weights) total += w;
    for (std::size_t i = 0; i < model.files.size(); ++i) model.files[i].weight = raw_weights[i] / total;
    return model;
}

void check_access_matrix(const SystemModel& model, const AccessMatrix& pi, double tolerance) {
    if (pi.rows() != model.file_count() || pi.cols() != model.node_count())
        throw ConfigError("access matrix shape does not match model");
    for (std::size_t i = 0; i < pi.rows(); ++i) {
        const auto& f = model.files[i];
        double sum = 0.0;
        for (std::size_t j = 0; j < pi.cols(); ++j) {
            const double v = pi(i, j);
            if (!(v >= -tolerance && v <= 1.0 + tolerance))
                throw ConfigError("access probability outside [0,1] for file " + std::to_string(i));
            const bool placed = std::binary_search(f.placement.begin(), f.placement.end(), j);
            if (!placed && v != 0.0)
                throw ConfigError("access probability off placement for file " + std::to_string(i));
            sum += v;
        }
        if (std::abs(sum - f.code_k) > tolerance)
            throw ConfigError("row sum differs from k for file " + std::to_string(i));
    }
}

std::vector<double> aggregate_arrival(const AccessMatrix& pi, const std::vector<FileClass>& files) {
    std::vector<double> load(pi.cols(), 0.0);
    for (std::size_t i = 0; i < pi.rows(); ++i) {
        const double lambda = files[i].arrival_rate;
        const auto row = pi.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) load[j] += lambda * row[j];
    }
    return load;
}

Intensity traffic_intensity(double load, const NodeParams& node) {
    const double rho = load * (1.0 / node.rate_alpha + node.shift_beta);
    return {rho, rho >= 1.0};
}

}  // namespace ectail
