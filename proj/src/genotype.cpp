#include "snasnet/genotype.hpp"

#include <stdexcept>

#include <json.hpp>

namespace snasnet {

namespace {

const std::array<const char*, kNumOperations> kOpNames = {
    "zeroize", "skip_connect", "conv_1x1", "conv_3x3", "avg_pool_3x3"};

const std::array<NodePair, kNumEdges> kEdgePairs = {{
    {0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

} // namespace

const char* op_name(Operation op) { return kOpNames[static_cast<int>(op)]; }

bool op_from_name(const std::string& name, Operation& out) {
    for (int i = 0; i < kNumOperations; ++i) {
        if (name == kOpNames[i]) {
            out = static_cast<Operation>(i);
            return true;
        }
    }
    return false;
}

NodePair edge_pair(int edge_index) { return kEdgePairs[edge_index]; }

int edge_index(int lo, int hi) {
    for (int e = 0; e < kNumEdges; ++e)
        if (kEdgePairs[e].lo == lo && kEdgePairs[e].hi == hi) return e;
    throw std::invalid_argument("edge_index: no such node pair");
}

const char* mode_name(SampleMode m) {
    return m == SampleMode::ForwardOnly ? "forward_only" : "forward_and_backward";
}

bool mode_from_name(const std::string& name, SampleMode& out) {
    if (name == "forward_only") { out = SampleMode::ForwardOnly; return true; }
    if (name == "forward_and_backward") { out = SampleMode::ForwardAndBackward; return true; }
    return false;
}

CellGenotype CellGenotype::forward_projected() const {
    CellGenotype g = *this;
    g.backward.fill(Operation::Zeroize);
    g.mode = SampleMode::ForwardOnly;
    return g;
}

bool CellGenotype::has_backward_edges() const {
    for (auto op : backward)
        if (op != Operation::Zeroize) return true;
    return false;
}

CellGenotype sample_genotype(Rng& rng, SampleMode mode) {
    CellGenotype g;
    g.mode = mode;
    for (int e = 0; e < kNumEdges; ++e)
        g.forward[e] = static_cast<Operation>(rng.below(kNumOperations));
    g.backward.fill(Operation::Zeroize);
    if (mode == SampleMode::ForwardAndBackward) {
        for (int e = 0; e < kNumEdges; ++e) {
            auto op = static_cast<Operation>(rng.below(kNumOperations));
            if (g.forward[e] != Operation::Zeroize) {
                // Resample until this pair stops being bidirectional.
                int retries = 0;
                while (op != Operation::Zeroize && ++retries <= 1000)
                    op = static_cast<Operation>(rng.below(kNumOperations));
                if (op != Operation::Zeroize) op = Operation::Zeroize;
            }
            g.backward[e] = op;
        }
    }
    return g;
}

std::vector<NodePair> validate_genotype(const CellGenotype& g) {
    std::vector<NodePair> violations;
    for (int e = 0; e < kNumEdges; ++e)
        if (g.forward[e] != Operation::Zeroize && g.backward[e] != Operation::Zeroize)
            violations.push_back(kEdgePairs[e]);
    return violations;
}

AttributeCounts count_attributes(const CellGenotype& g) {
    AttributeCounts a;
    auto tally = [&a](Operation op) {
        switch (op) {
            case Operation::SkipConnect: ++a.skip_connect; break;
            case Operation::Conv1x1: ++a.conv1x1; break;
            case Operation::Conv3x3: ++a.conv3x3; break;
            case Operation::AvgPool3x3: ++a.avg_pool; break;
            case Operation::Zeroize: break;
        }
    };
    for (int e = 0; e < kNumEdges; ++e) {
        if (g.forward[e] != Operation::Zeroize) ++a.forward_connections;
        if (g.backward[e] != Operation::Zeroize) ++a.backward_connections;
        tally(g.forward[e]);
        tally(g.backward[e]);
    }
    return a;
}

std::string serialize_genotype(const CellGenotype& g) {
    nlohmann::ordered_json j;
    j["nodes"] = kNumNodes;
    j["mode"] = mode_name(g.mode);
    j["forward"] = nlohmann::ordered_json::array();
    j["backward"] = nlohmann::ordered_json::array();
    for (int e = 0; e < kNumEdges; ++e) {
        const auto p = kEdgePairs[e];
        j["forward"].push_back({{"from", p.lo}, {"to", p.hi}, {"op", op_name(g.forward[e])}});
        j["backward"].push_back({{"from", p.hi}, {"to", p.lo}, {"op", op_name(g.backward[e])}});
    }
    return j.dump(2) + "\n";
}

CellGenotype deserialize_genotype(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("genotype parse error at byte ") +
                                    std::to_string(e.byte) + ": " + e.what());
    }
    CellGenotype g;
    if (!j.contains("nodes") || j["nodes"].get<int>() != kNumNodes)
        throw std::invalid_argument("genotype parse error: expected nodes: 4");
    if (!j.contains("mode") || !mode_from_name(j["mode"].get<std::string>(), g.mode))
        throw std::invalid_argument("genotype parse error: unknown mode");

    auto read_edges = [](const nlohmann::json& arr, bool is_backward,
                         std::array<Operation, kNumEdges>& out) {
        if (!arr.is_array() || arr.size() != kNumEdges)
            throw std::invalid_argument("genotype parse error: expected 6 edges");
        std::array<bool, kNumEdges> seen{};
        for (const auto& item : arr) {
            const int from = item.at("from").get<int>();
            const int to = item.at("to").get<int>();
            const int lo = is_backward ? to : from;
            const int hi = is_backward ? from : to;
            if (lo < 0 || hi >= kNumNodes || lo >= hi)
                throw std::invalid_argument("genotype parse error: bad node pair");
            const int e = edge_index(lo, hi);
            if (seen[e]) throw std::invalid_argument("genotype parse error: duplicate edge");
            seen[e] = true;
            if (!op_from_name(item.at("op").get<std::string>(), out[e]))
                throw std::invalid_argument("genotype parse error: unknown operation tag '" +
                                            item.at("op").get<std::string>() + "'");
        }
    };
    read_edges(j.at("forward"), false, g.forward);
    read_edges(j.at("backward"), true, g.backward);
    return g;
}

} // namespace snasnet
