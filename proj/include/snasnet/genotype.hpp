#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "snasnet/rng.hpp"

namespace snasnet {

// NAS-Bench-201 operation set. Zeroize stands for an absent connection.
enum class Operation : uint8_t {
    Zeroize = 0,
    SkipConnect,
    Conv1x1,
    Conv3x3,
    AvgPool3x3,
};

constexpr int kNumOperations = 5;
constexpr int kNumNodes = 4;
constexpr int kNumEdges = 6; // ordered node pairs (i, j), i < j

const char* op_name(Operation op);
bool op_from_name(const std::string& name, Operation& out);

// Edge index <-> node pair mapping, in fixed order
// (0,1) (0,2) (0,3) (1,2) (1,3) (2,3).
struct NodePair {
    int lo = 0, hi = 0;
};
NodePair edge_pair(int edge_index);
int edge_index(int lo, int hi);

enum class SampleMode : uint8_t { ForwardOnly, ForwardAndBackward };

const char* mode_name(SampleMode m);
bool mode_from_name(const std::string& name, SampleMode& out);

// Searchable cell: operation per forward edge (i -> j, i < j, same timestep)
// and per backward edge (j -> i spikes from timestep t-1). A node pair may
// not carry both a non-Zeroize forward and a non-Zeroize backward edge.
struct CellGenotype {
    std::array<Operation, kNumEdges> forward{};
    std::array<Operation, kNumEdges> backward{};
    SampleMode mode = SampleMode::ForwardOnly;

    bool operator==(const CellGenotype&) const = default;

    // Copy with every backward edge Zeroized.
    CellGenotype forward_projected() const;

    bool has_backward_edges() const;
};

struct AttributeCounts {
    int forward_connections = 0;  // non-Zeroize forward edges
    int backward_connections = 0; // non-Zeroize backward edges
    int skip_connect = 0;
    int conv1x1 = 0;
    int conv3x3 = 0;
    int avg_pool = 0;
};

// Uniform operation per edge; in ForwardAndBackward mode the bidirectional
// constraint is enforced by resampling the offending backward edge (Zeroize
// after 1000 retries).
CellGenotype sample_genotype(Rng& rng, SampleMode mode);

// Node pairs violating the no-bidirectional-pair constraint; empty iff valid.
std::vector<NodePair> validate_genotype(const CellGenotype& g);

AttributeCounts count_attributes(const CellGenotype& g);

// JSON interchange format: {nodes, mode, forward: [{from,to,op}x6],
// backward: [{from,to,op}x6]}. Round-trips bit-exactly.
std::string serialize_genotype(const CellGenotype& g);
CellGenotype deserialize_genotype(const std::string& text);

} // namespace snasnet
