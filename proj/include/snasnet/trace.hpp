#pragma once

#include <bit>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "snasnet/lif.hpp"

namespace snasnet {

// Packed binary activation pattern: the flattened spike map of one LIF
// layer at one timestep for one sample.
struct BitPattern {
    int nbits = 0;
    std::vector<uint64_t> words;

    BitPattern() = default;
    explicit BitPattern(int n) : nbits(n), words((n + 63) / 64, 0) {}

    void set(int i) { words[i >> 6] |= uint64_t(1) << (i & 63); }
    bool get(int i) const { return (words[i >> 6] >> (i & 63)) & 1; }

    int ones() const {
        int total = 0;
        for (uint64_t w : words) total += std::popcount(w);
        return total;
    }
    int zeros() const { return nbits - ones(); }

    bool operator==(const BitPattern&) const = default;
};

// Count of differing positions between equal-length patterns.
int hamming(const BitPattern& a, const BitPattern& b);

// All patterns of one (layer, timestep) pair across the mini-batch.
struct TraceBlock {
    int layer = 0;
    int t = 0;
    int n_a = 0;
    std::vector<BitPattern> samples;
};

struct ActivationTrace {
    std::vector<TraceBlock> blocks;

    bool empty() const { return blocks.empty(); }
    int num_samples() const { return blocks.empty() ? 0 : static_cast<int>(blocks[0].samples.size()); }
};

// Flattens a spike map (values exactly 0/1) into per-sample bit patterns
// and appends one block.
void append_spike_block(ActivationTrace& trace, int layer, int t, const SpikeTensor& spikes);

// Binary dump for debugging. Layout (all integers little-endian u32):
//   magic "SNTR", version 1, block count,
//   per block: layer, t, N_A, N, then N patterns of ceil(N_A/8) bytes each,
//   bit i of a pattern stored LSB-first in byte i/8.
void write_trace_dump(const ActivationTrace& trace, std::ostream& out);
ActivationTrace read_trace_dump(std::istream& in);

} // namespace snasnet
