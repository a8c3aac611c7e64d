#include "snasnet/trace.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

namespace snasnet {

int hamming(const BitPattern& a, const BitPattern& b) {
    if (a.nbits != b.nbits)
        throw std::invalid_argument("hamming: pattern lengths differ");
    int d = 0;
    for (size_t i = 0; i < a.words.size(); ++i)
        d += std::popcount(a.words[i] ^ b.words[i]);
    return d;
}

void append_spike_block(ActivationTrace& trace, int layer, int t, const SpikeTensor& spikes) {
    const int n_a = spikes.c * spikes.h * spikes.w;
    TraceBlock block;
    block.layer = layer;
    block.t = t;
    block.n_a = n_a;
    block.samples.reserve(spikes.n);
    for (int i = 0; i < spikes.n; ++i) {
        BitPattern p(n_a);
        const float* base = &spikes.data[static_cast<size_t>(i) * n_a];
        for (int k = 0; k < n_a; ++k)
            if (base[k] != 0.0f) p.set(k);
        block.samples.push_back(std::move(p));
    }
    trace.blocks.push_back(std::move(block));
}

namespace {

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("trace dump: truncated input");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

} // namespace

void write_trace_dump(const ActivationTrace& trace, std::ostream& out) {
    out.write("SNTR", 4);
    put_u32(out, 1);
    put_u32(out, static_cast<uint32_t>(trace.blocks.size()));
    for (const auto& block : trace.blocks) {
        put_u32(out, static_cast<uint32_t>(block.layer));
        put_u32(out, static_cast<uint32_t>(block.t));
        put_u32(out, static_cast<uint32_t>(block.n_a));
        put_u32(out, static_cast<uint32_t>(block.samples.size()));
        const int nbytes = (block.n_a + 7) / 8;
        for (const auto& p : block.samples) {
            for (int i = 0; i < nbytes; ++i) {
                const uint64_t word = p.words[i / 8];
                out.put(static_cast<char>((word >> ((i % 8) * 8)) & 0xff));
            }
        }
    }
}

ActivationTrace read_trace_dump(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "SNTR")
        throw std::runtime_error("trace dump: bad magic");
    if (get_u32(in) != 1) throw std::runtime_error("trace dump: unsupported version");

    ActivationTrace trace;
    const uint32_t nblocks = get_u32(in);
    trace.blocks.reserve(nblocks);
    for (uint32_t bi = 0; bi < nblocks; ++bi) {
        TraceBlock block;
        block.layer = static_cast<int>(get_u32(in));
        block.t = static_cast<int>(get_u32(in));
        block.n_a = static_cast<int>(get_u32(in));
        const uint32_t n = get_u32(in);
        const int nbytes = (block.n_a + 7) / 8;
        for (uint32_t s = 0; s < n; ++s) {
            BitPattern p(block.n_a);
            for (int i = 0; i < nbytes; ++i) {
                const int ch = in.get();
                if (ch < 0) throw std::runtime_error("trace dump: truncated pattern data");
                p.words[i / 8] |= uint64_t(static_cast<unsigned char>(ch)) << ((i % 8) * 8);
            }
            block.samples.push_back(std::move(p));
        }
        trace.blocks.push_back(std::move(block));
    }
    return trace;
}

} // namespace snasnet
