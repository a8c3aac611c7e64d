#include "snasnet/scoring.hpp"

#include <cmath>
#include <stdexcept>

namespace snasnet {

double sparsity(const BitPattern& pattern) {
    if (pattern.nbits == 0)
        throw std::invalid_argument("sparsity: empty pattern");
    return static_cast<double>(pattern.zeros()) / static_cast<double>(pattern.nbits);
}

double expected_hd(double r_i, double r_j, int n_a) {
    return static_cast<double>(n_a) * (r_i * (1.0 - r_j) + (1.0 - r_i) * r_j);
}

double sahd(const BitPattern& c_i, const BitPattern& c_j, double r_i, double r_j, double alpha) {
    const int d = hamming(c_i, c_j);
    if (d == 0) return 0.0; // covers the 0/0 case of identical extreme-sparsity patterns
    double denom = expected_hd(r_i, r_j, c_i.nbits);
    const double eps = 1e-12 * static_cast<double>(c_i.nbits);
    if (denom < eps) denom = eps;
    return alpha / denom * static_cast<double>(d);
}

KernelMatrix kernel_from_trace(const ActivationTrace& trace, DistanceMetric metric) {
    if (trace.empty())
        throw std::invalid_argument("kernel_from_trace: empty trace");
    const int n = trace.num_samples();
    if (n < 2)
        throw std::invalid_argument("kernel_from_trace: need at least 2 samples");

    KernelMatrix k(n);
    std::vector<double> r(n);
    for (const auto& block : trace.blocks) {
        if (static_cast<int>(block.samples.size()) != n)
            throw std::invalid_argument("kernel_from_trace: inconsistent sample count across blocks");
        const double n_a = static_cast<double>(block.n_a);
        const double alpha = 0.5 * n_a;
        for (int i = 0; i < n; ++i) r[i] = sparsity(block.samples[i]);
        for (int i = 0; i < n; ++i) {
            for (int j = i; j < n; ++j) {
                double d;
                if (metric == DistanceMetric::Sahd)
                    d = sahd(block.samples[i], block.samples[j], r[i], r[j], alpha);
                else
                    d = static_cast<double>(hamming(block.samples[i], block.samples[j]));
                k.at(i, j) += n_a - d;
                if (j != i) k.at(j, i) += n_a - d;
            }
        }
    }
    return k;
}

ArchitectureScore score_logdet(const KernelMatrix& k) {
    const int n = k.n;
    if (n < 1) throw std::invalid_argument("score_logdet: empty matrix");

    double scale = 0.0;
    for (double v : k.entries) scale = std::max(scale, std::abs(v));
    const double sym_tol = 1e-9 * std::max(1.0, scale);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(k.at(i, j) - k.at(j, i)) > sym_tol)
                throw std::invalid_argument("score_logdet: matrix is not symmetric");

    // LU with partial pivoting; log-magnitudes accumulate in 64-bit.
    std::vector<double> a = k.entries;
    auto at = [&a, n](int i, int j) -> double& { return a[static_cast<size_t>(i) * n + j]; };

    const double pivot_tol = 1e-10 * std::max(1.0, scale);
    double log_abs_det = 0.0;
    int sign = 1;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(at(r, col)) > std::abs(at(pivot, col))) pivot = r;
        if (std::abs(at(pivot, col)) < pivot_tol) {
            ArchitectureScore s;
            s.singular = true;
            s.det_sign = 0;
            return s;
        }
        if (pivot != col) {
            for (int j = 0; j < n; ++j) std::swap(at(pivot, j), at(col, j));
            sign = -sign;
        }
        const double p = at(col, col);
        if (p < 0) sign = -sign;
        log_abs_det += std::log(std::abs(p));
        for (int r = col + 1; r < n; ++r) {
            const double f = at(r, col) / p;
            if (f == 0.0) continue;
            for (int j = col; j < n; ++j) at(r, j) -= f * at(col, j);
        }
    }

    ArchitectureScore s;
    s.value = log_abs_det;
    s.singular = false;
    s.det_sign = sign;
    return s;
}

namespace {

ActivationTrace trace_for(const CellGenotype& g, const Tensor4& batch,
                          const NetworkConfig& cfg, uint64_t seed) {
    SpikingNetwork net = build_network(g, cfg, seed);
    reset_network(net, batch.n);
    return forward_collect(net, batch, cfg.timesteps).trace;
}

} // namespace

ArchitectureScore score_candidate(const CellGenotype& g, const Tensor4& batch,
                                  const NetworkConfig& cfg, uint64_t seed) {
    return score_logdet(kernel_from_trace(trace_for(g, batch, cfg, seed), DistanceMetric::Sahd));
}

ArchitectureScore score_candidate_hd(const CellGenotype& g, const Tensor4& batch,
                                     const NetworkConfig& cfg, uint64_t seed) {
    return score_logdet(kernel_from_trace(trace_for(g, batch, cfg, seed), DistanceMetric::Hd));
}

CandidateScore score_candidate_both(const CellGenotype& g, const Tensor4& batch,
                                    const NetworkConfig& cfg, uint64_t seed) {
    const ActivationTrace trace = trace_for(g, batch, cfg, seed);
    CandidateScore out;
    out.sahd = score_logdet(kernel_from_trace(trace, DistanceMetric::Sahd));
    out.hd = score_logdet(kernel_from_trace(trace, DistanceMetric::Hd));
    return out;
}

bool score_less(const ArchitectureScore& a, const ArchitectureScore& b) {
    if (a.singular != b.singular) return a.singular; // singular ranks below finite
    if (a.singular) return false;                    // ties among sentinels
    return a.value < b.value;
}

} // namespace snasnet
