#pragma once

#include <limits>
#include <vector>

#include "snasnet/network.hpp"
#include "snasnet/trace.hpp"

namespace snasnet {

// Symmetric N x N similarity matrix in 64-bit, aggregated over layers and
// timesteps.
struct KernelMatrix {
    int n = 0;
    std::vector<double> entries;

    KernelMatrix() = default;
    explicit KernelMatrix(int n_) : n(n_), entries(static_cast<size_t>(n_) * n_, 0.0) {}

    double& at(int i, int j) { return entries[static_cast<size_t>(i) * n + j]; }
    double at(int i, int j) const { return entries[static_cast<size_t>(i) * n + j]; }
};

struct ArchitectureScore {
    double value = -std::numeric_limits<double>::infinity();
    bool singular = true;
    int det_sign = 0; // diagnostic: sign of the determinant

    bool finite() const { return !singular; }
};

enum class DistanceMetric { Sahd, Hd };

// Fraction of zeros in the pattern.
double sparsity(const BitPattern& pattern);

// Expected Hamming distance between independent Bernoulli patterns with
// zero-fractions r_i and r_j: N_A * (r_i (1 - r_j) + (1 - r_i) r_j).
double expected_hd(double r_i, double r_j, int n_a);

// Hamming distance rescaled so its expectation is alpha for every sparsity
// pair. d_H = 0 maps to 0 by convention; a near-zero denominator with
// d_H > 0 is clamped to eps = 1e-12 * N_A.
double sahd(const BitPattern& c_i, const BitPattern& c_j, double r_i, double r_j, double alpha);

// Entry (i, j) = sum over (layer, timestep) of [N_A - d(c_i, c_j)], with
// per-timestep sparsities and alpha = 0.5 * N_A for the SAHD metric.
KernelMatrix kernel_from_trace(const ActivationTrace& trace,
                               DistanceMetric metric = DistanceMetric::Sahd);

// log |det K| via LU with partial pivoting. Non-positive or numerically
// singular determinants yield the -inf sentinel with singular = true.
ArchitectureScore score_logdet(const KernelMatrix& k);

struct CandidateScore {
    ArchitectureScore sahd;
    ArchitectureScore hd;
};

ArchitectureScore score_candidate(const CellGenotype& g, const Tensor4& batch,
                                  const NetworkConfig& cfg, uint64_t seed);
ArchitectureScore score_candidate_hd(const CellGenotype& g, const Tensor4& batch,
                                     const NetworkConfig& cfg, uint64_t seed);

// One forward pass, both metrics (trace reuse).
CandidateScore score_candidate_both(const CellGenotype& g, const Tensor4& batch,
                                    const NetworkConfig& cfg, uint64_t seed);

// Ranking order: finite scores descending, all singular candidates last.
bool score_less(const ArchitectureScore& a, const ArchitectureScore& b);

} // namespace snasnet
