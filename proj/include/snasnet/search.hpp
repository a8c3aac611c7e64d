#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "snasnet/genotype.hpp"
#include "snasnet/scoring.hpp"

namespace snasnet {

struct CandidateRecord {
    int sample_index = 0;
    uint64_t seed = 0;
    CellGenotype genotype;
    ArchitectureScore score;
    std::optional<ArchitectureScore> hd_score;
    std::optional<double> trained_accuracy;
};

struct SearchReport {
    std::vector<CandidateRecord> ranked; // score descending, sample_index ascending
    int best_index = -1;                 // sample_index of rank 1
    double duration_seconds = 0.0;
    uint64_t master_seed = 0;
    std::string mode;
};

// Samples and scores num_candidates genotypes on one shared batch.
// Candidate k uses derive_seed(master_seed, k) for both its genotype and
// its weights, so the report is identical for any worker count.
SearchReport random_search(int num_candidates, SampleMode mode, const Tensor4& batch,
                           const NetworkConfig& cfg, uint64_t master_seed,
                           int workers = 1, bool record_hd = false);

// Tie-corrected Kendall tau_b. Returns nullopt when every pair is tied in
// xs or in ys (correlation undefined).
std::optional<double> kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys);

// One-sided sign test on concordant vs discordant pairs:
// P[Bin(c + d, 1/2) >= c].
double sign_test_p(int concordant, int discordant);

// Concordant/discordant pair counts between two sequences (ties skipped).
void concordance_counts(const std::vector<double>& xs, const std::vector<double>& ys,
                        int& concordant, int& discordant);

struct AttrBucket {
    int attribute_value = 0;
    double mean_y = 0.0;
    int count = 0;
};

// Per-attribute summaries of a y-value (score or trained accuracy) bucketed
// by attribute value. Keys: fw, bw, skip_connect, conv_1x1, conv_3x3,
// avg_pool.
std::map<std::string, std::vector<AttrBucket>> attribute_stats(
    const std::vector<CandidateRecord>& records, bool use_accuracy);

// Deterministic text form: header lines, then one line per record
// (rank, index, seed, scores, compact genotype). Excludes wall-clock time
// so equal searches produce byte-identical files.
std::string format_report(const SearchReport& report);
std::vector<CandidateRecord> parse_report(const std::string& text);

// Compact single-token genotype codec used inside report lines.
std::string compact_genotype(const CellGenotype& g);
CellGenotype parse_compact_genotype(const std::string& s);

std::string format_score(const ArchitectureScore& s);

} // namespace snasnet
