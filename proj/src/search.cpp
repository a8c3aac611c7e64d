#include "snasnet/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace snasnet {

SearchReport random_search(int num_candidates, SampleMode mode, const Tensor4& batch,
                           const NetworkConfig& cfg, uint64_t master_seed,
                           int workers, bool record_hd) {
    if (num_candidates < 1)
        throw std::invalid_argument("random_search: need at least one candidate");
    if (workers < 1) workers = 1;

    const auto start = std::chrono::steady_clock::now();
    std::vector<CandidateRecord> records(num_candidates);

    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= num_candidates || failed.load()) break;
            try {
                CandidateRecord rec;
                rec.sample_index = k;
                rec.seed = derive_seed(master_seed, static_cast<uint64_t>(k));
                Rng rng(rec.seed);
                rec.genotype = sample_genotype(rng, mode);
                if (record_hd) {
                    const CandidateScore s = score_candidate_both(rec.genotype, batch, cfg, rec.seed);
                    rec.score = s.sahd;
                    rec.hd_score = s.hd;
                } else {
                    rec.score = score_candidate(rec.genotype, batch, cfg, rec.seed);
                }
                records[k] = std::move(rec);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failure = e.what();
                failed.store(true);
                break;
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed.load())
        throw std::runtime_error("random_search: candidate evaluation failed: " + failure);

    std::stable_sort(records.begin(), records.end(),
                     [](const CandidateRecord& a, const CandidateRecord& b) {
                         if (score_less(a.score, b.score) != score_less(b.score, a.score))
                             return score_less(b.score, a.score);
                         return a.sample_index < b.sample_index;
                     });

    SearchReport report;
    report.ranked = std::move(records);
    report.best_index = report.ranked.front().sample_index;
    report.master_seed = master_seed;
    report.mode = mode_name(mode);
    report.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::optional<double> kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("kendall_tau: need equal-length inputs with >= 2 entries");
    const int n = static_cast<int>(xs.size());
    long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dx = xs[i] - xs[j];
            const double dy = ys[i] - ys[j];
            const bool tx = xs[i] == xs[j];
            const bool ty = ys[i] == ys[j];
            if (tx && ty) continue; // counted in neither correction term pair product
            if (tx) { ++ties_x; continue; }
            if (ty) { ++ties_y; continue; }
            if ((dx > 0) == (dy > 0))
                ++concordant;
            else
                ++discordant;
        }
    }
    const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
    // tau_b denominator from per-value tie counts
    auto tie_term = [n](const std::vector<double>& v) {
        long long total = 0;
        std::vector<double> sorted(v);
        std::sort(sorted.begin(), sorted.end());
        int run = 1;
        for (int i = 1; i <= n; ++i) {
            if (i < n && sorted[i] == sorted[i - 1]) {
                ++run;
            } else {
                total += static_cast<long long>(run) * (run - 1) / 2;
                run = 1;
            }
        }
        return total;
    };
    const long long n1 = tie_term(xs);
    const long long n2 = tie_term(ys);
    const double denom = std::sqrt(static_cast<double>(n0 - n1)) *
                         std::sqrt(static_cast<double>(n0 - n2));
    if (denom == 0.0) return std::nullopt;
    return (static_cast<double>(concordant) - static_cast<double>(discordant)) / denom;
}

void concordance_counts(const std::vector<double>& xs, const std::vector<double>& ys,
                        int& concordant, int& discordant) {
    concordant = discordant = 0;
    const int n = static_cast<int>(xs.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (xs[i] == xs[j] || ys[i] == ys[j]) continue;
            if ((xs[i] > xs[j]) == (ys[i] > ys[j]))
                ++concordant;
            else
                ++discordant;
        }
}

double sign_test_p(int concordant, int discordant) {
    const int n = concordant + discordant;
    if (n == 0) return 1.0;
    // P[Bin(n, 1/2) >= concordant], summed in log space
    double p = 0.0;
    for (int i = concordant; i <= n; ++i) {
        const double log_term = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                                std::lgamma(n - i + 1.0) - n * std::log(2.0);
        p += std::exp(log_term);
    }
    return std::min(p, 1.0);
}

std::map<std::string, std::vector<AttrBucket>> attribute_stats(
    const std::vector<CandidateRecord>& records, bool use_accuracy) {
    std::map<std::string, std::map<int, std::pair<double, int>>> acc;
    for (const auto& rec : records) {
        double y;
        if (use_accuracy) {
            if (!rec.trained_accuracy) continue;
            y = *rec.trained_accuracy;
        } else {
            if (rec.score.singular) continue;
            y = rec.score.value;
        }
        const AttributeCounts a = count_attributes(rec.genotype);
        const std::pair<const char*, int> attrs[] = {
            {"fw", a.forward_connections}, {"bw", a.backward_connections},
            {"skip_connect", a.skip_connect}, {"conv_1x1", a.conv1x1},
            {"conv_3x3", a.conv3x3}, {"avg_pool", a.avg_pool}};
        for (const auto& [name, value] : attrs) {
            auto& bucket = acc[name][value];
            bucket.first += y;
            bucket.second += 1;
        }
    }
    std::map<std::string, std::vector<AttrBucket>> out;
    for (const auto& [name, buckets] : acc) {
        auto& vec = out[name];
        for (const auto& [value, sums] : buckets)
            vec.push_back({value, sums.first / sums.second, sums.second});
    }
    return out;
}

namespace {

const char kOpCodes[] = {'z', 's', 'c', 'C', 'a'};

char op_code(Operation op) { return kOpCodes[static_cast<int>(op)]; }

Operation op_from_code(char c) {
    for (int i = 0; i < kNumOperations; ++i)
        if (kOpCodes[i] == c) return static_cast<Operation>(i);
    throw std::invalid_argument(std::string("unknown op code '") + c + "'");
}

} // namespace

std::string compact_genotype(const CellGenotype& g) {
    std::string s;
    s += (g.mode == SampleMode::ForwardOnly) ? 'F' : 'B';
    s += ':';
    for (int e = 0; e < kNumEdges; ++e) s += op_code(g.forward[e]);
    s += '|';
    for (int e = 0; e < kNumEdges; ++e) s += op_code(g.backward[e]);
    return s;
}

CellGenotype parse_compact_genotype(const std::string& s) {
    if (s.size() != 2 + 2 * kNumEdges + 1 || s[1] != ':' || s[2 + kNumEdges] != '|')
        throw std::invalid_argument("compact genotype: malformed string '" + s + "'");
    CellGenotype g;
    if (s[0] == 'F') g.mode = SampleMode::ForwardOnly;
    else if (s[0] == 'B') g.mode = SampleMode::ForwardAndBackward;
    else throw std::invalid_argument("compact genotype: unknown mode letter");
    for (int e = 0; e < kNumEdges; ++e) {
        g.forward[e] = op_from_code(s[2 + e]);
        g.backward[e] = op_from_code(s[3 + kNumEdges + e]);
    }
    return g;
}

std::string format_score(const ArchitectureScore& s) {
    if (s.singular) return "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", s.value);
    return buf;
}

namespace {

ArchitectureScore parse_score(const std::string& s) {
    ArchitectureScore out;
    if (s == "-inf") return out;
    out.value = std::stod(s);
    out.singular = false;
    out.det_sign = 1;
    return out;
}

} // namespace

std::string format_report(const SearchReport& report) {
    std::ostringstream out;
    out << "# snasnet search report\n";
    out << "# master_seed " << report.master_seed << "\n";
    out << "# mode " << report.mode << "\n";
    out << "# columns: rank index seed score hd_score accuracy genotype\n";
    int rank = 1;
    for (const auto& rec : report.ranked) {
        out << rank++ << ' ' << rec.sample_index << ' ' << rec.seed << ' '
            << format_score(rec.score) << ' '
            << (rec.hd_score ? format_score(*rec.hd_score) : std::string("na")) << ' ';
        if (rec.trained_accuracy) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6f", *rec.trained_accuracy);
            out << buf;
        } else {
            out << "na";
        }
        out << ' ' << compact_genotype(rec.genotype) << '\n';
    }
    return out.str();
}

std::vector<CandidateRecord> parse_report(const std::string& text) {
    std::vector<CandidateRecord> records;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        int rank;
        CandidateRecord rec;
        std::string score_s, hd_s, acc_s, geno_s;
        if (!(ls >> rank >> rec.sample_index >> rec.seed >> score_s >> hd_s >> acc_s >> geno_s))
            throw std::invalid_argument("report parse error on line: " + line);
        rec.score = parse_score(score_s);
        if (hd_s != "na") rec.hd_score = parse_score(hd_s);
        if (acc_s != "na") rec.trained_accuracy = std::stod(acc_s);
        rec.genotype = parse_compact_genotype(geno_s);
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace snasnet
