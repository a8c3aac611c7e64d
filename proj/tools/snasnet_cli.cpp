// Command line front end: random architecture search, single-candidate
// scoring, training, score/accuracy correlation runs and report statistics.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "snasnet/data.hpp"
#include "snasnet/search.hpp"
#include "snasnet/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace snasnet;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataSection {
    std::string kind = "synthetic";
    std::string dir;
    SyntheticSpec synth;
};

struct SearchSection {
    int candidates = 100;
    SampleMode mode = SampleMode::ForwardAndBackward;
    int batch_samples = 16;
    int workers = 1;
    uint64_t seed = 1;
    int top_k = 3;
    bool record_hd = false;
};

struct TrainSection {
    TrainConfig tcfg;
    SurrogateConfig scfg;
    uint64_t seed = 1;
};

struct AppConfig {
    DataSection data;
    NetworkConfig net;
    SearchSection search;
    TrainSection train;
    int correlate_candidates = 20;
};

void check_keys(const ordered_json& obj, const std::vector<std::string>& allowed,
                const std::string& context) {
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("config: unknown key '" + key + "' in " + context);
    }
}

template <typename T>
void get_to(const ordered_json& obj, const char* key, T& out) {
    if (obj.contains(key)) obj.at(key).get_to(out);
}

AppConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    check_keys(j, {"data", "network", "search", "train", "correlate"}, "the top level");

    AppConfig cfg;
    if (j.contains("data")) {
        const auto& d = j["data"];
        check_keys(d,
                   {"kind", "dir", "num_classes", "image_size", "samples_per_class_train",
                    "samples_per_class_test", "family", "noise_std", "seed"},
                   "data");
        get_to(d, "kind", cfg.data.kind);
        if (cfg.data.kind != "synthetic" && cfg.data.kind != "cifar10")
            throw ConfigError("config: data.kind must be 'synthetic' or 'cifar10'");
        get_to(d, "dir", cfg.data.dir);
        if (cfg.data.kind == "cifar10" && cfg.data.dir.empty())
            throw ConfigError("config: data.dir is required for cifar10");
        get_to(d, "num_classes", cfg.data.synth.num_classes);
        get_to(d, "image_size", cfg.data.synth.image_size);
        get_to(d, "samples_per_class_train", cfg.data.synth.samples_per_class_train);
        get_to(d, "samples_per_class_test", cfg.data.synth.samples_per_class_test);
        get_to(d, "noise_std", cfg.data.synth.noise_std);
        get_to(d, "seed", cfg.data.synth.seed);
        if (d.contains("family")) {
            const std::string f = d["family"];
            if (f == "stripes") cfg.data.synth.family = PatternFamily::Stripes;
            else if (f == "blobs") cfg.data.synth.family = PatternFamily::Blobs;
            else throw ConfigError("config: data.family must be 'stripes' or 'blobs'");
        }
    }
    if (j.contains("network")) {
        const auto& n = j["network"];
        check_keys(n, {"base_channels", "timesteps", "voting_k", "fc_hidden",
                       "trace_all_lif_layers"},
                   "network");
        get_to(n, "base_channels", cfg.net.base_channels);
        get_to(n, "timesteps", cfg.net.timesteps);
        get_to(n, "voting_k", cfg.net.voting_k);
        get_to(n, "fc_hidden", cfg.net.fc_hidden);
        get_to(n, "trace_all_lif_layers", cfg.net.trace_all_lif_layers);
        if (cfg.net.base_channels < 1 || cfg.net.timesteps < 1)
            throw ConfigError("config: network.base_channels and network.timesteps must be >= 1");
    }
    if (j.contains("search")) {
        const auto& s = j["search"];
        check_keys(s, {"candidates", "mode", "batch_samples", "workers", "seed", "top_k",
                       "record_hd"},
                   "search");
        get_to(s, "candidates", cfg.search.candidates);
        get_to(s, "batch_samples", cfg.search.batch_samples);
        get_to(s, "workers", cfg.search.workers);
        get_to(s, "seed", cfg.search.seed);
        get_to(s, "top_k", cfg.search.top_k);
        get_to(s, "record_hd", cfg.search.record_hd);
        if (s.contains("mode")) {
            const std::string m = s["mode"];
            if (!mode_from_name(m, cfg.search.mode))
                throw ConfigError("config: search.mode must be 'forward_only' or "
                                  "'forward_and_backward'");
        }
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        check_keys(t, {"lr", "momentum", "weight_decay", "epochs", "batch_size", "cosine",
                       "augment", "crop_pad", "flip", "sg_gamma", "seed"},
                   "train");
        get_to(t, "lr", cfg.train.tcfg.lr);
        get_to(t, "momentum", cfg.train.tcfg.momentum);
        get_to(t, "weight_decay", cfg.train.tcfg.weight_decay);
        get_to(t, "epochs", cfg.train.tcfg.epochs);
        get_to(t, "batch_size", cfg.train.tcfg.batch_size);
        get_to(t, "cosine", cfg.train.tcfg.cosine);
        get_to(t, "augment", cfg.train.tcfg.augment_enabled);
        get_to(t, "crop_pad", cfg.train.tcfg.crop_pad);
        get_to(t, "flip", cfg.train.tcfg.flip);
        get_to(t, "sg_gamma", cfg.train.scfg.gamma);
        get_to(t, "seed", cfg.train.seed);
    }
    if (j.contains("correlate")) {
        const auto& c = j["correlate"];
        check_keys(c, {"num_candidates"}, "correlate");
        get_to(c, "num_candidates", cfg.correlate_candidates);
    }
    return cfg;
}

ordered_json effective_config(const AppConfig& cfg) {
    ordered_json j;
    j["data"] = {{"kind", cfg.data.kind}};
    if (cfg.data.kind == "cifar10") {
        j["data"]["dir"] = cfg.data.dir;
    } else {
        j["data"]["num_classes"] = cfg.data.synth.num_classes;
        j["data"]["image_size"] = cfg.data.synth.image_size;
        j["data"]["samples_per_class_train"] = cfg.data.synth.samples_per_class_train;
        j["data"]["samples_per_class_test"] = cfg.data.synth.samples_per_class_test;
        j["data"]["family"] =
            cfg.data.synth.family == PatternFamily::Stripes ? "stripes" : "blobs";
        j["data"]["noise_std"] = cfg.data.synth.noise_std;
        j["data"]["seed"] = cfg.data.synth.seed;
    }
    j["network"] = {{"base_channels", cfg.net.base_channels},
                    {"timesteps", cfg.net.timesteps},
                    {"voting_k", cfg.net.voting_k},
                    {"fc_hidden", cfg.net.fc_hidden},
                    {"trace_all_lif_layers", cfg.net.trace_all_lif_layers}};
    j["search"] = {{"candidates", cfg.search.candidates},
                   {"mode", mode_name(cfg.search.mode)},
                   {"batch_samples", cfg.search.batch_samples},
                   {"workers", cfg.search.workers},
                   {"seed", cfg.search.seed},
                   {"top_k", cfg.search.top_k},
                   {"record_hd", cfg.search.record_hd}};
    j["train"] = {{"lr", cfg.train.tcfg.lr},
                  {"momentum", cfg.train.tcfg.momentum},
                  {"weight_decay", cfg.train.tcfg.weight_decay},
                  {"epochs", cfg.train.tcfg.epochs},
                  {"batch_size", cfg.train.tcfg.batch_size},
                  {"cosine", cfg.train.tcfg.cosine},
                  {"augment", cfg.train.tcfg.augment_enabled},
                  {"crop_pad", cfg.train.tcfg.crop_pad},
                  {"flip", cfg.train.tcfg.flip},
                  {"sg_gamma", cfg.train.scfg.gamma},
                  {"seed", cfg.train.seed}};
    j["correlate"] = {{"num_candidates", cfg.correlate_candidates}};
    return j;
}

Dataset load_data(AppConfig& cfg) {
    Dataset ds;
    if (cfg.data.kind == "cifar10") {
        ds = load_cifar10_binary(cfg.data.dir);
        cfg.net.in_channels = 3;
        cfg.net.in_h = cfg.net.in_w = 32;
    } else {
        ds = make_synthetic(cfg.data.synth);
        cfg.net.in_channels = 1;
        cfg.net.in_h = cfg.net.in_w = cfg.data.synth.image_size;
    }
    cfg.net.num_classes = ds.num_classes;
    return ds;
}

// Shuffled subset of the training split used as the shared scoring batch.
Tensor4 scoring_batch(const Dataset& ds, int samples, uint64_t seed) {
    if (samples < 2 || samples > ds.train.size())
        throw ConfigError("config: search.batch_samples must be in [2, train size]");
    std::vector<int> order(ds.train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0xba7c4));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(static_cast<uint32_t>(i + 1))]);

    const auto& img = ds.train.images;
    Tensor4 batch(samples, img.c, img.h, img.w);
    const size_t per = static_cast<size_t>(img.c) * img.h * img.w;
    for (int i = 0; i < samples; ++i)
        std::copy_n(img.data.begin() + static_cast<size_t>(order[i]) * per, per,
                    batch.data.begin() + static_cast<size_t>(i) * per);
    return batch;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

CellGenotype read_genotype_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open genotype file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize_genotype(text);
    } catch (const std::exception& e) {
        throw ConfigError("genotype file " + path + ": " + e.what());
    }
}

fs::path prepare_out_dir(const std::string& out, const AppConfig& cfg) {
    fs::path dir(out);
    fs::create_directories(dir);
    write_text(dir / "config.json", effective_config(cfg).dump(2) + "\n");
    return dir;
}

int cmd_search(AppConfig cfg, const std::string& out) {
    Dataset ds = load_data(cfg);
    Tensor4 batch = scoring_batch(ds, cfg.search.batch_samples, cfg.search.seed);
    const fs::path dir = prepare_out_dir(out, cfg);

    SearchReport report =
        random_search(cfg.search.candidates, cfg.search.mode, batch, cfg.net,
                      cfg.search.seed, cfg.search.workers, cfg.search.record_hd);
    write_text(dir / "report.txt", format_report(report));

    const int top_k = std::min<int>(cfg.search.top_k, static_cast<int>(report.ranked.size()));
    for (int i = 0; i < top_k; ++i)
        write_text(dir / ("genotype_rank" + std::to_string(i + 1) + ".json"),
                   serialize_genotype(report.ranked[i].genotype) + "\n");

    std::ostringstream summary;
    summary << "candidates " << cfg.search.candidates << "\n"
            << "mode " << report.mode << "\n"
            << "best_index " << report.best_index << "\n"
            << "best_score " << format_score(report.ranked.front().score) << "\n"
            << "best_genotype " << compact_genotype(report.ranked.front().genotype) << "\n"
            << "duration_seconds " << report.duration_seconds << "\n";
    write_text(dir / "summary.txt", summary.str());
    std::cout << summary.str();
    return 0;
}

int cmd_score(AppConfig cfg, const std::string& genotype_path, const std::string& trace_out) {
    Dataset ds = load_data(cfg);
    Tensor4 batch = scoring_batch(ds, cfg.search.batch_samples, cfg.search.seed);
    CellGenotype g = read_genotype_file(genotype_path);

    const uint64_t seed = derive_seed(cfg.search.seed, 0);
    CandidateScore s = score_candidate_both(g, batch, cfg.net, seed);
    std::cout << "sahd_score " << format_score(s.sahd) << "\n";
    std::cout << "hd_score " << format_score(s.hd) << "\n";
    std::cout << "singular " << (s.sahd.singular ? 1 : 0) << "\n";

    if (!trace_out.empty()) {
        SpikingNetwork net = build_network(g, cfg.net, seed);
        reset_network(net, batch.n);
        ForwardOutput fo = forward_collect(net, batch, cfg.net.timesteps);
        std::ofstream out(trace_out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + trace_out);
        write_trace_dump(fo.trace, out);
    }
    return 0;
}

int cmd_train(AppConfig cfg, const std::string& genotype_path, const std::string& out) {
    Dataset ds = load_data(cfg);
    CellGenotype g = read_genotype_file(genotype_path);
    const fs::path dir = prepare_out_dir(out, cfg);

    SpikingNetwork net = build_network(g, cfg.net, cfg.train.seed);
    TrainResult r = train(net, ds, cfg.train.tcfg, cfg.train.scfg, cfg.train.seed);

    std::ostringstream metrics;
    metrics << "# epoch lr train_loss train_acc test_acc\n";
    for (const auto& m : r.metrics) {
        char line[160];
        std::snprintf(line, sizeof(line), "%d %.6f %.6f %.6f %.6f\n", m.epoch, m.lr,
                      m.train_loss, m.train_acc, m.test_acc);
        metrics << line;
    }
    write_text(dir / "metrics.txt", metrics.str());

    if (r.diverged) {
        std::cerr << "training diverged: " << r.diagnostic << "\n";
        return 1;
    }
    save_checkpoint(net, (dir / "checkpoint.bin").string());
    std::cout << "final_test_acc " << r.metrics.back().test_acc << "\n";
    return 0;
}

int cmd_correlate(AppConfig cfg, const std::string& out) {
    Dataset ds = load_data(cfg);
    Tensor4 batch = scoring_batch(ds, cfg.search.batch_samples, cfg.search.seed);
    const fs::path dir = prepare_out_dir(out, cfg);

    std::vector<CandidateRecord> records;
    for (int k = 0; k < cfg.correlate_candidates; ++k) {
        CandidateRecord rec;
        rec.sample_index = k;
        rec.seed = derive_seed(cfg.search.seed, static_cast<uint64_t>(k));
        Rng rng(rec.seed);
        rec.genotype = sample_genotype(rng, cfg.search.mode);

        const CandidateScore s = score_candidate_both(rec.genotype, batch, cfg.net, rec.seed);
        rec.score = s.sahd;
        rec.hd_score = s.hd;

        SpikingNetwork net = build_network(rec.genotype, cfg.net, rec.seed);
        TrainResult r = train(net, ds, cfg.train.tcfg, cfg.train.scfg, rec.seed);
        if (r.diverged) {
            std::cerr << "candidate " << k << " diverged: " << r.diagnostic << "\n";
            rec.trained_accuracy = 0.0;
        } else {
            double best = 0.0;
            for (const auto& m : r.metrics) best = std::max(best, m.test_acc);
            rec.trained_accuracy = best;
        }
        std::cerr << "candidate " << k << ": sahd " << format_score(rec.score) << " acc "
                  << *rec.trained_accuracy << "\n";
        records.push_back(std::move(rec));
    }

    std::vector<double> sahd_v, hd_v, acc_v;
    for (const auto& rec : records) {
        sahd_v.push_back(rec.score.singular ? -std::numeric_limits<double>::infinity()
                                            : rec.score.value);
        hd_v.push_back(rec.hd_score->singular ? -std::numeric_limits<double>::infinity()
                                              : rec.hd_score->value);
        acc_v.push_back(*rec.trained_accuracy);
    }
    const auto tau_sahd = kendall_tau(sahd_v, acc_v);
    const auto tau_hd = kendall_tau(hd_v, acc_v);
    int concordant = 0, discordant = 0;
    concordance_counts(sahd_v, acc_v, concordant, discordant);
    const double p = sign_test_p(concordant, discordant);

    ordered_json j;
    j["num_candidates"] = cfg.correlate_candidates;
    j["tau_sahd"] = tau_sahd ? ordered_json(*tau_sahd) : ordered_json(nullptr);
    j["tau_hd"] = tau_hd ? ordered_json(*tau_hd) : ordered_json(nullptr);
    j["concordant"] = concordant;
    j["discordant"] = discordant;
    j["sign_test_p"] = p;
    j["candidates"] = ordered_json::array();
    for (const auto& rec : records)
        j["candidates"].push_back({{"index", rec.sample_index},
                                   {"seed", rec.seed},
                                   {"sahd_score", format_score(rec.score)},
                                   {"hd_score", format_score(*rec.hd_score)},
                                   {"accuracy", *rec.trained_accuracy},
                                   {"genotype", compact_genotype(rec.genotype)}});
    write_text(dir / "correlate.json", j.dump(2) + "\n");

    SearchReport rep;
    rep.ranked = records;
    std::stable_sort(rep.ranked.begin(), rep.ranked.end(),
                     [](const CandidateRecord& a, const CandidateRecord& b) {
                         if (score_less(a.score, b.score) != score_less(b.score, a.score))
                             return score_less(b.score, a.score);
                         return a.sample_index < b.sample_index;
                     });
    rep.best_index = rep.ranked.front().sample_index;
    rep.master_seed = cfg.search.seed;
    rep.mode = mode_name(cfg.search.mode);
    write_text(dir / "report.txt", format_report(rep));

    std::cout << "tau_sahd " << (tau_sahd ? std::to_string(*tau_sahd) : "undefined") << "\n";
    std::cout << "tau_hd " << (tau_hd ? std::to_string(*tau_hd) : "undefined") << "\n";
    std::cout << "sign_test_p " << p << "\n";
    return 0;
}

int cmd_stats(const std::string& report_path, bool use_accuracy) {
    std::ifstream in(report_path);
    if (!in) throw ConfigError("cannot open report " + report_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<CandidateRecord> records = parse_report(text);
    auto stats = attribute_stats(records, use_accuracy);
    std::cout << "# attribute value mean_" << (use_accuracy ? "accuracy" : "score")
              << " count\n";
    for (const auto& [name, buckets] : stats)
        for (const auto& b : buckets)
            std::cout << name << " " << b.attribute_value << " " << b.mean_y << " " << b.count
                      << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Training-free architecture search for spiking networks"};
    app.require_subcommand(1);

    std::string config_path, out_dir, genotype_path, trace_out, report_path;
    bool use_accuracy = false;

    // common overrides applied on top of the config file
    std::optional<int> ov_candidates, ov_workers, ov_epochs;
    std::optional<uint64_t> ov_seed;
    std::optional<std::string> ov_mode;
    std::optional<double> ov_lr;

    auto add_common = [&](CLI::App* sub, bool needs_out) {
        sub->add_option("--config", config_path, "JSON config file")->required();
        if (needs_out) sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", ov_seed, "override search.seed and train.seed");
        sub->add_option("--candidates", ov_candidates, "override search.candidates");
        sub->add_option("--workers", ov_workers, "override search.workers");
        sub->add_option("--mode", ov_mode, "override search.mode");
        sub->add_option("--epochs", ov_epochs, "override train.epochs");
        sub->add_option("--lr", ov_lr, "override train.lr");
    };

    CLI::App* search = app.add_subcommand("search", "random search over cell genotypes");
    add_common(search, true);

    CLI::App* score = app.add_subcommand("score", "score one genotype without training");
    add_common(score, false);
    score->add_option("--genotype", genotype_path, "genotype JSON file")->required();
    score->add_option("--trace-out", trace_out, "write the activation trace dump here");

    CLI::App* train_cmd = app.add_subcommand("train", "train one genotype");
    add_common(train_cmd, true);
    train_cmd->add_option("--genotype", genotype_path, "genotype JSON file")->required();

    CLI::App* correlate = app.add_subcommand("correlate", "score and train a candidate set");
    add_common(correlate, true);

    CLI::App* stats = app.add_subcommand("stats", "attribute statistics from a report file");
    stats->add_option("--report", report_path, "report.txt from a search run")->required();
    stats->add_flag("--use-accuracy", use_accuracy, "bucket trained accuracy instead of score");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (stats->parsed()) return cmd_stats(report_path, use_accuracy);

        AppConfig cfg = parse_config(config_path);
        if (ov_seed) {
            cfg.search.seed = *ov_seed;
            cfg.train.seed = *ov_seed;
        }
        if (ov_candidates) cfg.search.candidates = *ov_candidates;
        if (ov_workers) cfg.search.workers = *ov_workers;
        if (ov_epochs) cfg.train.tcfg.epochs = *ov_epochs;
        if (ov_lr) cfg.train.tcfg.lr = *ov_lr;
        if (ov_mode && !mode_from_name(*ov_mode, cfg.search.mode))
            throw ConfigError("--mode must be 'forward_only' or 'forward_and_backward'");
        if (cfg.search.candidates < 1)
            throw ConfigError("config: search.candidates must be >= 1");

        if (search->parsed()) return cmd_search(std::move(cfg), out_dir);
        if (score->parsed()) return cmd_score(std::move(cfg), genotype_path, trace_out);
        if (train_cmd->parsed()) return cmd_train(std::move(cfg), genotype_path, out_dir);
        if (correlate->parsed()) return cmd_correlate(std::move(cfg), out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
