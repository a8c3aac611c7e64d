// Exercises the command line binary end to end. The binary path arrives as
// the last command line argument (set by the test harness).
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string g_cli_path;

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "snasnet_cli_test_out.txt";
    const std::string cmd = "'" + g_cli_path + "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream buf;
    buf << in.rdbuf();
    r.output = buf.str();
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "snasnet_cli_test";
    fs::create_directories(dir);
    return dir;
}

fs::path write_small_config() {
    const fs::path path = work_dir() / "config.json";
    std::ofstream out(path);
    out << R"({
  "data": {"kind": "synthetic", "num_classes": 2, "image_size": 8,
           "samples_per_class_train": 4, "samples_per_class_test": 2,
           "noise_std": 0.3, "seed": 3},
  "network": {"base_channels": 4, "timesteps": 2, "voting_k": 2, "fc_hidden": 8},
  "search": {"candidates": 6, "mode": "forward_and_backward", "batch_samples": 4,
             "workers": 1, "seed": 11, "top_k": 2, "record_hd": true},
  "train": {"lr": 0.05, "epochs": 2, "batch_size": 4, "augment": false}
})";
    return path;
}

} // namespace

TEST_CASE("help and usage errors") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("search").exit_code == 2);       // missing required options
    CHECK(run_cli("frobnicate").exit_code == 2);   // unknown subcommand
}

TEST_CASE("config validation fails closed") {
    const fs::path dir = work_dir();
    const fs::path cfg = write_small_config();

    // unknown key
    const fs::path bad = dir / "bad_config.json";
    std::ofstream(bad) << R"({"data": {"kind": "synthetic"}, "serach": {}})";
    RunResult r = run_cli("search --config '" + bad.string() + "' --out '" +
                          (dir / "never").string() + "'");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("unknown key") != std::string::npos);

    // malformed JSON
    const fs::path broken = dir / "broken_config.json";
    std::ofstream(broken) << "{not json";
    CHECK(run_cli("search --config '" + broken.string() + "' --out '" +
                  (dir / "never").string() + "'")
              .exit_code == 2);

    // invalid override value
    CHECK(run_cli("search --config '" + cfg.string() + "' --out '" + (dir / "never").string() +
                  "' --candidates 0")
              .exit_code == 2);
    CHECK(run_cli("search --config '" + cfg.string() + "' --out '" + (dir / "never").string() +
                  "' --mode sideways")
              .exit_code == 2);

    // missing config file
    CHECK(run_cli("search --config /nonexistent.json --out '" + (dir / "never").string() + "'")
              .exit_code == 2);
}

TEST_CASE("search run: outputs, determinism across workers") {
    const fs::path dir = work_dir();
    const fs::path cfg = write_small_config();
    const fs::path out1 = dir / "run1";
    const fs::path out2 = dir / "run2";
    fs::remove_all(out1);
    fs::remove_all(out2);

    RunResult r1 = run_cli("search --config '" + cfg.string() + "' --out '" + out1.string() + "'");
    CHECK(r1.exit_code == 0);
    CHECK(fs::exists(out1 / "config.json"));
    CHECK(fs::exists(out1 / "report.txt"));
    CHECK(fs::exists(out1 / "summary.txt"));
    CHECK(fs::exists(out1 / "genotype_rank1.json"));
    CHECK(fs::exists(out1 / "genotype_rank2.json"));
    CHECK(r1.output.find("best_index") != std::string::npos);

    RunResult r2 = run_cli("search --config '" + cfg.string() + "' --out '" + out2.string() +
                           "' --workers 3");
    CHECK(r2.exit_code == 0);
    CHECK(read_file(out1 / "report.txt") == read_file(out2 / "report.txt"));
    CHECK(read_file(out1 / "genotype_rank1.json") == read_file(out2 / "genotype_rank1.json"));
}

TEST_CASE("score and stats consume search outputs") {
    const fs::path dir = work_dir();
    const fs::path cfg = write_small_config();
    const fs::path out = dir / "run_score";
    fs::remove_all(out);
    REQUIRE(run_cli("search --config '" + cfg.string() + "' --out '" + out.string() + "'")
                .exit_code == 0);

    const fs::path trace = dir / "trace.bin";
    RunResult rs = run_cli("score --config '" + cfg.string() + "' --genotype '" +
                           (out / "genotype_rank1.json").string() + "' --trace-out '" +
                           trace.string() + "'");
    CHECK(rs.exit_code == 0);
    CHECK(rs.output.find("sahd_score") != std::string::npos);
    CHECK(rs.output.find("hd_score") != std::string::npos);
    CHECK(fs::exists(trace));
    CHECK(fs::file_size(trace) > 0);

    RunResult rt = run_cli("stats --report '" + (out / "report.txt").string() + "'");
    CHECK(rt.exit_code == 0);
    CHECK(rt.output.find("fw") != std::string::npos);

    // bad genotype file
    const fs::path junk = dir / "junk_genotype.json";
    std::ofstream(junk) << "{\"nodes\": 4}";
    CHECK(run_cli("score --config '" + cfg.string() + "' --genotype '" + junk.string() + "'")
              .exit_code == 2);
}

TEST_CASE("train run produces metrics and a checkpoint") {
    const fs::path dir = work_dir();
    const fs::path cfg = write_small_config();
    const fs::path srch = dir / "run_for_train";
    fs::remove_all(srch);
    REQUIRE(run_cli("search --config '" + cfg.string() + "' --out '" + srch.string() + "'")
                .exit_code == 0);

    const fs::path out = dir / "run_train";
    fs::remove_all(out);
    RunResult r = run_cli("train --config '" + cfg.string() + "' --genotype '" +
                          (srch / "genotype_rank1.json").string() + "' --out '" + out.string() +
                          "'");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("final_test_acc") != std::string::npos);
    CHECK(fs::exists(out / "metrics.txt"));
    CHECK(fs::exists(out / "checkpoint.bin"));
    const std::string metrics = read_file(out / "metrics.txt");
    CHECK(metrics.find("# epoch") != std::string::npos);
    // two epochs logged
    int lines = 0;
    for (char c : metrics)
        if (c == '\n') ++lines;
    CHECK(lines == 3);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: test_cli <path-to-snasnet-cli> [doctest args]\n");
        return 1;
    }
    g_cli_path = argv[argc - 1];
    doctest::Context ctx(argc - 1, argv);
    return ctx.run();
}
