#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out, err;
};

std::string cli_bin() {
    const char* p = std::getenv("X3ECG_CLI_BIN");
    REQUIRE_MESSAGE(p != nullptr, "X3ECG_CLI_BIN must point at the CLI binary");
    return p;
}

CmdResult run_cli(const std::string& args) {
    static int counter = 0;
    TempDir cap("x3ecg-cli-io");
    fs::path out = cap / ("out" + std::to_string(counter));
    fs::path err = cap / ("err" + std::to_string(counter));
    ++counter;
    std::string cmd = cli_bin() + " " + args + " > " + out.string() + " 2> " + err.string();
    int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = testutil::read_file(out);
    r.err = testutil::read_file(err);
    return r;
}

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

// raw 3-lead signal container, little-endian
void write_ecg3(const fs::path& path, int fs, const std::vector<std::vector<float>>& leads) {
    std::ofstream os(path, std::ios::binary);
    REQUIRE(os.good());
    os.write("ECG3", 4);
    put(os, static_cast<uint16_t>(leads.size()));
    put(os, static_cast<uint64_t>(leads[0].size()));
    put(os, static_cast<uint32_t>(fs));
    for (const auto& l : leads)
        os.write(reinterpret_cast<const char*>(l.data()),
                 static_cast<std::streamsize>(l.size() * 4));
    REQUIRE(os.good());
}

std::vector<float> bump_lead(int fs, double duration_s, double period_s, double first_s) {
    std::vector<float> x(static_cast<size_t>(fs * duration_s), 0.0f);
    double sigma = 0.010;
    for (double t0 = first_s; t0 < duration_s; t0 += period_s)
        for (size_t i = 0; i < x.size(); ++i) {
            double dt = static_cast<double>(i) / fs - t0;
            x[i] += static_cast<float>(std::exp(-dt * dt / (2.0 * sigma * sigma)));
        }
    return x;
}

void write_corpus_manifest(const fs::path& path, const std::vector<std::string>& rows) {
    std::string body = "# x3ecg-manifest schema=custom task=multi-class classes=A|B\n";
    body += "id,path,age,gender,labels\n";
    for (const auto& r : rows) body += r + "\n";
    testutil::write_file(path, body);
}

std::set<std::string> dir_listing(const fs::path& dir) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
    return names;
}

}  // namespace

TEST_CASE("help and usage errors") {
    auto help = run_cli("--help");
    CHECK(help.exit_code == 0);
    CHECK(help.out.find("synth") != std::string::npos);
    CHECK(help.out.find("preprocess") != std::string::npos);
    CHECK(help.out.find("cv") != std::string::npos);

    CHECK(run_cli("train --help").exit_code == 0);
    CHECK(run_cli("").exit_code == 2);                       // subcommand required
    CHECK(run_cli("warp-speed").exit_code == 2);             // unknown subcommand
    CHECK(run_cli("synth --frobnicate 1").exit_code == 2);   // unknown flag

    auto r = run_cli("train");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("error:") != std::string::npos);
    CHECK(r.err.find("manifest") != std::string::npos);
}

TEST_CASE("synth is byte-deterministic per seed") {
    TempDir tmp("x3ecg-cli");
    fs::path a = tmp / "a", b = tmp / "b";
    std::string common = "synth --classes 2 --per-class 3 --seed 9 --out ";
    REQUIRE(run_cli(common + a.string()).exit_code == 0);
    REQUIRE(run_cli(common + b.string()).exit_code == 0);

    auto names_a = dir_listing(a);
    CHECK(names_a == dir_listing(b));
    CHECK(names_a.count("manifest.csv") == 1);
    CHECK(names_a.count("manifest.csv.ngt") == 1);
    CHECK(names_a.count("s0000.ecg") == 1);
    CHECK(names_a.size() == 8);  // 6 recordings + manifest + sidecar
    for (const auto& name : names_a)
        CHECK(testutil::read_file(a / name) == testutil::read_file(b / name));

    // another seed must diverge in the signal payloads
    fs::path c = tmp / "c";
    REQUIRE(run_cli("synth --classes 2 --per-class 3 --seed 10 --out " + c.string()).exit_code ==
            0);
    CHECK(testutil::read_file(a / "s0000.ecg") != testutil::read_file(c / "s0000.ecg"));
}

TEST_CASE("synth argument validation") {
    TempDir tmp("x3ecg-cli");
    auto r = run_cli("synth --per-class 0 --out " + (tmp / "x").string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("per_class") != std::string::npos);

    CHECK(run_cli("synth --classes 9 --out " + (tmp / "y").string()).exit_code == 2);
    CHECK(run_cli("synth --leads 5 --out " + (tmp / "z").string()).exit_code == 2);

    // refuses to clobber a non-empty directory unless forced
    fs::path busy = tmp / "busy";
    fs::create_directories(busy);
    testutil::write_file(busy / "keep.txt", "data");
    auto clobber = run_cli("synth --classes 2 --per-class 1 --out " + busy.string());
    CHECK(clobber.exit_code == 2);
    CHECK(clobber.err.find("not empty") != std::string::npos);
    CHECK(run_cli("synth --classes 2 --per-class 1 --force --out " + busy.string()).exit_code ==
          0);
}

TEST_CASE("preprocess skips unusable recordings and fails the run") {
    TempDir tmp("x3ecg-cli");
    fs::path corpus = tmp / "corpus";
    fs::create_directories(corpus);

    auto good = bump_lead(500, 10.0, 1.0, 0.5);
    write_ecg3(corpus / "g1.ecg", 500, {good, good, good});
    write_ecg3(corpus / "g2.ecg", 500, {good, good, good});
    auto slow = bump_lead(250, 10.0, 1.0, 0.5);
    write_ecg3(corpus / "bad.ecg", 250, {slow, slow, slow});
    write_corpus_manifest(corpus / "manifest.csv", {
                                                       "g1,g1.ecg,40,m,A",
                                                       "bad,bad.ecg,50,f,B",
                                                       "g2,g2.ecg,60,f,B",
                                                   });

    fs::path out = tmp / "prep";
    auto r = run_cli("preprocess --manifest " + (corpus / "manifest.csv").string() + " --out " +
                     out.string());
    CHECK(r.exit_code == 1);  // one skipped file is a data-dependent failure
    CHECK(r.err.find("bad: skipped") != std::string::npos);
    CHECK(r.err.find("unsupported sampling rate") != std::string::npos);
    CHECK(r.out.find("g1: ok") != std::string::npos);
    CHECK(r.out.find("g2: ok") != std::string::npos);

    // the survivors are written and re-listed in the output manifest
    CHECK(fs::exists(out / "g1.ecg"));
    CHECK(fs::exists(out / "g2.ecg"));
    CHECK(!fs::exists(out / "bad.ecg"));
    std::string outman = testutil::read_file(out / "manifest.csv");
    CHECK(outman.find("g1,") != std::string::npos);
    CHECK(outman.find("bad,") == std::string::npos);

    // feeding preprocessed output back in is refused per-file
    fs::path twice = tmp / "twice";
    auto r2 = run_cli("preprocess --manifest " + (out / "manifest.csv").string() + " --out " +
                      twice.string());
    CHECK(r2.exit_code == 1);
    CHECK(r2.err.find("already preprocessed") != std::string::npos);
}

TEST_CASE("rpeaks prints indices to stdout and the count to stderr") {
    TempDir tmp("x3ecg-cli");
    auto lead = bump_lead(500, 10.0, 1.0, 0.5);
    write_ecg3(tmp / "sig.ecg", 500, {lead, lead, lead});

    auto r = run_cli("rpeaks " + (tmp / "sig.ecg").string());
    CHECK(r.exit_code == 0);
    CHECK(r.err == "count=10\n");
    std::istringstream is(r.out);
    std::string line;
    int k = 0;
    while (std::getline(is, line)) {
        long idx = std::stol(line);
        CHECK(std::labs(idx - (250 + 500 * k)) <= 2);
        ++k;
    }
    CHECK(k == 10);

    auto missing = run_cli("rpeaks " + (tmp / "absent.ecg").string());
    CHECK(missing.exit_code == 2);
    CHECK(missing.err.find("cannot open signal file") != std::string::npos);
    CHECK(run_cli("rpeaks").exit_code == 2);  // the path argument is required
}

TEST_CASE("train writes the full run directory") {
    TempDir tmp("x3ecg-cli");
    fs::path synth_dir = tmp / "synth";
    fs::path prep_dir = tmp / "prep";
    fs::path run_dir = tmp / "run";

    REQUIRE(run_cli("synth --classes 2 --per-class 4 --seed 3 --out " + synth_dir.string())
                .exit_code == 0);
    REQUIRE(run_cli("preprocess --manifest " + (synth_dir / "manifest.csv").string() + " --out " +
                    prep_dir.string())
                .exit_code == 0);

    auto r = run_cli("train --manifest " + (prep_dir / "manifest.csv").string() +
                     " --preset tiny --epochs 2 --cosine-epochs 2 --batch-size 2 --seed 4" +
                     " --run-dir " + run_dir.string());
    CHECK(r.exit_code == 0);

    CHECK(fs::exists(run_dir / "config.echo"));
    CHECK(fs::exists(run_dir / "history.csv"));
    CHECK(fs::exists(run_dir / "checkpoint"));
    CHECK(fs::exists(run_dir / "metrics.csv"));

    std::string echo = testutil::read_file(run_dir / "config.echo");
    CHECK(echo.find("preset=tiny\n") != std::string::npos);
    CHECK(echo.find("epochs=2\n") != std::string::npos);
    CHECK(echo.find("seed=4\n") != std::string::npos);
    CHECK(echo.find("lambda=0.02\n") != std::string::npos);

    std::string hist = testutil::read_file(run_dir / "history.csv");
    CHECK(hist.rfind("epoch,lr,train_cls,train_hc,val_cls,val_hc,val_macro_f1\n", 0) == 0);
    CHECK(std::count(hist.begin(), hist.end(), '\n') == 3);  // header + two epochs

    std::string metrics = testutil::read_file(run_dir / "metrics.csv");
    CHECK(metrics.rfind("class,f1,threshold\n", 0) == 0);
    CHECK(metrics.find("BPM50,") != std::string::npos);
    CHECK(metrics.find("macro_f1,") != std::string::npos);
    CHECK(metrics.find("accuracy,") != std::string::npos);

    // a config file provides flags, and explicit flags override it
    fs::path conf = tmp / "run.conf";
    testutil::write_file(conf, "preset=tiny\nepochs=5\ncosine_epochs=2\nbatch_size=2\n");
    fs::path run2 = tmp / "run2";
    auto r2 = run_cli("train --manifest " + (prep_dir / "manifest.csv").string() + " --config " +
                      conf.string() + " --epochs 2 --run-dir " + run2.string());
    CHECK(r2.exit_code == 0);
    std::string echo2 = testutil::read_file(run2 / "config.echo");
    CHECK(echo2.find("epochs=2\n") != std::string::npos);
    CHECK(echo2.find("preset=tiny\n") != std::string::npos);
}
