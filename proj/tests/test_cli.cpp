#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "mrtts/bytes.hpp"
#include "mrtts/cli.hpp"
#include "mrtts/decoder.hpp"
#include "mrtts/oracle.hpp"
#include "support.hpp"

using namespace mrtts;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run mrtts_run(std::initializer_list<std::string> args) {
    std::vector<std::string> owned = {"mrtts"};
    owned.insert(owned.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : owned) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::uint8_t> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A scratch directory with a seed-1 multi-rate weight file and a 5-frame tree.
struct Workdir {
    fs::path dir;
    fs::path weights;
    fs::path tree;

    explicit Workdir(const char* name) : dir(fs::temp_directory_path() / name) {
        fs::remove_all(dir);
        fs::create_directories(dir);
        weights = dir / "w.smw";
        tree = dir / "five.json";
        weights_save(test::multirate_weights(1), weights.string());
        save_context_tree(test::tree_with_durations({2, 1, 2}), tree.string());
    }
    ~Workdir() { fs::remove_all(dir); }

    std::string path(const char* leaf) const { return (dir / leaf).string(); }
};

Matrix read_frames(const fs::path& p) {
    const auto data = slurp(p);
    REQUIRE(data.size() >= 8);
    std::uint64_t n = 0;
    std::memcpy(&n, data.data(), 8);
    REQUIRE(data.size() == 8 + n * kFrameDim * 4);
    Matrix m(n, kFrameDim);
    std::memcpy(m.storage().data(), data.data() + 8, n * kFrameDim * 4);
    return m;
}

}  // namespace

TEST_CASE("validate passes and a perturbed LSTM fails") {
    CHECK(mrtts_run({"validate", "--cases", "10"}).code == 0);
    const Run bad = mrtts_run({"validate", "--cases", "10", "--perturb-lstm", "0.01"});
    CHECK(bad.code == 1);
    CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
    CHECK(mrtts_run({}).code == 2);
    CHECK(mrtts_run({"frobnicate"}).code == 2);
    CHECK(mrtts_run({"bench", "--models", "wavenet"}).code == 2);
    CHECK(mrtts_run({"bench", "--lengths", "ten"}).code == 2);
    CHECK(mrtts_run({"--help"}).code == 0);
}

TEST_CASE("synth writes a count header and 19 floats per frame") {
    const Workdir w("mrtts_cli_synth");
    const std::string out = w.path("five.bin");
    REQUIRE(mrtts_run({"synth", w.tree.string(), "-w", w.weights.string(), "-o", out}).code == 0);
    CHECK(fs::file_size(out) == 8 + 5 * 19 * 4);

    const std::string again = w.path("again.bin");
    REQUIRE(mrtts_run({"synth", w.tree.string(), "-w", w.weights.string(), "-o", again}).code == 0);
    CHECK(slurp(out) == slurp(again));

    const ModelWeights weights = weights_load(w.weights.string());
    const ContextTree tree = load_context_tree(w.tree.string());
    const Encodings enc = encode_tree(tree, weights.encoder(), weights.config);
    const Matrix ref = oracle::oracle_batch_decode(unroll_frames(tree), enc, weights.decoder(), true);
    CHECK(oracle::compare(read_frames(out), ref).within(oracle::kDecodeTol));
}

TEST_CASE("synth --text writes a CSV with a header row") {
    const Workdir w("mrtts_cli_text");
    const std::string out = w.path("five.csv");
    REQUIRE(mrtts_run({"synth", w.tree.string(), "-w", w.weights.string(), "-o", out, "--text"}).code == 0);
    std::ifstream in(out);
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("y0,y1,", 0) == 0);
    CHECK(line.substr(line.size() - 4) == ",y18");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 5);
}

TEST_CASE("synth over several trees with --jobs matches one-at-a-time output") {
    const Workdir w("mrtts_cli_jobs");
    const fs::path corpus = w.dir / "corpus";
    REQUIRE(mrtts_run({"gen-corpus", "--seed", "3", "--count", "3", "-o", corpus.string()}).code == 0);
    const std::string a = (corpus / "utt0000.json").string();
    const std::string b = (corpus / "utt0001.json").string();
    const std::string c = (corpus / "utt0002.json").string();
    REQUIRE(mrtts_run({"synth", a, b, c, "-w", w.weights.string(), "-o", w.path("many"), "--jobs", "3"}).code == 0);
    REQUIRE(mrtts_run({"synth", b, "-w", w.weights.string(), "-o", w.path("single.bin")}).code == 0);
    CHECK(slurp(w.dir / "many" / "utt0001.bin") == slurp(w.path("single.bin")));
    CHECK(fs::exists(w.dir / "many" / "utt0000.bin"));
    CHECK(fs::exists(w.dir / "many" / "utt0002.bin"));
}

TEST_CASE("synth file errors map to exit codes") {
    const Workdir w("mrtts_cli_errors");
    const std::string out = w.path("x.bin");
    CHECK(mrtts_run({"synth", w.tree.string(), "-w", w.path("missing.smw"), "-o", out}).code == 3);
    {
        std::ofstream bad(w.path("bad.smw"), std::ios::binary);
        bad << "NOPE1234567890";
    }
    CHECK(mrtts_run({"synth", w.tree.string(), "-w", w.path("bad.smw"), "-o", out}).code == 4);
    {
        std::ofstream bad(w.path("bad.json"));
        bad << "{\"words\": 3}";
    }
    CHECK(mrtts_run({"synth", w.path("bad.json"), "-w", w.weights.string(), "-o", out}).code == 4);
    CHECK(mrtts_run({"synth", w.tree.string(), "-w", w.weights.string(), "--model", "selfattn", "-o", out}).code == 4);
}

TEST_CASE("init-weights is deterministic") {
    const Workdir w("mrtts_cli_init");
    REQUIRE(mrtts_run({"init-weights", "--seed", "5", "--models", "lstm", "-o", w.path("a.smw")}).code == 0);
    REQUIRE(mrtts_run({"init-weights", "--seed", "5", "--models", "lstm", "-o", w.path("b.smw")}).code == 0);
    CHECK(slurp(w.path("a.smw")) == slurp(w.path("b.smw")));
    CHECK(weights_load(w.path("a.smw")).has(ModelKind::kPlainRecurrent));
    CHECK_FALSE(weights_load(w.path("a.smw")).has(ModelKind::kMultirate));
}

TEST_CASE("gen-corpus writes loadable trees of the requested lengths") {
    const Workdir w("mrtts_cli_corpus");
    const fs::path corpus = w.dir / "corpus";
    REQUIRE(mrtts_run({"gen-corpus", "--seed", "1", "--lengths", "2,4", "-o", corpus.string()}).code == 0);
    const ContextTree t0 = load_context_tree((corpus / "utt0000.json").string());
    const ContextTree t1 = load_context_tree((corpus / "utt0001.json").string());
    CHECK(t0.frame_count() >= 144);
    CHECK(t1.frame_count() >= 288);
}

TEST_CASE("bench prints one CSV row per model and length") {
    const Workdir w("mrtts_cli_bench");
    const Run r = mrtts_run({"bench", "--lengths", "1,2", "--models", "multirate,lstm", "-o", w.path("report")});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 5);
    CHECK(fs::exists(w.dir / "report" / "bench.csv"));
    CHECK(fs::exists(w.dir / "report" / "rtf.svg"));
}
