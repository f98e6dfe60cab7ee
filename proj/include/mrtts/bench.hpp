#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mrtts/config.hpp"
#include "mrtts/features.hpp"
#include "mrtts/model.hpp"

namespace mrtts {

struct BenchRecord {
    ModelKind model = ModelKind::kMultirate;
    double audio_seconds = 0.0;  // frames / 80
    double synth_seconds = 0.0;  // median wall time
    double rtf = 0.0;            // synth_seconds / audio_seconds
    double first_frame_latency_ms = 0.0;
    std::uint64_t per_frame_macs = 0;
    std::uint64_t encoder_macs = 0;
    std::size_t repeats = 0;
    std::size_t frames = 0;
};

struct BenchOptions {
    std::vector<ModelKind> models = {ModelKind::kMultirate, ModelKind::kMultirateNoPool, ModelKind::kPlainRecurrent,
                                     ModelKind::kSelfAttention};
    std::vector<double> lengths = {10, 20, 40, 60};  // target audio seconds
    std::uint64_t seed = 0;
    std::size_t repeats = 3;
    // Minimum number of timing rounds. Models whose runs all take at most
    // shared_run_seconds are timed together in shared rounds; others get
    // their own. Each round times every case of its group, running short
    // utterances several times so that each case spends about
    // min(slowest run, round_target_seconds) in the round. Rounds continue
    // past `repeats` until a group has spent model_budget_seconds per model,
    // up to max_rounds.
    double shared_run_seconds = 3.0;
    double round_target_seconds = 1.0;
    double model_budget_seconds = 64.0;
    std::size_t max_rounds = 16;
    ModelConfig config;
    // Timed runs shorter than this many clock ticks trigger more repeats.
    double min_ticks = 1000.0;
};

// One utterance and the model to synthesize it with.
struct BenchCase {
    const Model* model = nullptr;
    ContextTree tree;
};

// One full synthesis; returns the number of frames produced. `first_frame`
// receives the seconds from start to frame 0, if non-null.
std::size_t synthesize_once(const BenchCase& c, double* first_frame = nullptr);

// Single-threaded, pinned, warm-up excluded, medians over all timed runs.
// MAC counts come from a separate instrumented pass.
std::vector<BenchRecord> run_bench(const BenchOptions& opts);

// Cold-start time to the first frame in milliseconds (median of `repeats`).
double first_frame_latency(const BenchCase& c, std::size_t repeats = 3);

// MACs before frame 0 can be emitted (encoder work plus one frame).
std::uint64_t first_frame_macs(const BenchCase& c);

inline constexpr const char* kBenchCsvHeader =
    "model,audio_s,synth_s,rtf,first_frame_ms,per_frame_macs,encoder_macs,repeats";

void write_bench_csv(const std::vector<BenchRecord>& records, std::ostream& out);
std::string render_rtf_svg(const std::vector<BenchRecord>& records);

// Writes <dir>/bench.csv and <dir>/rtf.svg.
void emit_report(const std::vector<BenchRecord>& records, const std::string& dir);

}  // namespace mrtts
