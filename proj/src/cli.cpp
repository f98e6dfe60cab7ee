#include "mrtts/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "mrtts/bench.hpp"
#include "mrtts/bytes.hpp"
#include "mrtts/errors.hpp"
#include "mrtts/features.hpp"
#include "mrtts/model.hpp"
#include "mrtts/numerics.hpp"
#include "mrtts/parallel.hpp"
#include "mrtts/validate.hpp"
#include "mrtts/weights.hpp"

namespace fs = std::filesystem;

namespace mrtts {

namespace {

std::vector<ModelKind> parse_models(const std::vector<std::string>& names) {
    std::vector<ModelKind> kinds;
    for (const auto& n : names) {
        const auto k = parse_model_kind(n);
        if (!k) throw ConfigError("unknown model '" + n + "' (expected multirate, multirate-nopool, lstm or selfattn)");
        if (std::find(kinds.begin(), kinds.end(), *k) == kinds.end()) kinds.push_back(*k);
    }
    return kinds;
}

struct ConfigFlags {
    std::optional<std::size_t> lmax;
    bool no_pooling = false;
    bool no_feedback = false;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--lmax", lmax, "Pooled length cap for every attention head")->check(CLI::PositiveNumber);
        cmd->add_flag("--no-pooling", no_pooling, "Disable dynamic max-pooling");
        cmd->add_flag("--no-feedback", no_feedback, "Do not feed the previous frame back into the decoder");
    }

    void apply(ModelConfig& c) const {
        if (lmax) c.set_l_max(*lmax);
        if (no_pooling) c.pooling = false;
        if (no_feedback) c.feedback = false;
    }
};

// Binary frame file: u64 LE frame count, then frames x 19 float32 LE.
class FrameWriter {
public:
    FrameWriter(const fs::path& path, std::size_t frames, bool text) : path_(path), text_(text) {
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
        if (text_) {
            for (std::size_t i = 0; i < kFrameDim; ++i) out_ << (i ? "," : "") << "y" << i;
            out_ << '\n';
        } else {
            std::vector<std::uint8_t> header;
            bytes::put_uint<std::uint64_t>(header, frames);
            write(header);
        }
        buf_.reserve(kFrameDim * 4);
    }

    bool operator()(std::size_t, std::span<const float> y) {
        if (text_) {
            char num[32];
            for (std::size_t i = 0; i < y.size(); ++i) {
                std::snprintf(num, sizeof(num), "%.9g", static_cast<double>(y[i]));
                out_ << (i ? "," : "") << num;
            }
            out_ << '\n';
        } else {
            buf_.clear();
            bytes::put_f32s(buf_, y);
            write(buf_);
        }
        return static_cast<bool>(out_);
    }

    void finish() {
        out_.flush();
        if (!out_) throw IoError("write failed: " + path_.string());
    }

private:
    void write(const std::vector<std::uint8_t>& b) {
        out_.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    }

    fs::path path_;
    bool text_;
    std::ofstream out_;
    std::vector<std::uint8_t> buf_;
};

std::size_t synth_file(const Model& model, const fs::path& tree_path, const fs::path& out_path, bool text) {
    const ContextTree tree = load_context_tree(tree_path.string());
    FrameWriter writer(out_path, tree.frame_count(), text);
    std::size_t n = 0;
    try {
        n = synthesize(model, tree, std::ref(writer));
    } catch (const SinkError& e) {
        throw IoError("write failed: " + out_path.string() + " after " + std::to_string(e.frames_emitted()) + " frames");
    } catch (const ShapeError& e) {
        throw FormatError(tree_path.string() + ": " + e.what());
    }
    writer.finish();
    return n;
}

int cmd_synth(const std::vector<std::string>& trees, const std::string& weights_path, const std::string& model_name_arg,
              const std::string& out, bool text, std::size_t jobs, const ConfigFlags& flags, std::ostream& os) {
    const auto kinds = parse_models({model_name_arg});
    ModelWeights weights = weights_load(weights_path);
    flags.apply(weights.config);
    weights.config.validate();
    const Model model = prepare_model(weights, kinds.front());

    if (trees.size() == 1 && !fs::is_directory(out)) {
        const std::size_t n = synth_file(model, trees.front(), out, text);
        os << n << " frames -> " << out << '\n';
        return 0;
    }

    // Several inputs: one output per tree inside the `out` directory.
    std::error_code ec;
    fs::create_directories(out, ec);
    if (!fs::is_directory(out)) throw IoError("cannot create output directory " + out);
    std::vector<fs::path> outputs;
    for (const auto& t : trees) outputs.push_back(fs::path(out) / (fs::path(t).stem().string() + (text ? ".csv" : ".bin")));

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;
    std::vector<std::size_t> counts(trees.size(), 0);
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < trees.size();) {
            try {
                counts[i] = synth_file(model, trees[i], outputs[i], text);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, trees.size());
    if (n_threads == 1) {
        worker();
    } else {
        // Parallelism is across files, so kernels stay single-threaded.
        parallel::ScopedThreads single(1);
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < n_threads; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    for (std::size_t i = 0; i < trees.size(); ++i) os << counts[i] << " frames -> " << outputs[i].string() << '\n';
    return 0;
}

int cmd_validate(std::uint64_t seed, std::size_t cases, float perturb, std::ostream& os) {
    fault::set_lstm_offset(perturb);
    std::vector<ValidationCheck> checks;
    try {
        checks = run_validation(seed, cases);
    } catch (...) {
        fault::set_lstm_offset(0.0f);
        throw;
    }
    fault::set_lstm_offset(0.0f);
    bool ok = true;
    for (const auto& c : checks) {
        char line[200];
        std::snprintf(line, sizeof(line), "%-4s %-18s compared=%-8zu max_abs=%.3e max_rel=%.3e tol=%.0e\n",
                      c.passed() ? "ok" : "FAIL", c.report.name.c_str(), c.report.compared, c.report.max_abs_err,
                      c.report.max_rel_err, c.tolerance);
        os << line;
        ok = ok && c.passed();
    }
    return ok ? 0 : 1;
}

int cmd_bench(const std::vector<std::string>& models, const std::vector<double>& lengths, std::uint64_t seed,
              std::size_t repeats, const std::string& out, const ConfigFlags& flags, std::ostream& os) {
    BenchOptions opts;
    if (!models.empty()) opts.models = parse_models(models);
    if (!lengths.empty()) opts.lengths = lengths;
    opts.seed = seed;
    opts.repeats = repeats;
    flags.apply(opts.config);
    opts.config.validate();
    const auto records = run_bench(opts);
    emit_report(records, out);
    write_bench_csv(records, os);
    return 0;
}

int cmd_gen_corpus(std::uint64_t seed, std::size_t count, const std::vector<double>& lengths, const std::string& out,
                   std::ostream& os) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (!fs::is_directory(out)) throw IoError("cannot create output directory " + out);
    std::vector<ContextTree> trees;
    if (lengths.empty()) {
        CorpusSpec spec;
        spec.utterances = count;
        trees = synth_corpus(seed, spec);
    } else {
        for (std::size_t i = 0; i < lengths.size(); ++i) {
            CorpusSpec spec;
            spec.target_seconds = lengths[i];
            trees.push_back(synth_corpus(seed + i, spec).front());
        }
    }
    for (std::size_t i = 0; i < trees.size(); ++i) {
        std::ostringstream name;
        name << "utt" << std::setw(4) << std::setfill('0') << i << ".json";
        const auto path = fs::path(out) / name.str();
        save_context_tree(trees[i], path.string());
        os << path.string() << " " << trees[i].frame_count() << " frames\n";
    }
    return 0;
}

int cmd_init_weights(std::uint64_t seed, const std::vector<std::string>& models, const std::string& out,
                     const ConfigFlags& flags, std::ostream& os) {
    ModelConfig config;
    flags.apply(config);
    config.validate();
    std::vector<ModelKind> kinds(kModelKinds.begin(), kModelKinds.end());
    if (!models.empty()) kinds = parse_models(models);
    const ModelWeights w = weights_init(seed, config, kinds);
    weights_save(w, out);
    const auto data = w.to_bytes();
    os << out << " " << data.size() << " bytes fnv1a64=" << std::hex << std::setw(16) << std::setfill('0')
       << bytes::fnv1a64(data) << std::dec << '\n';
    return 0;
}

std::vector<std::string> split_commas(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::stringstream ss(item);
        for (std::string part; std::getline(ss, part, ',');) {
            if (!part.empty()) out.push_back(part);
        }
    }
    return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-rate attention spectrum model: synthesis, validation and benchmarks", "mrtts"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand help for all subcommands");

    std::uint64_t seed = 0;
    std::string out_path;
    std::vector<std::string> models;
    std::vector<std::string> length_args;
    ConfigFlags flags;

    auto* synth = app.add_subcommand("synth", "Synthesize frames for one or more context-tree files");
    std::vector<std::string> trees;
    std::string weights_path;
    std::string model = "multirate";
    bool text = false;
    std::size_t jobs = 1;
    synth->add_option("trees", trees, "Context-tree JSON files")->required()->check(CLI::ExistingFile);
    synth->add_option("-w,--weights", weights_path, "Weight file")->required();
    synth->add_option("--model", model, "multirate | multirate-nopool | lstm | selfattn");
    synth->add_option("-o,--out", out_path, "Output file, or directory for several trees")->required();
    synth->add_flag("--text", text, "Write CSV frames instead of binary");
    synth->add_option("--jobs", jobs, "Files synthesized concurrently")->check(CLI::PositiveNumber);
    flags.add_to(synth);

    auto* bench = app.add_subcommand("bench", "Run the RTF / latency / MAC benchmark");
    std::size_t repeats = 3;
    bench->add_option("--model,--models", models, "Models to run (comma separated)");
    bench->add_option("--lengths", length_args, "Target audio lengths in seconds (comma separated)");
    bench->add_option("--seed", seed, "Seed for weights and utterances");
    bench->add_option("--repeats", repeats, "Timed repeats per record (>= 3)");
    bench->add_option("-o,--out", out_path, "Report directory")->default_val("bench_out");
    flags.add_to(bench);

    auto* validate = app.add_subcommand("validate", "Compare every fast kernel against its reference");
    std::size_t cases = 50;
    float perturb = 0.0f;
    validate->add_option("--seed", seed, "Seed for the random cases");
    validate->add_option("--cases", cases, "Random cases per kernel")->check(CLI::PositiveNumber);
    validate->add_option("--perturb-lstm", perturb, "Test hook: add an offset to every LSTM output")
        ->group("");

    auto* init = app.add_subcommand("init-weights", "Write seeded random weights");
    init->add_option("--seed", seed, "PRNG seed");
    init->add_option("--model,--models", models, "Models to include (default: all)");
    init->add_option("-o,--out", out_path, "Weight file")->required();
    flags.add_to(init);

    auto* corpus = app.add_subcommand("gen-corpus", "Write synthetic context trees");
    std::size_t count = 1;
    corpus->add_option("--seed", seed, "PRNG seed");
    corpus->add_option("--count", count, "Number of utterances (ignored with --lengths)")->check(CLI::PositiveNumber);
    corpus->add_option("--lengths", length_args, "One utterance per target length in seconds (comma separated)");
    corpus->add_option("-o,--out", out_path, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
    }

    try {
        models = split_commas(models);
        std::vector<double> lengths;
        for (const auto& s : split_commas(length_args)) {
            try {
                std::size_t used = 0;
                lengths.push_back(std::stod(s, &used));
                if (used != s.size()) throw std::invalid_argument(s);
            } catch (const std::logic_error&) {
                throw ConfigError("bad length '" + s + "'");
            }
        }
        if (*synth) return cmd_synth(trees, weights_path, model, out_path, text, jobs, flags, out);
        if (*bench) return cmd_bench(models, lengths, seed, repeats, out_path, flags, out);
        if (*validate) return cmd_validate(seed, cases, perturb, out);
        if (*init) return cmd_init_weights(seed, models, out_path, flags, out);
        if (*corpus) return cmd_gen_corpus(seed, count, lengths, out_path, out);
    } catch (const ConfigError& e) {
        err << "mrtts: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kUsage);
    } catch (const Error& e) {
        err << "mrtts: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        err << "mrtts: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kCheckFailure);
    }
    return static_cast<int>(ExitCode::kUsage);
}

}  // namespace mrtts
