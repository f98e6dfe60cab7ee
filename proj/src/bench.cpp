#include "mrtts/bench.hpp"

#include <sched.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include "mrtts/errors.hpp"
#include "mrtts/parallel.hpp"
#include "mrtts/prng.hpp"

namespace mrtts {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double clock_resolution() {
    return static_cast<double>(Clock::period::num) / static_cast<double>(Clock::period::den);
}

// Holds an exclusive lock for the lifetime of one benchmark run, both within
// this process and across processes.
class BenchLock {
public:
    BenchLock() {
        if (!mutex().try_lock()) throw BenchError("another benchmark is already running in this process");
        const auto path = std::filesystem::temp_directory_path() / "mrtts-bench.lock";
        fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
        if (fd_ >= 0 && ::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            mutex().unlock();
            throw BenchError("another benchmark is already running (" + path.string() + " is locked)");
        }
    }
    ~BenchLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
        mutex().unlock();
    }
    BenchLock(const BenchLock&) = delete;
    BenchLock& operator=(const BenchLock&) = delete;

private:
    static std::mutex& mutex() {
        static std::mutex m;
        return m;
    }
    int fd_ = -1;
};

// Single thread, pinned to the CPU we are currently on.
class SingleCore {
public:
    SingleCore() : threads_(1) {
        pinned_ = ::sched_getaffinity(0, sizeof(saved_), &saved_) == 0;
        if (pinned_) {
            cpu_set_t one;
            CPU_ZERO(&one);
            const int cpu = ::sched_getcpu();
            CPU_SET(cpu >= 0 ? cpu : 0, &one);
            pinned_ = ::sched_setaffinity(0, sizeof(one), &one) == 0;
        }
    }
    ~SingleCore() {
        if (pinned_) ::sched_setaffinity(0, sizeof(saved_), &saved_);
    }
    SingleCore(const SingleCore&) = delete;
    SingleCore& operator=(const SingleCore&) = delete;

private:
    parallel::ScopedThreads threads_;
    cpu_set_t saved_{};
    bool pinned_ = false;
};

}  // namespace

std::size_t synthesize_once(const BenchCase& c, double* first_frame) {
    Matrix out(c.tree.frame_count(), kFrameDim);
    const auto start = Clock::now();
    return synthesize(*c.model, c.tree, [&](std::size_t t, std::span<const float> y) {
        if (t == 0 && first_frame) *first_frame = seconds_since(start);
        std::copy(y.begin(), y.end(), out.row(t).begin());
        return true;
    });
}

double first_frame_latency(const BenchCase& c, std::size_t repeats) {
    const Model& m = *c.model;
    auto once = [&] {
        const auto start = Clock::now();
        switch (m.kind) {
            case ModelKind::kMultirate:
            case ModelKind::kMultirateNoPool: {
                const Encodings enc = encode_tree(c.tree, m.encoder, m.config);
                DecoderSession session(m.decoder, enc, m.options());
                FrameUnroller frames(c.tree);
                std::vector<float> x(frames.dim());
                frames.next(x);
                session.step(x);
                break;
            }
            case ModelKind::kPlainRecurrent: {
                FrameFeatureTrack first;
                first.frames = Matrix(1, c.tree.frame_dim());
                FrameUnroller frames(c.tree);
                frames.next(first.frames.row(0));
                plain_recurrent_decode(first, m.plain, m.options());
                break;
            }
            case ModelKind::kSelfAttention: {
                const auto track = unroll_frames(c.tree);
                const Matrix enc = self_attention_encode(track.frames, m.self_attention);
                linear(enc.row(0), m.self_attention.out, m.self_attention.out_bias);
                break;
            }
        }
        return seconds_since(start) * 1e3;
    };
    once();  // warm-up
    std::vector<double> times;
    for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) times.push_back(once());
    return median(times);
}

std::uint64_t first_frame_macs(const BenchCase& c) {
    const Model& m = *c.model;
    MacCounter counter;
    switch (m.kind) {
        case ModelKind::kMultirate:
        case ModelKind::kMultirateNoPool: {
            const Encodings enc = encode_tree(c.tree, m.encoder, m.config, &counter);
            DecoderSession session(m.decoder, enc, m.options());
            FrameUnroller frames(c.tree);
            std::vector<float> x(frames.dim());
            frames.next(x);
            session.step(x, &counter);
            break;
        }
        case ModelKind::kPlainRecurrent:
            counter.macs = plain_recurrent_step_macs(m.plain);
            break;
        case ModelKind::kSelfAttention: {
            SelfAttentionCost cost;
            const auto track = unroll_frames(c.tree);
            const Matrix enc = self_attention_encode(track.frames, m.self_attention, &cost);
            linear(enc.row(0), m.self_attention.out, m.self_attention.out_bias, &cost.total);
            counter = cost.total;
            break;
        }
    }
    return counter.macs;
}

namespace {

struct MacProfile {
    std::uint64_t per_frame = 0;
    std::uint64_t encoder = 0;
};

MacProfile instrumented_pass(const BenchCase& c) {
    const Model& m = *c.model;
    MacProfile p;
    switch (m.kind) {
        case ModelKind::kMultirate:
        case ModelKind::kMultirateNoPool: {
            MacCounter enc_counter;
            const Encodings enc = encode_tree(c.tree, m.encoder, m.config, &enc_counter);
            p.encoder = enc_counter.macs;
            MacCounter dec_counter;
            const std::size_t n = decode_tree_stream(
                c.tree, enc, m.decoder, [](std::size_t, std::span<const float>) { return true; }, m.options(),
                &dec_counter);
            p.per_frame = dec_counter.macs / n;
            break;
        }
        case ModelKind::kPlainRecurrent: {
            MacCounter counter;
            const auto track = unroll_frames(c.tree);
            plain_recurrent_decode(track, m.plain, m.options(), &counter);
            p.per_frame = counter.macs / track.length();
            break;
        }
        case ModelKind::kSelfAttention: {
            SelfAttentionCost cost;
            const auto track = unroll_frames(c.tree);
            self_attention_encode(track.frames, m.self_attention, &cost);
            p.encoder = cost.total.macs;
            self_attention_decode(track, m.self_attention, &cost);  // adds encoder again plus head
            p.per_frame = (cost.total.macs - p.encoder) / track.length();
            break;
        }
    }
    return p;
}

}  // namespace

std::vector<BenchRecord> run_bench(const BenchOptions& opts) {
    if (opts.models.empty() || opts.lengths.empty()) throw BenchError("bench needs at least one model and length");
    for (double len : opts.lengths) {
        if (!(len >= 1.0)) throw BenchError("bench lengths must be >= 1 s");
    }
    if (opts.repeats < 3) throw BenchError("bench needs at least 3 repeats");
    BenchLock lock;
    SingleCore pin;

    // The same utterance per length for every model.
    std::vector<ContextTree> trees;
    for (std::size_t i = 0; i < opts.lengths.size(); ++i) {
        CorpusSpec spec;
        spec.target_seconds = opts.lengths[i];
        spec.dims = opts.config;
        trees.push_back(synth_corpus(opts.seed + i, spec).front());
    }

    std::vector<Model> models;
    for (ModelKind kind : opts.models) {
        const std::array<ModelKind, 1> kinds = {kind};
        models.push_back(prepare_model(weights_init(opts.seed, opts.config, kinds), kind));
    }
    std::vector<BenchCase> cases;
    for (const Model& m : models) {
        for (const ContextTree& t : trees) cases.push_back({&m, t});
    }
    const std::size_t n_len = trees.size();

    // Shapes compare lengths of one model, and models against each other, so
    // the runs being compared must be close in time: machine speed drifts by
    // 10-20% over seconds on a shared host. Models whose runs are all short
    // share one group of rounds; a model with a longer run gets its own. A
    // round visits every case of its group in shuffled order and repeats
    // short utterances so that each case spends about the same wall time.
    std::vector<double> warm(cases.size());
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto start = Clock::now();
        synthesize_once(cases[i]);
        warm[i] = seconds_since(start);
    }
    std::vector<std::vector<std::size_t>> groups(1);
    for (std::size_t m = 0; m < models.size(); ++m) {
        const auto first = warm.begin() + static_cast<std::ptrdiff_t>(m * n_len);
        const bool cheap = *std::max_element(first, first + static_cast<std::ptrdiff_t>(n_len)) <= opts.shared_run_seconds;
        if (!cheap) groups.emplace_back();
        auto& g = cheap ? groups.front() : groups.back();
        for (std::size_t l = 0; l < n_len; ++l) g.push_back(m * n_len + l);
    }

    std::vector<std::vector<double>> times(cases.size());
    Xorshift64Star order_rng(opts.seed ^ 0x6f72646572ULL);
    for (auto& group : groups) {
        if (group.empty()) continue;
        double slowest = 0.0;
        for (std::size_t i : group) slowest = std::max(slowest, warm[i]);
        const double target = std::min(slowest, opts.round_target_seconds);
        const double budget = opts.model_budget_seconds * static_cast<double>(group.size() / n_len);
        double spent = 0.0;
        for (std::size_t round = 0; round < opts.repeats || (round < opts.max_rounds && spent < budget); ++round) {
            for (std::size_t j = group.size(); j > 1; --j) {
                std::swap(group[j - 1], group[static_cast<std::size_t>(order_rng.uniform_int(0, static_cast<std::int64_t>(j) - 1))]);
            }
            for (std::size_t i : group) {
                const auto runs = static_cast<std::size_t>(std::clamp(std::round(target / std::max(warm[i], 1e-9)), 1.0, 64.0));
                for (std::size_t k = 0; k < runs; ++k) {
                    const auto start = Clock::now();
                    synthesize_once(cases[i]);
                    times[i].push_back(seconds_since(start));
                    spent += times[i].back();
                }
            }
        }
    }
    const double min_time = opts.min_ticks * clock_resolution();
    for (std::size_t i = 0; i < cases.size(); ++i) {
        while (median(times[i]) < min_time) {
            if (times[i].size() >= 64) {
                throw BenchError("timer resolution too coarse for a " +
                                 std::to_string(cases[i].tree.frame_count()) + "-frame utterance");
            }
            const auto start = Clock::now();
            synthesize_once(cases[i]);
            times[i].push_back(seconds_since(start));
        }
    }

    std::vector<BenchRecord> records;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const BenchCase& c = cases[i];
        BenchRecord rec;
        rec.model = c.model->kind;
        rec.frames = c.tree.frame_count();
        rec.audio_seconds = static_cast<double>(rec.frames) / kFramesPerSecond;
        rec.synth_seconds = median(times[i]);
        rec.rtf = rec.synth_seconds / rec.audio_seconds;
        rec.repeats = times[i].size();
        rec.first_frame_latency_ms = first_frame_latency(c, opts.repeats);
        const auto macs = instrumented_pass(c);
        rec.per_frame_macs = macs.per_frame;
        rec.encoder_macs = macs.encoder;
        records.push_back(rec);
    }
    return records;
}

void write_bench_csv(const std::vector<BenchRecord>& records, std::ostream& out) {
    out << kBenchCsvHeader << '\n';
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.6f,%.6f,%.4f,%llu,%llu,%zu\n", std::string(model_name(r.model)).c_str(),
                      r.audio_seconds, r.synth_seconds, r.rtf, r.first_frame_latency_ms,
                      static_cast<unsigned long long>(r.per_frame_macs),
                      static_cast<unsigned long long>(r.encoder_macs), r.repeats);
        out << buf;
    }
}

std::string render_rtf_svg(const std::vector<BenchRecord>& records) {
    constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 170, kTop = 30, kBottom = 50;
    static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    double max_x = 1.0, max_y = 1e-9;
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    std::vector<std::string> order;
    for (const auto& r : records) {
        const std::string name(model_name(r.model));
        if (!series.count(name)) order.push_back(name);
        series[name].emplace_back(r.audio_seconds, r.rtf);
        max_x = std::max(max_x, r.audio_seconds);
        max_y = std::max(max_y, r.rtf);
    }
    max_y *= 1.1;
    const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + pw * x / max_x; };
    auto sy = [&](double y) { return kTop + ph * (1.0 - y / max_y); };

    std::ostringstream svg;
    svg.precision(6);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = max_x * i / 4, yv = max_y * i / 4;
        svg << "<text x=\"" << sx(xv) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << xv
            << "</text>\n";
        svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">" << yv << "</text>\n";
    }
    svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">audio length (s)</text>\n";
    svg << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 16 " << kTop + ph / 2
        << ")\" text-anchor=\"middle\">RTF</text>\n";
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto pts = series[order[i]];
        std::sort(pts.begin(), pts.end());
        const char* color = kColors[i % std::size(kColors)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : pts) svg << sx(x) << ',' << sy(y) << ' ';
        svg << "\"/>\n";
        for (const auto& [x, y] : pts) {
            svg << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
        svg << "<line x1=\"" << kW - kRight + 15 << "\" y1=\"" << ly << "\" x2=\"" << kW - kRight + 40 << "\" y2=\""
            << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << kW - kRight + 46 << "\" y=\"" << ly + 4 << "\">" << order[i] << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void emit_report(const std::vector<BenchRecord>& records, const std::string& dir) {
    if (records.empty()) throw BenchError("no bench records to report");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const auto csv_path = std::filesystem::path(dir) / "bench.csv";
    const auto svg_path = std::filesystem::path(dir) / "rtf.svg";
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    write_bench_csv(records, csv);
    std::ofstream svg(svg_path);
    if (!svg) throw IoError("cannot write " + svg_path.string());
    svg << render_rtf_svg(records);
    if (!csv || !svg) throw IoError("write failed in " + dir);
}

}  // namespace mrtts
