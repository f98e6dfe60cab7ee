#include "mrtts/features.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mrtts/errors.hpp"
#include "mrtts/prng.hpp"

namespace mrtts {

using nlohmann::json;

const Matrix& ContextTree::level(Level l) const {
    switch (l) {
        case Level::kWord: return words;
        case Level::kSyllable: return syllables;
        case Level::kPhone: return phones;
    }
    return phones;
}

std::size_t ContextTree::frame_count() const {
    return std::accumulate(durations.begin(), durations.end(), std::size_t{0});
}

namespace {

template <class T>
std::size_t sum_of(const std::vector<T>& v) {
    return std::accumulate(v.begin(), v.end(), std::size_t{0});
}

void check_counts(const std::vector<std::uint32_t>& counts, std::size_t expected_len, std::size_t expected_sum,
                  const std::string& level, const std::string& what) {
    if (counts.size() != expected_len) {
        throw ValidationError(level, what + " has " + std::to_string(counts.size()) + " entries, expected " +
                                         std::to_string(expected_len));
    }
    if (std::any_of(counts.begin(), counts.end(), [](auto c) { return c == 0; })) {
        throw ValidationError(level, what + " contains a zero count");
    }
    if (sum_of(counts) != expected_sum) {
        throw ValidationError(level, what + " sums to " + std::to_string(sum_of(counts)) + ", expected " +
                                         std::to_string(expected_sum));
    }
}

}  // namespace

void ContextTree::validate() const {
    if (words.rows() == 0) throw ValidationError("word", "utterance has no words");
    if (phrases.empty()) throw ValidationError("phrase", "utterance has no phrases");
    const std::size_t dph = phrase_dim();
    std::size_t phrase_words = 0;
    for (const auto& p : phrases) {
        if (p.features.size() != dph) throw ValidationError("phrase", "inconsistent phrase feature width");
        if (p.word_count == 0) throw ValidationError("phrase", "phrase with zero words");
        phrase_words += p.word_count;
    }
    if (phrase_words != words.rows()) {
        throw ValidationError("phrase", "phrase word counts sum to " + std::to_string(phrase_words) + ", expected " +
                                            std::to_string(words.rows()));
    }
    check_counts(word_syllable_counts, words.rows(), syllables.rows(), "syllable", "word_syllable_counts");
    check_counts(syllable_phone_counts, syllables.rows(), phones.rows(), "phone", "syllable_phone_counts");
    if (durations.size() != phones.rows()) {
        throw ValidationError("duration", "durations has " + std::to_string(durations.size()) + " entries, expected " +
                                              std::to_string(phones.rows()));
    }
    if (std::any_of(durations.begin(), durations.end(), [](auto d) { return d == 0; })) {
        throw ValidationError("duration", "phone duration must be >= 1 frame");
    }
    if (f0.size() != phones.rows()) {
        throw ValidationError("f0", "f0 has " + std::to_string(f0.size()) + " entries, expected " +
                                        std::to_string(phones.rows()));
    }
}

// ---------------------------------------------------------------------------
// Unrolling

FrameUnroller::FrameUnroller(const ContextTree& tree)
    : tree_(tree), dim_(tree.frame_dim()), total_(tree.frame_count()) {
    if (total_ > 0) {
        phones_left_in_syllable_ = tree.syllable_phone_counts.at(0);
        syllables_left_in_word_ = tree.word_syllable_counts.at(0);
        words_left_in_phrase_ = tree.phrases.at(0).word_count;
    }
}

void FrameUnroller::next(std::span<float> out) {
    if (done()) throw ShapeError("frame unroller exhausted");
    if (out.size() != dim_) throw ShapeError("frame row width mismatch");
    const auto& t = tree_;
    const double dur = t.durations[phone_];
    out[frame_col::kPosInPhone] = static_cast<float>(pos_in_phone_);
    out[frame_col::kPhoneDuration] = static_cast<float>(dur);
    out[frame_col::kNormalizedPos] = static_cast<float>(static_cast<double>(pos_in_phone_) / dur);
    out[frame_col::kPhoneIndex] = static_cast<float>(static_cast<double>(phone_) / t.phones.rows());
    out[frame_col::kSyllableIndex] = static_cast<float>(static_cast<double>(syllable_) / t.syllables.rows());
    out[frame_col::kWordIndex] = static_cast<float>(static_cast<double>(word_) / t.words.rows());
    out[frame_col::kPhraseIndex] = static_cast<float>(static_cast<double>(phrase_) / t.phrases.size());
    out[frame_col::kF0] = t.f0[phone_];
    auto tail = out.subspan(kFramePositionalDim);
    std::copy(t.sentence.begin(), t.sentence.end(), tail.begin());
    const auto& pf = t.phrases[phrase_].features;
    std::copy(pf.begin(), pf.end(), tail.begin() + static_cast<std::ptrdiff_t>(t.sentence.size()));

    ++t_;
    if (++pos_in_phone_ < t.durations[phone_]) return;
    pos_in_phone_ = 0;
    ++phone_;
    if (--phones_left_in_syllable_ > 0 || done()) return;
    ++syllable_;
    phones_left_in_syllable_ = t.syllable_phone_counts[syllable_];
    if (--syllables_left_in_word_ > 0) return;
    ++word_;
    syllables_left_in_word_ = t.word_syllable_counts[word_];
    if (--words_left_in_phrase_ > 0) return;
    ++phrase_;
    words_left_in_phrase_ = t.phrases[phrase_].word_count;
}

FrameFeatureTrack unroll_frames(const ContextTree& tree) {
    FrameUnroller un(tree);
    FrameFeatureTrack track;
    track.frames = Matrix(un.total(), un.dim());
    track.phone_index.resize(un.total());
    for (std::size_t t = 0; t < un.total(); ++t) {
        track.phone_index[t] = un.current_phone();
        un.next(track.frames.row(t));
    }
    return track;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::vector<float> float_list(const json& j, const std::string& path) {
    if (!j.is_array()) throw ParseError(path, "expected an array of numbers");
    std::vector<float> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ParseError(path + "/" + std::to_string(i), "expected a number");
        const double v = j[i].get<double>();
        if (!std::isfinite(v)) throw ParseError(path + "/" + std::to_string(i), "non-finite value");
        out.push_back(static_cast<float>(v));
    }
    return out;
}

std::vector<std::uint32_t> count_list(const json& j, const std::string& path) {
    if (!j.is_array()) throw ParseError(path, "expected an array of counts");
    std::vector<std::uint32_t> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number_unsigned()) {
            throw ParseError(path + "/" + std::to_string(i), "expected a non-negative integer");
        }
        out.push_back(j[i].get<std::uint32_t>());
    }
    return out;
}

Matrix feature_rows(const json& j, const std::string& path) {
    if (!j.is_array()) throw ParseError(path, "expected an array of feature rows");
    if (j.empty()) return {};
    std::vector<float> data;
    std::size_t width = 0;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto row_path = path + "/" + std::to_string(i);
        auto row = float_list(j[i], row_path);
        if (i == 0) {
            width = row.size();
        } else if (row.size() != width) {
            throw ParseError(row_path, "row has " + std::to_string(row.size()) + " values, expected " +
                                           std::to_string(width));
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(j.size(), width, std::move(data));
}

const json& member(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + "/" + key, "missing required key");
    return *it;
}

// The double closest to the shortest decimal that round-trips the float, so
// 0.1f is written as 0.1 rather than 0.10000000149011612.
double shortest_double(float f) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), f);
    return std::strtod(std::string(buf, res.ptr).c_str(), nullptr);
}

json floats_json(std::span<const float> v) {
    json out = json::array();
    for (float f : v) out.push_back(shortest_double(f));
    return out;
}

json rows_json(const Matrix& m) {
    json out = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) out.push_back(floats_json(m.row(r)));
    return out;
}

}  // namespace

ContextTree parse_context_tree(const std::string& document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError("", e.what());
    }
    if (!doc.is_object()) throw ParseError("", "document must be an object");

    ContextTree tree;
    tree.sentence = float_list(member(doc, "sentence", ""), "/sentence");

    const auto& phrases = member(doc, "phrases", "");
    if (!phrases.is_array()) throw ParseError("/phrases", "expected an array");
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        const auto path = "/phrases/" + std::to_string(i);
        const auto& p = phrases[i];
        if (!p.is_object()) throw ParseError(path, "expected an object");
        Phrase ph;
        ph.features = float_list(member(p, "features", path), path + "/features");
        const auto& wc = member(p, "word_count", path);
        if (!wc.is_number_unsigned()) throw ParseError(path + "/word_count", "expected a non-negative integer");
        ph.word_count = wc.get<std::size_t>();
        tree.phrases.push_back(std::move(ph));
    }

    tree.words = feature_rows(member(doc, "words", ""), "/words");
    tree.syllables = feature_rows(member(doc, "syllables", ""), "/syllables");
    tree.phones = feature_rows(member(doc, "phones", ""), "/phones");

    const auto& align = member(doc, "alignment", "");
    if (!align.is_object()) throw ParseError("/alignment", "expected an object");
    tree.word_syllable_counts =
        count_list(member(align, "word_syllable_counts", "/alignment"), "/alignment/word_syllable_counts");
    tree.syllable_phone_counts =
        count_list(member(align, "syllable_phone_counts", "/alignment"), "/alignment/syllable_phone_counts");
    tree.durations = count_list(member(doc, "durations", ""), "/durations");

    if (auto it = doc.find("f0"); it != doc.end()) {
        tree.f0 = float_list(*it, "/f0");
    } else {
        tree.f0.assign(tree.phones.rows(), 0.0f);
    }

    tree.validate();
    return tree;
}

std::string serialize_context_tree(const ContextTree& tree) {
    json doc;
    doc["sentence"] = floats_json(tree.sentence);
    doc["phrases"] = json::array();
    for (const auto& p : tree.phrases) {
        doc["phrases"].push_back({{"features", floats_json(p.features)}, {"word_count", p.word_count}});
    }
    doc["words"] = rows_json(tree.words);
    doc["syllables"] = rows_json(tree.syllables);
    doc["phones"] = rows_json(tree.phones);
    doc["alignment"] = {{"word_syllable_counts", tree.word_syllable_counts},
                        {"syllable_phone_counts", tree.syllable_phone_counts}};
    doc["durations"] = tree.durations;
    doc["f0"] = floats_json(tree.f0);
    return doc.dump(1) + "\n";
}

ContextTree load_context_tree(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open context tree " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_context_tree(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ":" + e.path(), e.what());
    }
}

void save_context_tree(const ContextTree& tree, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write context tree " + path);
    out << serialize_context_tree(tree);
    if (!out) throw IoError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

void CorpusSpec::validate() const {
    if (target_seconds <= 0.0 && (max_words == 0 || min_words > max_words)) {
        throw ConfigError("corpus spec: word range must be non-empty and exclude zero");
    }
    if (target_seconds <= 0.0 && min_words == 0) throw ConfigError("corpus spec: min_words must be >= 1");
    if (utterances == 0) throw ConfigError("corpus spec: zero utterances");
    if (min_syllables_per_word == 0 || min_syllables_per_word > max_syllables_per_word) {
        throw ConfigError("corpus spec: bad syllables-per-word range");
    }
    if (min_phones_per_syllable == 0 || min_phones_per_syllable > max_phones_per_syllable) {
        throw ConfigError("corpus spec: bad phones-per-syllable range");
    }
    if (min_duration == 0 || min_duration > max_duration) throw ConfigError("corpus spec: bad duration range");
    if (words_per_phrase == 0) throw ConfigError("corpus spec: words_per_phrase must be >= 1");
    dims.validate();
}

namespace {

std::vector<float> normal_vec(Xorshift64Star& rng, std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

Matrix normal_rows(Xorshift64Star& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (auto& x : m.data()) x = static_cast<float>(rng.normal());
    return m;
}

std::uint32_t draw_duration(Xorshift64Star& rng, std::size_t lo, std::size_t hi) {
    const double u = rng.uniform();
    const auto span = static_cast<double>(hi - lo + 1);
    return static_cast<std::uint32_t>(lo + static_cast<std::size_t>(u * u * u * span));
}

// Fills feature matrices, phrases, durations and f0 once the alignment counts
// are fixed.
void populate(Xorshift64Star& rng, ContextTree& tree, const ModelConfig& dims, std::size_t words_per_phrase,
              std::size_t min_dur, std::size_t max_dur, bool draw_durations) {
    const std::size_t lw = tree.word_syllable_counts.size();
    const std::size_t ls = tree.syllable_phone_counts.size();
    const std::size_t lp = sum_of(tree.syllable_phone_counts);
    tree.sentence = normal_vec(rng, dims.d_sentence);
    tree.phrases.clear();
    for (std::size_t w = 0; w < lw; w += words_per_phrase) {
        tree.phrases.push_back({normal_vec(rng, dims.d_phrase), std::min(words_per_phrase, lw - w)});
    }
    tree.words = normal_rows(rng, lw, dims.d_word);
    tree.syllables = normal_rows(rng, ls, dims.d_syllable);
    tree.phones = normal_rows(rng, lp, dims.d_phone);
    if (draw_durations) {
        tree.durations.resize(lp);
        for (auto& d : tree.durations) d = draw_duration(rng, min_dur, max_dur);
    }
    tree.f0.resize(lp);
    for (auto& f : tree.f0) f = static_cast<float>(rng.normal());
}

}  // namespace

std::vector<ContextTree> synth_corpus(std::uint64_t seed, const CorpusSpec& spec) {
    spec.validate();
    Xorshift64Star rng(seed);
    std::vector<ContextTree> out;
    out.reserve(spec.utterances);
    const auto target_frames = static_cast<std::size_t>(std::llround(spec.target_seconds * kFramesPerSecond));

    for (std::size_t u = 0; u < spec.utterances; ++u) {
        ContextTree tree;
        std::vector<std::uint32_t> durations;
        std::size_t frames = 0;
        std::size_t n_words = 0;
        const std::size_t fixed_words =
            spec.target_seconds > 0.0
                ? 0
                : static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(spec.min_words),
                                                           static_cast<std::int64_t>(spec.max_words)));
        auto more_words = [&] { return fixed_words > 0 ? n_words < fixed_words : frames < target_frames; };
        while (more_words()) {
            const auto syl = static_cast<std::uint32_t>(
                rng.uniform_int(static_cast<std::int64_t>(spec.min_syllables_per_word),
                                static_cast<std::int64_t>(spec.max_syllables_per_word)));
            tree.word_syllable_counts.push_back(syl);
            for (std::uint32_t s = 0; s < syl; ++s) {
                const auto ph = static_cast<std::uint32_t>(
                    rng.uniform_int(static_cast<std::int64_t>(spec.min_phones_per_syllable),
                                    static_cast<std::int64_t>(spec.max_phones_per_syllable)));
                tree.syllable_phone_counts.push_back(ph);
                for (std::uint32_t p = 0; p < ph; ++p) {
                    durations.push_back(draw_duration(rng, spec.min_duration, spec.max_duration));
                    frames += durations.back();
                }
            }
            ++n_words;
        }
        // Trim the overshoot from the tail so the utterance lands on target.
        if (fixed_words == 0) {
            for (auto it = durations.rbegin(); it != durations.rend() && frames > target_frames; ++it) {
                const std::size_t slack = *it - spec.min_duration;
                const std::size_t cut = std::min(slack, frames - target_frames);
                *it -= static_cast<std::uint32_t>(cut);
                frames -= cut;
            }
        }
        tree.durations = std::move(durations);
        populate(rng, tree, spec.dims, spec.words_per_phrase, spec.min_duration, spec.max_duration, false);
        tree.validate();
        out.push_back(std::move(tree));
    }
    return out;
}

ContextTree synth_tree_with_counts(std::uint64_t seed, std::size_t words, std::size_t syllables, std::size_t phones,
                                   const ModelConfig& dims, std::size_t min_duration, std::size_t max_duration) {
    if (words == 0 || syllables < words || syllables > 4 * words || phones < syllables || phones > 3 * syllables) {
        throw ConfigError("synth_tree_with_counts: infeasible level lengths");
    }
    if (min_duration == 0 || min_duration > max_duration) throw ConfigError("synth_tree_with_counts: bad durations");
    dims.validate();
    Xorshift64Star rng(seed);
    ContextTree tree;
    // Spread the surplus round-robin so every count stays within its range.
    tree.word_syllable_counts.assign(words, 1);
    for (std::size_t extra = syllables - words, i = 0; extra > 0; --extra, i = (i + 1) % words) {
        ++tree.word_syllable_counts[i];
    }
    tree.syllable_phone_counts.assign(syllables, 1);
    for (std::size_t extra = phones - syllables, i = 0; extra > 0; --extra, i = (i + 1) % syllables) {
        ++tree.syllable_phone_counts[i];
    }
    populate(rng, tree, dims, 8, min_duration, max_duration, true);
    tree.validate();
    return tree;
}

}  // namespace mrtts
