#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mrtts/bytes.hpp"
#include "mrtts/errors.hpp"
#include "mrtts/features.hpp"
#include "support.hpp"

using namespace mrtts;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string kFixtures = MRTTS_FIXTURE_DIR;

const char* kSmallest = R"({
  "sentence": [1.0], "phrases": [{"features": [0.5], "word_count": 1}],
  "words": [[0.1, 0.2]], "syllables": [[0.3]], "phones": [[0.4, 0.5, 0.6]],
  "alignment": {"word_syllable_counts": [1], "syllable_phone_counts": [1]},
  "durations": [4]
})";

// Frozen checksum of unroll_frames(synth_corpus(7, {}).front()).frames.
constexpr std::uint64_t kSeed7TrackChecksum = 0x49100c768b8d5aebULL;

}  // namespace

TEST_CASE("smallest tree parses") {
    const ContextTree t = parse_context_tree(kSmallest);
    CHECK(t.words.rows() == 1);
    CHECK(t.syllables.rows() == 1);
    CHECK(t.phones.rows() == 1);
    CHECK(t.frame_count() == 4);
    CHECK(unroll_frames(t).length() == 4);
    CHECK(t.f0 == std::vector<float>{0.0f});
}

TEST_CASE("alignment mismatch names the level") {
    std::string doc = kSmallest;
    doc.replace(doc.find("\"syllable_phone_counts\": [1]"), 28, "\"syllable_phone_counts\": [2]");
    try {
        parse_context_tree(doc);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(e.level() == "phone");
    }
}

TEST_CASE("schema violations report a path") {
    std::string doc = kSmallest;
    doc.replace(doc.find("[[0.3]]"), 7, "[[\"x\"]]");
    try {
        parse_context_tree(doc);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.path().find("/syllables/0") == 0);
    }
    CHECK_THROWS_AS(parse_context_tree("{"), ParseError);
    CHECK_THROWS_AS(parse_context_tree("[]"), ParseError);
    CHECK_THROWS_AS(parse_context_tree(R"({"sentence": []})"), ParseError);
}

TEST_CASE("validation rejects zero durations and ragged rows") {
    ContextTree t = parse_context_tree(kSmallest);
    t.durations[0] = 0;
    try {
        t.validate();
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(e.level() == "duration");
    }
    std::string doc = kSmallest;
    doc.replace(doc.find("\"durations\": [4]"), 16, "\"durations\": [4, 4]");
    CHECK_THROWS_AS(parse_context_tree(doc), ValidationError);
}

TEST_CASE("serialize(parse(d)) is the canonical fixture") {
    const std::string canonical = read_file(kFixtures + "/tree_small.canonical.json");
    CHECK(serialize_context_tree(load_context_tree(kFixtures + "/tree_small.json")) == canonical);
    CHECK(serialize_context_tree(parse_context_tree(canonical)) == canonical);
    const ContextTree t = parse_context_tree(canonical);
    CHECK(t.frame_count() == 15);
    CHECK(t.frame_dim() == kFramePositionalDim + 2 + 2);
}

TEST_CASE("save and load round-trip a synthetic tree exactly") {
    const ContextTree t = synth_corpus(3, CorpusSpec{}).front();
    const auto path = std::filesystem::temp_directory_path() / "mrtts_test_tree.json";
    save_context_tree(t, path.string());
    CHECK(load_context_tree(path.string()) == t);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_context_tree("/nonexistent/tree.json"), IoError);
}

TEST_CASE("unrolling durations [2,3]") {
    const ContextTree t = test::tree_with_durations({2, 3});
    const FrameFeatureTrack track = unroll_frames(t);
    REQUIRE(track.length() == 5);
    const std::vector<float> pos = {0, 1, 0, 1, 2};
    const std::vector<float> dur = {2, 2, 3, 3, 3};
    for (std::size_t f = 0; f < 5; ++f) {
        CHECK(track.frames(f, frame_col::kPosInPhone) == pos[f]);
        CHECK(track.frames(f, frame_col::kPhoneDuration) == dur[f]);
        CHECK(track.frames(f, frame_col::kNormalizedPos) == doctest::Approx(pos[f] / dur[f]));
    }
    CHECK(track.phone_index == std::vector<std::uint32_t>{0, 0, 1, 1, 1});
    CHECK(track.audio_seconds() == doctest::Approx(5 * 0.0125));
}

TEST_CASE("single phone of duration one") {
    const FrameFeatureTrack track = unroll_frames(test::tree_with_durations({1}));
    REQUIRE(track.length() == 1);
    CHECK(track.frames(0, frame_col::kNormalizedPos) == 0.0f);
}

TEST_CASE("sentence and phrase features are broadcast into every frame") {
    const ContextTree t = parse_context_tree(read_file(kFixtures + "/tree_small.canonical.json"));
    const FrameFeatureTrack track = unroll_frames(t);
    for (std::size_t f = 0; f < track.length(); ++f) {
        CHECK(track.frames(f, kFramePositionalDim) == 0.5f);
        CHECK(track.frames(f, kFramePositionalDim + 1) == -1.0f);
        CHECK(track.frames(f, kFramePositionalDim + 2) == 1.0f);
        CHECK(track.frames(f, kFramePositionalDim + 3) == 0.25f);
        CHECK(track.frames(f, frame_col::kF0) == t.f0[track.phone_index[f]]);
    }
}

TEST_CASE("seed-7 frame track checksum is frozen") {
    const FrameFeatureTrack track = unroll_frames(synth_corpus(7, CorpusSpec{}).front());
    CHECK(bytes::fnv1a64(track.frames.data()) == kSeed7TrackChecksum);
}

TEST_CASE("unrolling covers every phone exactly duration times, in order") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        CorpusSpec spec;
        spec.min_words = 1;
        spec.max_words = 12;
        const ContextTree t = synth_corpus(seed, spec).front();
        const FrameFeatureTrack track = unroll_frames(t);
        std::size_t total = 0;
        for (auto d : t.durations) total += d;
        REQUIRE(track.length() == total);
        REQUIRE(track.frames.cols() == t.frame_dim());
        std::vector<std::size_t> seen(t.durations.size(), 0);
        for (std::size_t f = 0; f < track.length(); ++f) {
            const auto p = track.phone_index[f];
            if (f > 0) CHECK(p >= track.phone_index[f - 1]);
            CHECK(track.frames(f, frame_col::kPosInPhone) == static_cast<float>(seen[p]));
            CHECK(track.frames(f, frame_col::kPhoneDuration) == static_cast<float>(t.durations[p]));
            ++seen[p];
        }
        for (std::size_t p = 0; p < seen.size(); ++p) CHECK(seen[p] == t.durations[p]);
    }
}

TEST_CASE("the streaming unroller matches unroll_frames") {
    const ContextTree t = synth_corpus(21, CorpusSpec{}).front();
    const FrameFeatureTrack track = unroll_frames(t);
    FrameUnroller u(t);
    std::vector<float> row(u.dim());
    for (std::size_t f = 0; f < track.length(); ++f) {
        REQUIRE_FALSE(u.done());
        CHECK(u.current_phone() == track.phone_index[f]);
        u.next(row);
        CHECK(std::equal(row.begin(), row.end(), track.frames.row(f).begin()));
    }
    CHECK(u.done());
}

TEST_CASE("synthetic corpus is deterministic and respects its ranges") {
    CorpusSpec spec;
    spec.utterances = 3;
    spec.min_words = spec.max_words = 10;
    const auto a = synth_corpus(0, spec);
    const auto b = synth_corpus(0, spec);
    CHECK(a == b);
    CHECK(synth_corpus(1, spec) != a);
    for (const auto& t : a) {
        CHECK(t.words.rows() == 10);
        for (auto n : t.word_syllable_counts) CHECK((n >= 1 && n <= 4));
        for (auto n : t.syllable_phone_counts) CHECK((n >= 1 && n <= 3));
        for (auto d : t.durations) CHECK((d >= 3 && d <= 30));
        CHECK(t.words.cols() == 32);
        CHECK(t.syllables.cols() == 16);
        CHECK(t.phones.cols() == 24);
        CHECK(t.frame_dim() == 16);
    }
}

TEST_CASE("target length lands within 10 percent") {
    for (double seconds : {10.0, 80.0}) {
        CorpusSpec spec;
        spec.target_seconds = seconds;
        const auto frames = static_cast<double>(synth_corpus(5, spec).front().frame_count());
        CHECK(std::fabs(frames - seconds * kFramesPerSecond) <= 0.1 * seconds * kFramesPerSecond);
    }
}

TEST_CASE("degenerate corpus specs are config errors") {
    CorpusSpec spec;
    spec.min_words = spec.max_words = 0;
    CHECK_THROWS_AS(synth_corpus(0, spec), ConfigError);
    CorpusSpec bad_dur;
    bad_dur.min_duration = 0;
    CHECK_THROWS_AS(synth_corpus(0, bad_dur), ConfigError);
}

TEST_CASE("exact level lengths") {
    const ContextTree t = synth_tree_with_counts(2, 70, 150, 300, ModelConfig{});
    CHECK(t.words.rows() == 70);
    CHECK(t.syllables.rows() == 150);
    CHECK(t.phones.rows() == 300);
    CHECK_THROWS_AS(synth_tree_with_counts(2, 1, 5, 5, ModelConfig{}), ConfigError);
}
