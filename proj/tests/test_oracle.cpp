#include <doctest.h>

#include "mrtts/decoder.hpp"
#include "mrtts/errors.hpp"
#include "mrtts/oracle.hpp"
#include "mrtts/validate.hpp"
#include "support.hpp"

using namespace mrtts;
using namespace mrtts::oracle;
using mrtts::test::random_matrix;

TEST_CASE("reference attention over one key returns its value") {
    const Matrix k{{0.3f, -2.0f}};
    const Matrix v{{7.0f, 8.0f}};
    CHECK(oracle_attention(std::vector<float>{5, 5}, k, v) == std::vector<float>{7.0f, 8.0f});
}

TEST_CASE("reference attention with a zero query averages the values") {
    Xorshift64Star rng(1);
    const Matrix k = random_matrix(rng, 4, 3);
    const Matrix v{{1, 2, 3}, {3, 2, 1}, {0, 0, 0}, {4, 4, 4}};
    const auto out = oracle_attention(std::vector<float>(3, 0.0f), k, v);
    CHECK(out[0] == doctest::Approx(2.0));
    CHECK(out[1] == doctest::Approx(2.0));
    CHECK(out[2] == doctest::Approx(2.0));
    CHECK_THROWS_AS(oracle_attention(std::vector<float>(2), k, v), ShapeError);
}

TEST_CASE("reference pooling hand example") {
    const OraclePool p = oracle_maxpool(Matrix{{1}, {5}, {2}, {9}, {3}, {7}}, 2);
    CHECK(p.pooled == Matrix{{5}, {9}});
    CHECK(p.stride == 3);
}

TEST_CASE("mse examples") {
    Xorshift64Star rng(2);
    const Matrix a = random_matrix(rng, 5, 19);
    CHECK(mse_loss(a, a) == 0.0);
    Matrix b = a;
    for (auto& e : b.storage()) e -= 2.0f;
    CHECK(mse_loss(a, b) == doctest::Approx(4.0).epsilon(1e-6));
    const Matrix c = random_matrix(rng, 5, 19);
    double hand = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - c.data()[i];
        hand += d * d;
    }
    CHECK(mse_loss(a, c) == doctest::Approx(hand / 95.0).epsilon(1e-12));
    CHECK_THROWS_AS(mse_loss(a, Matrix(5, 18)), ShapeError);
}

TEST_CASE("compare uses a floored relative error") {
    const std::vector<float> a = {1.0f, 0.0f, -2.0f};
    const std::vector<float> b = {1.0f, 1e-9f, -2.0f};
    const OracleReport r = compare(a, b, "x");
    CHECK(r.compared == 3);
    CHECK(r.max_abs_err == doctest::Approx(1e-9));
    CHECK(r.max_rel_err == doctest::Approx(1e-3));  // 1e-9 / kRelFloor
    CHECK_FALSE(OracleReport{}.within(1.0));  // nothing compared never passes
    CHECK_THROWS_AS(compare(a, std::vector<float>(2), "y"), ShapeError);
}

TEST_CASE("batch decode with zero weights returns the bias") {
    const ModelWeights w = test::zero_weights_with_bias();
    const ContextTree tree = synth_corpus(1, CorpusSpec{}).front();
    const Encodings enc = encode_tree(tree, w.encoder(), w.config);
    const DecoderWeights dec = w.decoder();
    const Matrix y = oracle_batch_decode(unroll_frames(tree), enc, dec, true);
    for (std::size_t t = 0; t < y.rows(); ++t) {
        for (std::size_t i = 0; i < kFrameDim; ++i) CHECK(y(t, i) == dec.out_bias[i]);
    }
}

TEST_CASE("batch decode of one frame equals one decode_step") {
    const ModelWeights w = test::multirate_weights(3);
    const ContextTree tree = test::tree_with_durations({1});
    const Encodings enc = encode_tree(tree, w.encoder(), w.config);
    const DecoderWeights dec = w.decoder();
    const FrameFeatureTrack track = unroll_frames(tree);
    const StepResult step = decode_step(track.frames.row(0), DecoderState::initial(dec), enc, dec);
    CHECK(compare(step.frame, oracle_batch_decode(track, enc, dec, true).row(0)).within(kDecodeTol));
}

TEST_CASE("the validation suite passes and notices a perturbed kernel") {
    for (const auto& c : run_validation(1, 10)) {
        INFO(c.report.name);
        CHECK(c.passed());
    }
    fault::set_lstm_offset(1e-3f);
    bool any_failed = false;
    for (const auto& c : run_validation(1, 10)) any_failed = any_failed || !c.passed();
    fault::set_lstm_offset(0.0f);
    CHECK(any_failed);
}
