#include "mrtts/weights.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

#include <json.hpp>

#include "mrtts/bytes.hpp"
#include "mrtts/errors.hpp"
#include "mrtts/prng.hpp"

namespace mrtts {

using nlohmann::json;

namespace {

constexpr std::uint32_t kWeightsMagic = 0x31574D53U;  // "SMW1"

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

void add_lstm(std::vector<TensorSpec>& out, const std::string& prefix, std::size_t in, std::size_t hidden) {
    out.push_back({prefix + ".bias", {4 * hidden}, 0, 0});
    out.push_back({prefix + ".w_hh", {hidden, 4 * hidden}, hidden, 4 * hidden});
    out.push_back({prefix + ".w_ih", {in, 4 * hidden}, in, 4 * hidden});
}

void add_dense(std::vector<TensorSpec>& out, const std::string& prefix, std::size_t in, std::size_t outd,
               bool bias) {
    if (bias) out.push_back({prefix + ".bias", {outd}, 0, 0});
    out.push_back({prefix + ".weight", {in, outd}, in, outd});
}

}  // namespace

std::size_t Tensor::numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::vector<TensorSpec> required_tensors(const ModelConfig& c, ModelKind kind) {
    c.validate();
    std::vector<TensorSpec> out;
    switch (kind) {
        case ModelKind::kMultirate:
        case ModelKind::kMultirateNoPool:
            for (Level l : kLevels) {
                const std::string p = "enc." + std::string(level_name(l));
                const std::size_t d = c.level_dim(l);
                for (const char* conv : {".conv1", ".conv2"}) {
                    out.push_back({p + conv + ".bias", {d}, 0, 0});
                    out.push_back({p + conv + ".weight", {d, d, c.kernel}, d * c.kernel, d * c.kernel});
                }
                add_dense(out, p + ".key", d, d, false);
                add_dense(out, p + ".value", d, d, false);
                add_dense(out, "dec.query." + std::string(level_name(l)), c.hidden2, d, false);
            }
            add_lstm(out, "dec.lstm1", c.d_frame + kFrameDim, c.hidden1);
            add_lstm(out, "dec.lstm2", c.hidden1, c.hidden2);
            add_dense(out, "dec.combine", c.context_dim(), c.d_model, false);
            add_dense(out, "dec.out", c.d_model + c.hidden2, kFrameDim, true);
            break;
        case ModelKind::kPlainRecurrent:
            add_lstm(out, "lstm.lstm1", c.d_frame + kFrameDim, c.hidden1);
            add_lstm(out, "lstm.lstm2", c.hidden1, c.hidden2);
            add_dense(out, "lstm.out", c.hidden2, kFrameDim, true);
            break;
        case ModelKind::kSelfAttention:
            add_dense(out, "sa.in", c.d_frame, c.sa_dim, true);
            for (std::size_t i = 0; i < c.sa_layers; ++i) {
                const std::string p = "sa.layer" + std::to_string(i);
                for (const char* proj : {".wq", ".wk", ".wv", ".wo"}) add_dense(out, p + proj, c.sa_dim, c.sa_dim, true);
                add_dense(out, p + ".ffn1", c.sa_dim, c.sa_ffn, true);
                add_dense(out, p + ".ffn2", c.sa_ffn, c.sa_dim, true);
            }
            add_dense(out, "sa.out", c.sa_dim, kFrameDim, true);
            break;
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

bool ModelWeights::has(ModelKind kind) const {
    for (const auto& spec : required_tensors(config, kind)) {
        auto it = tensors.find(spec.name);
        if (it == tensors.end() || it->second.shape != spec.shape) return false;
    }
    return true;
}

const Tensor& ModelWeights::get(const std::string& name, const std::vector<std::size_t>& shape) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IntegrityError("weights: missing tensor " + name);
    if (it->second.shape != shape) {
        throw IntegrityError("weights: tensor " + name + " has shape " + shape_str(it->second.shape) + ", expected " +
                             shape_str(shape));
    }
    return it->second;
}

namespace {

Matrix as_matrix(const Tensor& t) {
    const std::size_t rows = t.shape.front();
    return Matrix(rows, t.numel() / rows, t.values);
}

LstmWeights lstm_view(const ModelWeights& mw, const std::string& p, std::size_t in, std::size_t hidden) {
    LstmWeights w;
    w.w_ih = as_matrix(mw.get(p + ".w_ih", {in, 4 * hidden}));
    w.w_hh = as_matrix(mw.get(p + ".w_hh", {hidden, 4 * hidden}));
    w.bias = mw.get(p + ".bias", {4 * hidden}).values;
    return w;
}

Matrix dense(const ModelWeights& mw, const std::string& p, std::size_t in, std::size_t out) {
    return as_matrix(mw.get(p + ".weight", {in, out}));
}

std::vector<float> bias(const ModelWeights& mw, const std::string& p, std::size_t n) {
    return mw.get(p + ".bias", {n}).values;
}

}  // namespace

EncoderWeights ModelWeights::encoder() const {
    EncoderWeights w;
    for (Level l : kLevels) {
        const std::string p = "enc." + std::string(level_name(l));
        const std::size_t d = config.level_dim(l);
        auto& lw = w.levels[static_cast<std::size_t>(l)];
        for (auto [conv, name] : {std::pair{&lw.conv1, ".conv1"}, std::pair{&lw.conv2, ".conv2"}}) {
            conv->filters = as_matrix(get(p + name + ".weight", {d, d, config.kernel}));
            conv->bias = bias(*this, p + name, d);
            conv->kernel = config.kernel;
        }
        lw.key = dense(*this, p + ".key", d, d);
        lw.value = dense(*this, p + ".value", d, d);
    }
    return w;
}

DecoderWeights ModelWeights::decoder() const {
    const auto& c = config;
    DecoderWeights w;
    w.lstm1 = lstm_view(*this, "dec.lstm1", c.d_frame + kFrameDim, c.hidden1);
    w.lstm2 = lstm_view(*this, "dec.lstm2", c.hidden1, c.hidden2);
    for (Level l : kLevels) {
        w.query[static_cast<std::size_t>(l)] =
            dense(*this, "dec.query." + std::string(level_name(l)), c.hidden2, c.level_dim(l));
    }
    w.combine = dense(*this, "dec.combine", c.context_dim(), c.d_model);
    w.out = dense(*this, "dec.out", c.d_model + c.hidden2, kFrameDim);
    w.out_bias = bias(*this, "dec.out", kFrameDim);
    return w;
}

PlainRecurrentWeights ModelWeights::plain_recurrent() const {
    const auto& c = config;
    PlainRecurrentWeights w;
    w.lstm1 = lstm_view(*this, "lstm.lstm1", c.d_frame + kFrameDim, c.hidden1);
    w.lstm2 = lstm_view(*this, "lstm.lstm2", c.hidden1, c.hidden2);
    w.out = dense(*this, "lstm.out", c.hidden2, kFrameDim);
    w.out_bias = bias(*this, "lstm.out", kFrameDim);
    return w;
}

SelfAttentionWeights ModelWeights::self_attention() const {
    const auto& c = config;
    SelfAttentionWeights w;
    w.heads = c.sa_heads;
    w.in = dense(*this, "sa.in", c.d_frame, c.sa_dim);
    w.in_bias = bias(*this, "sa.in", c.sa_dim);
    for (std::size_t i = 0; i < c.sa_layers; ++i) {
        const std::string p = "sa.layer" + std::to_string(i);
        SelfAttentionLayer layer;
        layer.wq = dense(*this, p + ".wq", c.sa_dim, c.sa_dim);
        layer.wk = dense(*this, p + ".wk", c.sa_dim, c.sa_dim);
        layer.wv = dense(*this, p + ".wv", c.sa_dim, c.sa_dim);
        layer.wo = dense(*this, p + ".wo", c.sa_dim, c.sa_dim);
        layer.bq = bias(*this, p + ".wq", c.sa_dim);
        layer.bk = bias(*this, p + ".wk", c.sa_dim);
        layer.bv = bias(*this, p + ".wv", c.sa_dim);
        layer.bo = bias(*this, p + ".wo", c.sa_dim);
        layer.ffn1 = dense(*this, p + ".ffn1", c.sa_dim, c.sa_ffn);
        layer.b1 = bias(*this, p + ".ffn1", c.sa_ffn);
        layer.ffn2 = dense(*this, p + ".ffn2", c.sa_ffn, c.sa_dim);
        layer.b2 = bias(*this, p + ".ffn2", c.sa_dim);
        w.layers.push_back(std::move(layer));
    }
    w.out = dense(*this, "sa.out", c.sa_dim, kFrameDim);
    w.out_bias = bias(*this, "sa.out", kFrameDim);
    return w;
}

// ---------------------------------------------------------------------------
// Config JSON

namespace {

json config_json(const ModelConfig& c) {
    return json{{"d_word", c.d_word},
                {"d_syllable", c.d_syllable},
                {"d_phone", c.d_phone},
                {"d_sentence", c.d_sentence},
                {"d_phrase", c.d_phrase},
                {"d_frame", c.d_frame},
                {"hidden1", c.hidden1},
                {"hidden2", c.hidden2},
                {"d_model", c.d_model},
                {"kernel", c.kernel},
                {"l_max", c.l_max},
                {"feedback", c.feedback},
                {"pooling", c.pooling},
                {"sa_layers", c.sa_layers},
                {"sa_heads", c.sa_heads},
                {"sa_dim", c.sa_dim},
                {"sa_ffn", c.sa_ffn}};
}

ModelConfig config_of(const json& j) {
    ModelConfig c;
    try {
        c.d_word = j.at("d_word").get<std::size_t>();
        c.d_syllable = j.at("d_syllable").get<std::size_t>();
        c.d_phone = j.at("d_phone").get<std::size_t>();
        c.d_sentence = j.at("d_sentence").get<std::size_t>();
        c.d_phrase = j.at("d_phrase").get<std::size_t>();
        c.d_frame = j.at("d_frame").get<std::size_t>();
        c.hidden1 = j.at("hidden1").get<std::size_t>();
        c.hidden2 = j.at("hidden2").get<std::size_t>();
        c.d_model = j.at("d_model").get<std::size_t>();
        c.kernel = j.at("kernel").get<std::size_t>();
        c.l_max = j.at("l_max").get<std::array<std::size_t, 3>>();
        c.feedback = j.at("feedback").get<bool>();
        c.pooling = j.at("pooling").get<bool>();
        c.sa_layers = j.at("sa_layers").get<std::size_t>();
        c.sa_heads = j.at("sa_heads").get<std::size_t>();
        c.sa_dim = j.at("sa_dim").get<std::size_t>();
        c.sa_ffn = j.at("sa_ffn").get<std::size_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("weights manifest: bad config: ") + e.what());
    }
    return c;
}

}  // namespace

std::string config_to_json(const ModelConfig& c) { return config_json(c).dump(); }

ModelConfig config_from_json(const std::string& text) {
    try {
        return config_of(json::parse(text));
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Serialization

std::vector<std::uint8_t> ModelWeights::to_bytes() const {
    json manifest;
    manifest["config"] = config_json(config);
    manifest["tensors"] = json::array();
    std::size_t offset = 0;
    for (const auto& [name, t] : tensors) {  // std::map iterates sorted by name
        manifest["tensors"].push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
        offset += t.values.size() * 4;
    }
    const std::string text = manifest.dump();

    std::vector<std::uint8_t> out;
    out.reserve(8 + text.size() + offset);
    bytes::put_uint<std::uint32_t>(out, kWeightsMagic);
    bytes::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& [name, t] : tensors) bytes::put_f32s(out, t.values);
    return out;
}

ModelWeights ModelWeights::from_bytes(std::span<const std::uint8_t> data) {
    static constexpr char kMagic[4] = {'S', 'M', 'W', '1'};
    if (!std::equal(data.begin(), data.begin() + std::min<std::size_t>(data.size(), 4), kMagic)) {
        throw FormatError("weights: bad magic (expected SMW1)");
    }
    if (data.size() < 8) throw IntegrityError("weights: file truncated inside the header");
    bytes::Reader r(data);
    r.uint<std::uint32_t>();
    const auto mlen = r.uint<std::uint32_t>();
    if (mlen > r.remaining()) throw IntegrityError("weights: manifest truncated");
    const auto mbytes = r.take(mlen);
    json manifest;
    try {
        manifest = json::parse(mbytes.begin(), mbytes.end());
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("weights: manifest is not valid JSON: ") + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("config") || !manifest.contains("tensors") ||
        !manifest["tensors"].is_array()) {
        throw FormatError("weights: manifest must hold config and tensors");
    }

    ModelWeights w;
    w.config = config_of(manifest["config"]);
    try {
        w.config.validate();
    } catch (const ConfigError& e) {
        throw IntegrityError(std::string("weights: ") + e.what());
    }

    std::map<std::string, std::vector<std::size_t>> known;
    for (auto kind : kModelKinds) {
        for (auto& s : required_tensors(w.config, kind)) known[s.name] = s.shape;
    }

    const auto payload = data.subspan(8 + mlen);
    std::size_t expected_offset = 0;
    std::string prev_name;
    for (const auto& entry : manifest["tensors"]) {
        Tensor t;
        std::string name;
        std::size_t offset = 0;
        try {
            name = entry.at("name").get<std::string>();
            t.shape = entry.at("shape").get<std::vector<std::size_t>>();
            offset = entry.at("offset").get<std::size_t>();
        } catch (const json::exception& e) {
            throw FormatError(std::string("weights: bad tensor entry: ") + e.what());
        }
        if (!prev_name.empty() && name <= prev_name) throw IntegrityError("weights: manifest not sorted at " + name);
        prev_name = name;
        auto it = known.find(name);
        if (it == known.end()) throw IntegrityError("weights: unknown tensor " + name);
        if (it->second != t.shape) {
            throw IntegrityError("weights: tensor " + name + " has shape " + shape_str(t.shape) + ", config needs " +
                                 shape_str(it->second));
        }
        if (offset != expected_offset) throw IntegrityError("weights: tensor " + name + " has a bad offset");
        const std::size_t nbytes = t.numel() * 4;
        if (offset + nbytes > payload.size()) {
            throw IntegrityError("weights: payload truncated inside tensor " + name);
        }
        t.values.resize(t.numel());
        for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = bytes::get_f32(payload.data() + offset + 4 * i);
        expected_offset = offset + nbytes;
        w.tensors.emplace(std::move(name), std::move(t));
    }
    if (expected_offset != payload.size()) throw IntegrityError("weights: trailing bytes after payload");
    return w;
}

ModelWeights weights_init(std::uint64_t seed, const ModelConfig& config, std::span<const ModelKind> kinds) {
    config.validate();
    std::map<std::string, TensorSpec> specs;
    for (auto kind : kinds) {
        for (auto& s : required_tensors(config, kind)) specs.emplace(s.name, s);
    }
    Xorshift64Star rng(seed);
    ModelWeights w;
    w.config = config;
    for (const auto& [name, spec] : specs) {
        Tensor t;
        t.shape = spec.shape;
        t.values.assign(t.numel(), 0.0f);
        if (spec.fan_in + spec.fan_out > 0) {
            const double bound = std::sqrt(6.0 / static_cast<double>(spec.fan_in + spec.fan_out));
            for (auto& v : t.values) v = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
        }
        w.tensors.emplace(name, std::move(t));
    }
    return w;
}

void weights_save(const ModelWeights& w, const std::string& path) {
    const auto data = w.to_bytes();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write weights file " + path);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed for " + path);
}

ModelWeights weights_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open weights file " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ModelWeights::from_bytes(data);
}

}  // namespace mrtts
