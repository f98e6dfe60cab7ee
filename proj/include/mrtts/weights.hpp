#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mrtts/baselines.hpp"
#include "mrtts/config.hpp"
#include "mrtts/decoder.hpp"
#include "mrtts/encoder.hpp"

namespace mrtts {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<float> values;

    std::size_t numel() const;
    bool operator==(const Tensor&) const = default;
};

struct TensorSpec {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t fan_in = 0;   // 0 for biases
    std::size_t fan_out = 0;
};

// Every tensor `kind` needs under `config`, sorted by name. The two
// multi-rate variants share one set.
std::vector<TensorSpec> required_tensors(const ModelConfig& config, ModelKind kind);

// Named-tensor container plus the config the tensors were shaped for.
//
// File layout ("SMW1"):
//   bytes 0..3   magic "SMW1"
//   bytes 4..7   manifest length N, uint32 little-endian
//   next N bytes manifest, compact JSON:
//                {"config": {...}, "tensors": [{"name", "shape", "offset"}...]}
//                tensors sorted by name, offset in bytes from payload start
//   remainder    payload, float32 little-endian, tensors back to back
class ModelWeights {
public:
    ModelConfig config;
    std::map<std::string, Tensor> tensors;

    bool has(ModelKind kind) const;
    // Throws IntegrityError if missing or mis-shaped.
    const Tensor& get(const std::string& name, const std::vector<std::size_t>& shape) const;

    EncoderWeights encoder() const;
    DecoderWeights decoder() const;
    PlainRecurrentWeights plain_recurrent() const;
    SelfAttentionWeights self_attention() const;

    std::vector<std::uint8_t> to_bytes() const;
    static ModelWeights from_bytes(std::span<const std::uint8_t> data);

    bool operator==(const ModelWeights& o) const { return to_bytes() == o.to_bytes(); }
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)) per weight tensor, zero biases,
// drawn from Xorshift64Star(seed) in manifest order.
ModelWeights weights_init(std::uint64_t seed, const ModelConfig& config, std::span<const ModelKind> kinds);

void weights_save(const ModelWeights& w, const std::string& path);
ModelWeights weights_load(const std::string& path);

std::string config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const std::string& text);

}  // namespace mrtts
