#include "mrtts/config.hpp"

#include <string>

#include "mrtts/errors.hpp"

namespace mrtts {

void ModelConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("invalid config: ") + what);
    };
    require(d_word > 0 && d_syllable > 0 && d_phone > 0, "level dims must be positive");
    require(d_frame == kFramePositionalDim + d_sentence + d_phrase, "d_frame must equal 8 + d_sentence + d_phrase");
    require(hidden1 > 0 && hidden2 > 0 && d_model > 0, "hidden dims must be positive");
    require(kernel % 2 == 1, "kernel size must be odd");
    for (auto v : l_max) require(v >= 1, "l_max must be >= 1");
    require(sa_layers > 0 && sa_heads > 0 && sa_ffn > 0, "self-attention dims must be positive");
    require(sa_dim > 0 && sa_dim % sa_heads == 0, "sa_dim must be a positive multiple of sa_heads");
}

}  // namespace mrtts
