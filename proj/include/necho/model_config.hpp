#pragma once

#include <string>
#include <vector>

#include "necho/types.hpp"

namespace necho {

/// Architecture sizes and switches shared by the encoders and the fusion stack.
struct ModelConfig {
    Index num_leaves = 120;
    Index num_parents = 12;
    Index vocab_size = 2000;

    Index d_model = 256;
    Index d_word = 200;
    Index d_note = 512;
    std::vector<Index> filter_widths = {2, 3, 4};
    Index heads = 4;
    Index layers = 3;
    Index d_ff = 512;  // transformer position-wise feed-forward width
    Index projector_width = 1;
    Scalar dropout = 0.1;
    Scalar layer_norm_eps = 1e-5;
    bool causal = true;
    bool freeze_word_embeddings = false;
    Scalar embedding_init_std = 0.02;  // code, demographic and word tables start at N(0, std^2)

    /// Width of each per-attribute demographic embedding (d_model / 6 rounded).
    Index demo_dim() const { return (d_model + 3) / 6; }

    void validate() const;
};

/// Architecture ablations. Modality drops zero the stream after its temporal
/// projector; loss ablations are applied by the trainer.
struct Ablations {
    bool drop_code = false;
    bool drop_demo = false;
    bool drop_note = false;
    bool no_transformers = false;
    bool no_mag = false;
    bool no_contrastive = false;
    bool no_hierarchy = false;
    bool no_code_centring = false;

    static const std::vector<std::string>& names();
    /// Turns on the named switch; unknown names are a ConfigError.
    void enable(const std::string& name);
    bool is_enabled(const std::string& name) const;
    std::vector<std::string> enabled() const;
    bool operator==(const Ablations&) const = default;
};

}  // namespace necho
