#pragma once

#include <array>
#include <optional>
#include <random>
#include <vector>

#include "necho/model_config.hpp"
#include "necho/nn.hpp"

namespace necho {

/// Train/eval switch plus the dropout RNG. Eval mode never touches the RNG.
struct ForwardContext {
    bool training = false;
    std::mt19937_64* rng = nullptr;
    Scalar dropout_rate = 0.0;

    Tensor drop(const Tensor& x) const;
};

/// Allowed (query, key) pairs for attention over the flattened batch layout:
/// same patient, key visit has a target (is real input), and, when causal,
/// key position <= query position. A query row with no admissible key
/// attends to itself.
Matrix attention_mask(Index n_patients, Index max_visits, const Matrix& valid, bool causal);

/// Multi-head attention projections; all four maps are d x d.
struct AttentionParams {
    AttentionParams() = default;
    AttentionParams(ParameterSet& params, const std::string& name, Index d_model, Index heads,
                    Initializer& init);

    Linear wq, wk, wv, wo;
    Index heads = 1;
};

/// Weights of one forward pass of `cross_modal_attention`, per head.
struct AttentionTrace {
    std::vector<Matrix> weights;
};

/// Softmax(Q K^T / sqrt(d_k)) V with Q from `query_source` and K, V from
/// `kv_source`, split over heads, followed by the output projection.
Tensor cross_modal_attention(const Tensor& query_source, const Tensor& kv_source,
                             const AttentionParams& p, const Matrix& allowed,
                             AttentionTrace* trace = nullptr);

struct FeedForwardParams {
    FeedForwardParams() = default;
    FeedForwardParams(ParameterSet& params, const std::string& name, Index d_model, Index d_ff,
                      Initializer& init);

    Tensor operator()(const Tensor& x, const ForwardContext& ctx) const;

    Linear fc1, fc2;
};

struct CrossModalLayer {
    LayerNorm ln_query;
    LayerNorm ln_source;
    LayerNorm ln_ffn;
    AttentionParams attn;
    FeedForwardParams ffn;
};

struct CrossModalTransformerParams {
    CrossModalTransformerParams() = default;
    CrossModalTransformerParams(ParameterSet& params, const std::string& name, const ModelConfig& cfg,
                                Initializer& init);
    std::vector<CrossModalLayer> layers;
};

/// Code-anchored cross-modal transformer. The stream starts as the target
/// modality; each layer attends from LN(stream) into LN(code stream) with a
/// residual on LN(stream), then a feed-forward block with a residual on its
/// normalised input.
Tensor cmt_forward(const Tensor& code_stream, const Tensor& target_stream,
                   const CrossModalTransformerParams& p, const Matrix& allowed,
                   const ForwardContext& ctx);

struct SelfAttentionLayer {
    LayerNorm ln_attn;
    LayerNorm ln_ffn;
    AttentionParams attn;
    FeedForwardParams ffn;
};

struct SelfAttentionParams {
    SelfAttentionParams() = default;
    SelfAttentionParams(ParameterSet& params, const std::string& name, const ModelConfig& cfg,
                        Initializer& init);
    std::vector<SelfAttentionLayer> layers;
    LayerNorm ln_final;
};

/// Pre-norm transformer encoder over the visits of each patient.
/// Causality is carried by `allowed`.
Tensor self_attention_stream(const Tensor& input, const SelfAttentionParams& p,
                             const Matrix& allowed, const ForwardContext& ctx);

inline Tensor code_residual(const Tensor& code_output, const Tensor& code_stream) {
    return add(code_output, code_stream);
}

struct MagParams {
    MagParams() = default;
    MagParams(ParameterSet& params, const std::string& name, const ModelConfig& cfg, Initializer& init);

    Linear gate;          // 3d -> 1
    Linear displacement;  // 2d -> d
    Tensor beta;          // 1 x 1, trainable
    LayerNorm norm;
};

struct MagTrace {
    Matrix gate;          // rows x 1
    Matrix displacement;  // rows x d
    Matrix alpha;         // rows x 1
    Matrix pre_norm;      // rows x d
};

/// Below this displacement norm the scale is defined as zero.
inline constexpr Scalar kDisplacementGuard = 1e-12;

/// Code-centric adaptation gate: g = Linear(yc ++ ych ++ ycw),
/// H = Linear(g * (ych ++ ycw)), alpha = clamp(|yc| / |H| * beta, 0, 1),
/// M = dropout(LN(yc + alpha H)).
Tensor mag_fuse(const Tensor& code, const Tensor& code_to_demo, const Tensor& code_to_note,
                const MagParams& p, const ForwardContext& ctx, MagTrace* trace = nullptr);

/// Sigmoid(Linear(M)) over the leaf label space.
Tensor predict(const Tensor& fused, const Linear& head);

}  // namespace necho
