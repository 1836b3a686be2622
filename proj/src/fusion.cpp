#include "necho/fusion.hpp"

#include <cmath>

namespace necho {

Tensor ForwardContext::drop(const Tensor& x) const {
    if (!training || dropout_rate == 0.0) return x;
    if (rng == nullptr) throw ConfigError("training-mode forward pass needs an RNG for dropout");
    return dropout(x, dropout_rate, training, *rng);
}

Matrix attention_mask(Index n_patients, Index max_visits, const Matrix& valid, bool causal) {
    if (valid.rows() != n_patients || valid.cols() != max_visits)
        throw DimensionError("attention_mask: validity matrix must be patients x visits");
    const Index rows = n_patients * max_visits;
    Matrix allowed = Matrix::Zero(rows, rows);
    for (Index b = 0; b < n_patients; ++b) {
        for (Index tq = 0; tq < max_visits; ++tq) {
            const Index q = b * max_visits + tq;
            bool any = false;
            for (Index tk = 0; tk < max_visits; ++tk) {
                if (valid(b, tk) == 0.0 || (causal && tk > tq)) continue;
                allowed(q, b * max_visits + tk) = 1.0;
                any = true;
            }
            if (!any) allowed(q, q) = 1.0;
        }
    }
    return allowed;
}

AttentionParams::AttentionParams(ParameterSet& params, const std::string& name, Index d_model,
                                 Index heads_, Initializer& init)
    : wq(params, name + ".wq", d_model, d_model, init),
      wk(params, name + ".wk", d_model, d_model, init),
      wv(params, name + ".wv", d_model, d_model, init),
      wo(params, name + ".wo", d_model, d_model, init),
      heads(heads_) {}

Tensor cross_modal_attention(const Tensor& query_source, const Tensor& kv_source,
                             const AttentionParams& p, const Matrix& allowed, AttentionTrace* trace) {
    if (query_source.cols() != kv_source.cols())
        throw DimensionError("cross_modal_attention: stream widths differ (" +
                             to_string(query_source.shape()) + " vs " + to_string(kv_source.shape()) + ")");
    if (allowed.rows() != query_source.rows() || allowed.cols() != kv_source.rows())
        throw DimensionError("cross_modal_attention: mask does not match the streams");
    const Tensor q = p.wq(query_source);
    const Tensor k = p.wk(kv_source);
    const Tensor v = p.wv(kv_source);
    const Index d = q.cols();
    const Index dk = d / p.heads;
    const Scalar inv_sqrt = 1.0 / std::sqrt(static_cast<Scalar>(dk));
    std::vector<Tensor> heads;
    for (Index h = 0; h < p.heads; ++h) {
        const Tensor qh = p.heads == 1 ? q : slice_cols(q, h * dk, dk);
        const Tensor kh = p.heads == 1 ? k : slice_cols(k, h * dk, dk);
        const Tensor vh = p.heads == 1 ? v : slice_cols(v, h * dk, dk);
        const Tensor weights = masked_softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), allowed);
        if (trace != nullptr) trace->weights.push_back(weights.value());
        heads.push_back(matmul(weights, vh));
    }
    return p.wo(heads.size() == 1 ? heads.front() : concat(heads, Axis::Cols));
}

FeedForwardParams::FeedForwardParams(ParameterSet& params, const std::string& name, Index d_model,
                                     Index d_ff, Initializer& init)
    : fc1(params, name + ".fc1", d_model, d_ff, init), fc2(params, name + ".fc2", d_ff, d_model, init) {}

Tensor FeedForwardParams::operator()(const Tensor& x, const ForwardContext& ctx) const {
    return ctx.drop(fc2(ctx.drop(relu(fc1(x)))));
}

CrossModalTransformerParams::CrossModalTransformerParams(ParameterSet& params, const std::string& name,
                                                         const ModelConfig& cfg, Initializer& init) {
    for (Index i = 0; i < cfg.layers; ++i) {
        const std::string prefix = name + ".layer" + std::to_string(i);
        CrossModalLayer layer;
        layer.ln_query = LayerNorm(params, prefix + ".ln_query", cfg.d_model, cfg.layer_norm_eps);
        layer.ln_source = LayerNorm(params, prefix + ".ln_source", cfg.d_model, cfg.layer_norm_eps);
        layer.ln_ffn = LayerNorm(params, prefix + ".ln_ffn", cfg.d_model, cfg.layer_norm_eps);
        layer.attn = AttentionParams(params, prefix + ".attn", cfg.d_model, cfg.heads, init);
        layer.ffn = FeedForwardParams(params, prefix + ".ffn", cfg.d_model, cfg.d_ff, init);
        layers.push_back(std::move(layer));
    }
}

Tensor cmt_forward(const Tensor& code_stream, const Tensor& target_stream,
                   const CrossModalTransformerParams& p, const Matrix& allowed,
                   const ForwardContext& ctx) {
    if (code_stream.rows() != target_stream.rows() || code_stream.cols() != target_stream.cols())
        throw DimensionError("cmt_forward: streams must share shape, got " + to_string(code_stream.shape()) +
                             " and " + to_string(target_stream.shape()));
    Tensor z = target_stream;
    for (const auto& layer : p.layers) {
        const Tensor zn = layer.ln_query(z);
        const Tensor source = layer.ln_source(code_stream);
        const Tensor attended = add(ctx.drop(cross_modal_attention(zn, source, layer.attn, allowed)), zn);
        const Tensor an = layer.ln_ffn(attended);
        z = add(layer.ffn(an, ctx), an);
    }
    return z;
}

SelfAttentionParams::SelfAttentionParams(ParameterSet& params, const std::string& name,
                                         const ModelConfig& cfg, Initializer& init) {
    for (Index i = 0; i < cfg.layers; ++i) {
        const std::string prefix = name + ".layer" + std::to_string(i);
        SelfAttentionLayer layer;
        layer.ln_attn = LayerNorm(params, prefix + ".ln_attn", cfg.d_model, cfg.layer_norm_eps);
        layer.ln_ffn = LayerNorm(params, prefix + ".ln_ffn", cfg.d_model, cfg.layer_norm_eps);
        layer.attn = AttentionParams(params, prefix + ".attn", cfg.d_model, cfg.heads, init);
        layer.ffn = FeedForwardParams(params, prefix + ".ffn", cfg.d_model, cfg.d_ff, init);
        layers.push_back(std::move(layer));
    }
    ln_final = LayerNorm(params, name + ".ln_final", cfg.d_model, cfg.layer_norm_eps);
}

Tensor self_attention_stream(const Tensor& input, const SelfAttentionParams& p, const Matrix& allowed,
                             const ForwardContext& ctx) {
    Tensor x = input;
    for (const auto& layer : p.layers) {
        const Tensor xn = layer.ln_attn(x);
        x = add(x, ctx.drop(cross_modal_attention(xn, xn, layer.attn, allowed)));
        x = add(x, layer.ffn(layer.ln_ffn(x), ctx));
    }
    return p.ln_final(x);
}

MagParams::MagParams(ParameterSet& params, const std::string& name, const ModelConfig& cfg,
                     Initializer& init)
    : gate(params, name + ".gate", 3 * cfg.d_model, 1, init),
      displacement(params, name + ".displacement", 2 * cfg.d_model, cfg.d_model, init),
      beta(params.create(name + ".beta", init.uniform(1, 1, 0.0, 1.0))),
      norm(params, name + ".norm", cfg.d_model, cfg.layer_norm_eps) {}

Tensor mag_fuse(const Tensor& code, const Tensor& code_to_demo, const Tensor& code_to_note,
                const MagParams& p, const ForwardContext& ctx, MagTrace* trace) {
    const Tensor g = p.gate(concat({code, code_to_demo, code_to_note}, Axis::Cols));
    const Tensor h = p.displacement(mul(concat({code_to_demo, code_to_note}, Axis::Cols), g));

    const Tensor code_norm = row_l2_norm(code);
    const Tensor disp_norm = row_l2_norm(h);
    // Rows whose displacement vanishes get alpha = 0; shift their denominator
    // to 1 so the division stays finite, then mask them out.
    Matrix keep = Matrix::Ones(h.rows(), 1);
    Matrix shift = Matrix::Zero(h.rows(), 1);
    for (Index r = 0; r < h.rows(); ++r) {
        if (disp_norm.value()(r, 0) < kDisplacementGuard) {
            keep(r, 0) = 0.0;
            shift(r, 0) = 1.0;
        }
    }
    const Tensor ratio = div(code_norm, add(disp_norm, Tensor(shift)));
    const Tensor alpha = mul(clamp(mul(ratio, p.beta), 0.0, 1.0), Tensor(keep));
    const Tensor fused = add(code, mul(h, alpha));
    if (trace != nullptr) {
        trace->gate = g.value();
        trace->displacement = h.value();
        trace->alpha = alpha.value();
        trace->pre_norm = fused.value();
    }
    return ctx.drop(p.norm(fused));
}

Tensor predict(const Tensor& fused, const Linear& head) { return sigmoid(head(fused)); }

}  // namespace necho
