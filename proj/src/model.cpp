#include "necho/model.hpp"

#include <algorithm>

namespace necho {

const std::vector<std::string>& Ablations::names() {
    static const std::vector<std::string> kNames = {"drop_code",     "drop_demo",      "drop_note",
                                                    "no_transformers", "no_mag",       "no_contrastive",
                                                    "no_hierarchy",  "no_code_centring"};
    return kNames;
}

namespace {

bool* ablation_flag(Ablations& a, const std::string& name) {
    if (name == "drop_code") return &a.drop_code;
    if (name == "drop_demo") return &a.drop_demo;
    if (name == "drop_note") return &a.drop_note;
    if (name == "no_transformers") return &a.no_transformers;
    if (name == "no_mag") return &a.no_mag;
    if (name == "no_contrastive") return &a.no_contrastive;
    if (name == "no_hierarchy") return &a.no_hierarchy;
    if (name == "no_code_centring") return &a.no_code_centring;
    throw ConfigError("unknown ablation '" + name + "'");
}

}  // namespace

void Ablations::enable(const std::string& name) { *ablation_flag(*this, name) = true; }

bool Ablations::is_enabled(const std::string& name) const {
    Ablations copy = *this;
    return *ablation_flag(copy, name);
}

std::vector<std::string> Ablations::enabled() const {
    std::vector<std::string> out;
    for (const auto& n : names())
        if (is_enabled(n)) out.push_back(n);
    return out;
}

NechoModel::NechoModel(const ModelConfig& cfg, const Ablations& ablations, std::uint64_t init_seed)
    : cfg_(cfg), ablations_(ablations) {
    cfg_.validate();
    if (ablations_.drop_code && ablations_.drop_demo && ablations_.drop_note)
        throw ConfigError("at least one modality must remain");
    Initializer init(init_seed);
    encoders_ = EncoderParams(params_, cfg_, init);
    const char* names[3] = {"code", "demo", "note"};
    for (std::size_t m = 0; m < 3; ++m)
        projectors_[m] = Conv1d(params_, std::string("projector.") + names[m], cfg_.projector_width,
                                cfg_.d_model, cfg_.d_model, init);
    if (!ablations_.no_transformers) {
        cmt_demo_.emplace(params_, "fusion.cmt_h", cfg_, init);
        cmt_note_.emplace(params_, "fusion.cmt_w", cfg_, init);
        for (std::size_t m = 0; m < 3; ++m)
            sa_[m].emplace(params_, std::string("fusion.sa_") + names[m], cfg_, init);
    }
    if (ablations_.no_mag) {
        concat_fusion_ = Linear(params_, "fusion.concat", 3 * cfg_.d_model, cfg_.d_model, init);
        mag_.norm = LayerNorm(params_, "fusion.mag.norm", cfg_.d_model, cfg_.layer_norm_eps);
    } else if (ablations_.no_code_centring) {
        mag_.norm = LayerNorm(params_, "fusion.mag.norm", cfg_.d_model, cfg_.layer_norm_eps);
    } else {
        mag_ = MagParams(params_, "fusion.mag", cfg_, init);
    }
    head_ = Linear(params_, "head", cfg_.d_model, cfg_.num_leaves, init);
}

ForwardOutput NechoModel::forward(const Batch& batch, const ForwardContext& ctx) const {
    const Index rows = batch.rows();
    if (batch.codes.cols() != cfg_.num_leaves)
        throw DimensionError("batch has " + std::to_string(batch.codes.cols()) + " leaf codes, model expects " +
                             std::to_string(cfg_.num_leaves));
    ForwardOutput out;
    out.row_mask.resize(rows, 1);
    std::vector<std::uint8_t> include(static_cast<std::size_t>(rows));
    for (Index b = 0; b < batch.n_patients; ++b)
        for (Index t = 0; t < batch.max_visits; ++t) {
            const Index r = batch.row(b, t);
            out.row_mask(r, 0) = batch.target_mask(b, t);
            include[static_cast<std::size_t>(r)] = batch.target_mask(b, t) != 0.0;
        }
    const Tensor mask(out.row_mask);

    out.encoded[0] = ctx.drop(encode_codes(batch.codes, encoders_.code));
    out.encoded[1] = ctx.drop(encode_demographics(batch.demographics, encoders_.demo));
    out.encoded[2] = ctx.drop(encode_notes(batch.notes, batch.note_lengths, include, encoders_.note));

    const bool dropped[3] = {ablations_.drop_code, ablations_.drop_demo, ablations_.drop_note};
    for (std::size_t m = 0; m < 3; ++m) {
        out.parent_probabilities[m] = hierarchy_head(out.encoded[m], encoders_.hierarchy_heads[m]);
        out.projected[m] = dropped[m] ? Tensor::zeros(rows, cfg_.d_model)
                                      : mul(projectors_[m](out.encoded[m]), mask);
    }

    const Matrix allowed = attention_mask(batch.n_patients, batch.max_visits, batch.target_mask, cfg_.causal);
    if (!ablations_.no_transformers) {
        out.code_to_demo = cmt_forward(out.projected[0], out.projected[1], *cmt_demo_, allowed, ctx);
        out.code_to_note = cmt_forward(out.projected[0], out.projected[2], *cmt_note_, allowed, ctx);
        out.code_out = self_attention_stream(out.projected[0], *sa_[0], allowed, ctx);
        out.code_to_demo_out = self_attention_stream(out.code_to_demo, *sa_[1], allowed, ctx);
        out.code_to_note_out = self_attention_stream(out.code_to_note, *sa_[2], allowed, ctx);
        if (!ablations_.no_code_centring) out.code_out = code_residual(out.code_out, out.projected[0]);
    } else {
        out.code_out = out.projected[0];
        out.code_to_demo_out = out.projected[1];
        out.code_to_note_out = out.projected[2];
    }

    if (ablations_.no_mag) {
        const Tensor joined = concat({out.code_out, out.code_to_demo_out, out.code_to_note_out}, Axis::Cols);
        out.fused = ctx.drop(mag_.norm(concat_fusion_(joined)));
    } else if (ablations_.no_code_centring) {
        out.fused = ctx.drop(mag_.norm(add(add(out.code_out, out.code_to_demo_out), out.code_to_note_out)));
    } else {
        out.fused = mag_fuse(out.code_out, out.code_to_demo_out, out.code_to_note_out, mag_, ctx, &out.mag);
    }
    out.probabilities = predict(out.fused, head_);
    return out;
}

}  // namespace necho
