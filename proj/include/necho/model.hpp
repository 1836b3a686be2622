#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "necho/data.hpp"
#include "necho/encoders.hpp"
#include "necho/fusion.hpp"
#include "necho/model_config.hpp"

namespace necho {

enum class Modality { Code = 0, Demo = 1, Note = 2 };

/// Everything one forward pass produces. Per-visit tensors use the batch's
/// flattened row layout; rows without a next-visit target are zero in the
/// projected streams.
struct ForwardOutput {
    Tensor probabilities;                       // rows x |C|
    std::array<Tensor, 3> parent_probabilities;  // rows x |A|, per modality
    std::array<Tensor, 3> encoded;               // encoder outputs, rows x d
    std::array<Tensor, 3> projected;             // temporal projector outputs, rows x d
    Tensor code_to_demo;                         // CMT outputs, undefined without transformers
    Tensor code_to_note;
    Tensor code_out;  // SA outputs (code one after the residual)
    Tensor code_to_demo_out;
    Tensor code_to_note_out;
    Tensor fused;
    Matrix row_mask;  // rows x 1
    MagTrace mag;
};

/// The full multimodal model: three encoders, projectors, two code-anchored
/// cross-modal transformers, three self-attention streams, the adaptation
/// gate and the prediction head, plus the three parent-level heads.
class NechoModel {
  public:
    NechoModel(const ModelConfig& cfg, const Ablations& ablations, std::uint64_t init_seed);
    NechoModel(const NechoModel&) = delete;
    NechoModel& operator=(const NechoModel&) = delete;
    NechoModel(NechoModel&&) = default;
    NechoModel& operator=(NechoModel&&) = default;

    ForwardOutput forward(const Batch& batch, const ForwardContext& ctx) const;

    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    const Ablations& ablations() const { return ablations_; }

    const EncoderParams& encoders() const { return encoders_; }
    const std::array<Conv1d, 3>& projectors() const { return projectors_; }
    const std::optional<CrossModalTransformerParams>& cmt(Modality target) const {
        return target == Modality::Demo ? cmt_demo_ : cmt_note_;
    }
    const std::optional<SelfAttentionParams>& self_attention(Modality stream) const {
        return sa_[static_cast<std::size_t>(stream)];
    }
    const MagParams& mag() const { return mag_; }
    const Linear& head() const { return head_; }

  private:
    ModelConfig cfg_;
    Ablations ablations_;
    ParameterSet params_;
    EncoderParams encoders_;
    std::array<Conv1d, 3> projectors_;
    std::optional<CrossModalTransformerParams> cmt_demo_;
    std::optional<CrossModalTransformerParams> cmt_note_;
    std::array<std::optional<SelfAttentionParams>, 3> sa_;
    MagParams mag_;
    Linear concat_fusion_;  // only with no_mag
    Linear head_;
};

}  // namespace necho
