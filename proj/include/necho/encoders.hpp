#pragma once

#include <array>
#include <span>
#include <vector>

#include "necho/data.hpp"
#include "necho/model_config.hpp"
#include "necho/nn.hpp"

namespace necho {

/// Bag-of-codes embedding followed by Linear + ReLU.
struct CodeEncoderParams {
    CodeEncoderParams() = default;
    CodeEncoderParams(ParameterSet& params, const ModelConfig& cfg, Initializer& init);

    Tensor embedding;  // |C| x d
    Linear projection;
};

/// One table per demographic attribute; lookups are concatenated and projected.
struct DemographicEncoderParams {
    DemographicEncoderParams() = default;
    DemographicEncoderParams(ParameterSet& params, const ModelConfig& cfg, Initializer& init);

    std::array<Tensor, kNumDemographics> tables;
    Linear projection;
};

/// Word embeddings, one conv per filter width with ReLU and max over time,
/// concatenation, then Linear + ReLU.
struct NoteEncoderParams {
    NoteEncoderParams() = default;
    NoteEncoderParams(ParameterSet& params, const ModelConfig& cfg, Initializer& init);

    Tensor words;  // vocab x d_word
    std::vector<Conv1d> convs;
    Linear projection;
};

struct EncoderParams {
    EncoderParams() = default;
    EncoderParams(ParameterSet& params, const ModelConfig& cfg, Initializer& init);

    CodeEncoderParams code;
    DemographicEncoderParams demo;
    NoteEncoderParams note;
    /// Parent-level heads for codes, demographics and notes, in that order.
    std::array<Linear, 3> hierarchy_heads;
};

/// `multi_hot` is rows x |C|. Duplicates and order are irrelevant by construction.
Tensor encode_codes(const Matrix& multi_hot, const CodeEncoderParams& p);

/// `demo` is rows x 6 attribute indices.
Tensor encode_demographics(const IndexMatrix& demo, const DemographicEncoderParams& p);

/// Encodes the rows of `notes` selected by `include`; other rows get a zero
/// pooled feature (so their output is ReLU(bias)). A row's note is its first
/// `lengths[r]` tokens, padded with kPadToken up to kMinNoteLength.
Tensor encode_notes(const IndexMatrix& notes, std::span<const Index> lengths,
                    std::span<const std::uint8_t> include, const NoteEncoderParams& p);

/// Convenience overload for a single note (1 x d output).
Tensor encode_note(std::span<const Index> tokens, const NoteEncoderParams& p);

/// Sigmoid(Linear(x)): per-row parent-space probabilities.
Tensor hierarchy_head(const Tensor& features, const Linear& head);

/// Max over time of each row segment [start, start + count) of `x`.
/// Segments with count 0 yield a zero row.
Tensor segment_max_pool(const Tensor& x, std::span<const std::pair<Index, Index>> segments);

}  // namespace necho
