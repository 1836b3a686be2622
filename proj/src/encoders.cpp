#include "necho/encoders.hpp"

#include <string>

namespace necho {

void ModelConfig::validate() const {
    if (num_leaves < 2 || num_parents < 1 || num_parents >= num_leaves)
        throw ConfigError("label spaces must satisfy 1 <= |A| < |C|");
    if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
    if (d_model < 1 || d_word < 1 || d_note < 1 || d_ff < 1)
        throw ConfigError("model dimensions must be positive");
    if (heads < 1 || d_model % heads != 0)
        throw ConfigError("d_model (" + std::to_string(d_model) + ") must be divisible by heads (" +
                          std::to_string(heads) + ")");
    if (layers < 0) throw ConfigError("layers must be >= 0");
    if (filter_widths.empty()) throw ConfigError("at least one note filter width is required");
    for (const Index f : filter_widths)
        if (f < 1 || f > kMinNoteLength)
            throw ConfigError("note filter widths must lie in [1, " + std::to_string(kMinNoteLength) + "]");
    if (projector_width != 1) throw ConfigError("only width-1 temporal projectors are supported");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    if (!(embedding_init_std > 0.0)) throw ConfigError("embedding_init_std must be positive");
}

CodeEncoderParams::CodeEncoderParams(ParameterSet& params, const ModelConfig& cfg, Initializer& init)
    : embedding(params.create("encoders.code.embedding", init.normal(cfg.num_leaves, cfg.d_model, cfg.embedding_init_std))),
      projection(params, "encoders.code.proj", cfg.d_model, cfg.d_model, init) {}

DemographicEncoderParams::DemographicEncoderParams(ParameterSet& params, const ModelConfig& cfg,
                                                   Initializer& init) {
    const Index k = cfg.demo_dim();
    for (std::size_t a = 0; a < kNumDemographics; ++a)
        tables[a] = params.create("encoders.demo.table" + std::to_string(a),
                                  init.normal(kDemographicCardinality[a], k, cfg.embedding_init_std));
    projection = Linear(params, "encoders.demo.proj", k * static_cast<Index>(kNumDemographics), cfg.d_model, init);
}

NoteEncoderParams::NoteEncoderParams(ParameterSet& params, const ModelConfig& cfg, Initializer& init)
    : words(params.create("encoders.note.words", init.normal(cfg.vocab_size, cfg.d_word, cfg.embedding_init_std))) {
    if (cfg.freeze_word_embeddings) words.set_requires_grad(false);
    for (const Index f : cfg.filter_widths)
        convs.emplace_back(params, "encoders.note.conv" + std::to_string(f), f, cfg.d_word, cfg.d_note, init);
    projection = Linear(params, "encoders.note.proj", cfg.d_note * static_cast<Index>(convs.size()),
                        cfg.d_model, init);
}

EncoderParams::EncoderParams(ParameterSet& params, const ModelConfig& cfg, Initializer& init)
    : code(params, cfg, init), demo(params, cfg, init), note(params, cfg, init) {
    const char* names[3] = {"code", "demo", "note"};
    for (std::size_t m = 0; m < 3; ++m)
        hierarchy_heads[m] = Linear(params, std::string("encoders.hrchy_") + names[m], cfg.d_model,
                                    cfg.num_parents, init);
}

Tensor encode_codes(const Matrix& multi_hot, const CodeEncoderParams& p) {
    if (multi_hot.cols() != p.embedding.rows())
        throw DimensionError("encode_codes: multi-hot width " + std::to_string(multi_hot.cols()) +
                             " != |C| = " + std::to_string(p.embedding.rows()));
    // Summing the rows of present codes is a product with the multi-hot matrix.
    const Tensor bag = matmul(Tensor(multi_hot), p.embedding);
    return relu(p.projection(bag));
}

Tensor encode_demographics(const IndexMatrix& demo, const DemographicEncoderParams& p) {
    if (demo.cols() != static_cast<Index>(kNumDemographics))
        throw DimensionError("encode_demographics: expected 6 attributes per visit, got " +
                             std::to_string(demo.cols()));
    std::vector<Tensor> parts;
    for (std::size_t a = 0; a < kNumDemographics; ++a) {
        std::vector<Index> idx(static_cast<std::size_t>(demo.rows()));
        for (Index r = 0; r < demo.rows(); ++r) {
            const auto v = demo(r, static_cast<Index>(a));
            if (v < 0 || v >= p.tables[a].rows())
                throw std::out_of_range("demographic attribute " + std::to_string(a) + " value " +
                                        std::to_string(v) + " outside [0, " +
                                        std::to_string(p.tables[a].rows()) + ")");
            idx[static_cast<std::size_t>(r)] = v;
        }
        parts.push_back(embedding(p.tables[a], idx));
    }
    return relu(p.projection(concat(parts, Axis::Cols)));
}

Tensor segment_max_pool(const Tensor& x, std::span<const std::pair<Index, Index>> segments) {
    const auto n = static_cast<Index>(segments.size());
    Matrix v = Matrix::Zero(n, x.cols());
    std::vector<Index> arg(static_cast<std::size_t>(n * x.cols()), -1);
    for (Index s = 0; s < n; ++s) {
        const auto [start, count] = segments[static_cast<std::size_t>(s)];
        if (count == 0) continue;
        if (start < 0 || count < 0 || start + count > x.rows())
            throw DimensionError("segment_max_pool: segment outside " + to_string(x.shape()));
        for (Index c = 0; c < x.cols(); ++c) {
            Index best = start;
            for (Index r = start + 1; r < start + count; ++r)
                if (x.value()(r, c) > x.value()(best, c)) best = r;
            arg[static_cast<std::size_t>(s * x.cols() + c)] = best;
            v(s, c) = x.value()(best, c);
        }
    }
    auto xi = x.impl();
    const Index cols = x.cols();
    return make_node("segment_max_pool", std::move(v), {x}, [xi, arg, cols](const Matrix& g) {
        if (!xi->requires_grad) return;
        Matrix dx = Matrix::Zero(xi->value.rows(), cols);
        for (std::size_t i = 0; i < arg.size(); ++i) {
            if (arg[i] < 0) continue;
            const auto s = static_cast<Index>(i) / cols;
            const auto c = static_cast<Index>(i) % cols;
            dx(arg[i], c) += g(s, c);
        }
        accumulate_grad(*xi, dx);
    });
}

Tensor encode_notes(const IndexMatrix& notes, std::span<const Index> lengths,
                    std::span<const std::uint8_t> include, const NoteEncoderParams& p) {
    const Index rows = notes.rows();
    if (static_cast<Index>(lengths.size()) != rows || static_cast<Index>(include.size()) != rows)
        throw DimensionError("encode_notes: lengths/include do not match " + std::to_string(rows) + " rows");

    // All selected notes go through one embedding and one conv per width;
    // windows straddling two notes are computed but never pooled.
    std::vector<Index> tokens;
    std::vector<std::pair<Index, Index>> spans(static_cast<std::size_t>(rows), {0, 0});
    for (Index r = 0; r < rows; ++r) {
        if (!include[static_cast<std::size_t>(r)]) continue;
        const Index len = lengths[static_cast<std::size_t>(r)];
        if (len < 0 || len > notes.cols())
            throw DimensionError("encode_notes: note length " + std::to_string(len) + " outside padded width");
        const auto start = static_cast<Index>(tokens.size());
        for (Index w = 0; w < len; ++w) tokens.push_back(notes(r, w));
        for (Index w = len; w < kMinNoteLength; ++w) tokens.push_back(kPadToken);
        spans[static_cast<std::size_t>(r)] = {start, static_cast<Index>(tokens.size()) - start};
    }

    std::vector<Tensor> pooled;
    if (tokens.empty()) {
        for (const auto& conv : p.convs) pooled.push_back(Tensor::zeros(rows, conv.kernels.cols()));
    } else {
        for (const Index tok : tokens)
            if (tok < 0 || tok >= p.words.rows())
                throw std::out_of_range("encode_notes: token " + std::to_string(tok) + " outside vocabulary of " +
                                        std::to_string(p.words.rows()));
        const Tensor emb = embedding(p.words, tokens);
        for (const auto& conv : p.convs) {
            if (conv.width > kMinNoteLength)
                throw DimensionError("encode_notes: filter wider than the minimum note length");
            const Tensor response = relu(conv(emb));
            std::vector<std::pair<Index, Index>> segs(spans.size(), {0, 0});
            for (std::size_t r = 0; r < spans.size(); ++r)
                if (spans[r].second > 0) segs[r] = {spans[r].first, spans[r].second - conv.width + 1};
            pooled.push_back(segment_max_pool(response, segs));
        }
    }
    return relu(p.projection(concat(pooled, Axis::Cols)));
}

Tensor encode_note(std::span<const Index> tokens, const NoteEncoderParams& p) {
    IndexMatrix m = IndexMatrix::Constant(1, std::max<Index>(static_cast<Index>(tokens.size()), kMinNoteLength), kPadToken);
    for (std::size_t i = 0; i < tokens.size(); ++i) m(0, static_cast<Index>(i)) = tokens[i];
    const Index len = static_cast<Index>(tokens.size());
    const std::uint8_t inc = 1;
    return encode_notes(m, std::span<const Index>(&len, 1), std::span<const std::uint8_t>(&inc, 1), p);
}

Tensor hierarchy_head(const Tensor& features, const Linear& head) { return sigmoid(head(features)); }

}  // namespace necho
