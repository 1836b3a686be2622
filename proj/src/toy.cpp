#include "necho/toy.hpp"

#include <algorithm>
#include <random>

#include "necho/trainer.hpp"

namespace necho {

Cohort random_cohort(std::uint64_t seed, std::size_t patients, std::size_t min_visits, std::size_t max_visits,
                     const Ontology& ont, Index vocab) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> n_visits(min_visits, max_visits);
    std::uniform_int_distribution<Index> code(0, ont.num_leaves() - 1);
    std::uniform_int_distribution<Index> word(1, vocab - 1);
    std::uniform_int_distribution<Index> note_len(1, 7);
    Cohort out;
    for (std::size_t p = 0; p < patients; ++p) {
        PatientRecord rec;
        rec.patient_id = static_cast<std::int64_t>(p + 1);
        const std::size_t T = n_visits(rng);
        for (std::size_t t = 0; t < T; ++t) {
            Visit v;
            const Index n_codes = std::uniform_int_distribution<Index>(1, std::max<Index>(1, ont.num_leaves() / 2))(rng);
            for (Index i = 0; i < n_codes; ++i) v.codes.push_back(code(rng));
            std::sort(v.codes.begin(), v.codes.end());
            v.codes.erase(std::unique(v.codes.begin(), v.codes.end()), v.codes.end());
            for (std::size_t a = 0; a < kNumDemographics; ++a)
                v.demographics[a] = std::uniform_int_distribution<Index>(0, kDemographicCardinality[a] - 1)(rng);
            const Index len = note_len(rng);
            for (Index i = 0; i < len; ++i) v.note.push_back(word(rng));
            rec.visits.push_back(std::move(v));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

ToyProblem make_toy_problem(std::uint64_t seed) {
    ToyProblem p{Ontology::balanced(2, 3), {}, {}, {}};
    auto& m = p.model;
    m.num_leaves = 6;
    m.num_parents = 2;
    m.vocab_size = 10;
    m.d_model = 8;
    m.d_word = 4;
    m.d_note = 4;
    m.heads = 2;
    m.layers = 1;
    m.d_ff = 8;
    m.dropout = 0.0;
    m.validate();
    p.cohort = random_cohort(seed, 3, 2, 3, p.ontology, m.vocab_size);
    // Pin the visit counts so the batch always has padding and two steps.
    p.cohort[0].visits.resize(3, p.cohort[0].visits.back());
    p.cohort[1].visits.resize(2);
    p.cohort[2].visits.resize(3, p.cohort[2].visits.back());
    p.batch = make_batch(p.cohort, p.ontology);
    return p;
}

void randomize_parameters(ParameterSet& params, std::uint64_t seed, Scalar stddev) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<Scalar> n(0.0, stddev);
    for (const auto& [name, p] : params.entries()) {
        Tensor t = p;
        for (Index i = 0; i < t.value().size(); ++i) t.mutable_value().data()[i] = n(rng);
    }
}

GradCheckReport gradcheck_model(const NechoModel& model, const Batch& batch, const LossWeights& weights,
                                const GradCheckOptions& options) {
    const ForwardContext ctx{};
    const auto f = [&] {
        const auto out = model.forward(batch, ctx);
        return total_loss(compute_losses(out, batch, weights, PatientPooling::Mean), weights);
    };
    return grad_check(f, model.parameters(), options);
}

}  // namespace necho
