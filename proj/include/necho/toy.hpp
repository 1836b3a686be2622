#pragma once

#include <cstdint>

#include "necho/gradcheck.hpp"
#include "necho/model.hpp"
#include "necho/objectives.hpp"
#include "necho/ontology.hpp"

namespace necho {

/// A tiny end-to-end problem for gradient checks and property tests:
/// |C| = 6, |A| = 2, vocab 10, d = 8, three patients with two prediction
/// steps each (up to three visits), dropout off.
struct ToyProblem {
    Ontology ontology;
    ModelConfig model;
    Cohort cohort;
    Batch batch;
};

ToyProblem make_toy_problem(std::uint64_t seed = 0);

/// Random cohort over `ont` with note tokens in [1, vocab).
Cohort random_cohort(std::uint64_t seed, std::size_t patients, std::size_t min_visits, std::size_t max_visits,
                     const Ontology& ont, Index vocab);

/// Redraws every parameter from N(0, stddev^2). Checking gradients at such a
/// point keeps ReLU inputs, max-pool ties and clamp bounds away from the
/// finite-difference step, which the tiny default init does not.
void randomize_parameters(ParameterSet& params, std::uint64_t seed, Scalar stddev = 0.5);

/// Finite-difference check of every model parameter against the full
/// weighted objective on one batch, evaluated in eval mode.
GradCheckReport gradcheck_model(const NechoModel& model, const Batch& batch, const LossWeights& weights,
                                const GradCheckOptions& options = {});

}  // namespace necho
