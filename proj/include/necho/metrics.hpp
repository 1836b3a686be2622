#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "necho/data.hpp"

namespace necho {

/// Indices of the k largest scores, ties broken by ascending index.
std::vector<Index> top_k(std::span<const Scalar> scores, Index k);

/// |top-k ∩ truth| / min(k, |truth|). Truth must be nonempty.
Scalar topk_accuracy(std::span<const Scalar> scores, std::span<const Index> truth, Index k);

/// Running visit-level means of Acc@k for several k. Visits with an empty
/// truth set are skipped.
class AccuracyAccumulator {
  public:
    explicit AccuracyAccumulator(std::vector<int> ks);

    void add(std::span<const Scalar> scores, std::span<const Index> truth);
    /// Every target row of a batch; `scores` is (B*T) x |C|.
    void add_batch(const Matrix& scores, const Batch& batch);

    std::map<int, Scalar> means() const;
    std::size_t visits() const { return visits_; }

  private:
    std::vector<int> ks_;
    std::vector<Scalar> sums_;
    std::size_t visits_ = 0;
};

/// Expected Acc@k of a uniformly random ranking, k*|truth|/|C| / min(k, |truth|),
/// averaged over the target visits of `records`.
std::map<int, Scalar> random_ranking_expected(const Cohort& records, Index num_leaves, const std::vector<int>& ks);

/// Monte-Carlo estimate of the same quantity from `draws` random permutations per visit.
std::map<int, Scalar> random_ranking_monte_carlo(const Cohort& records, Index num_leaves,
                                                 const std::vector<int>& ks, int draws, std::uint64_t seed);

/// Scores the codes of the current visit 1 and everything else 0, so the
/// ranking is the current visit's codes followed by ascending index.
std::map<int, Scalar> repeat_previous_visit(const Cohort& records, Index num_leaves, const std::vector<int>& ks);

/// Ranks codes by how many training visits contain them.
std::map<int, Scalar> marginal_frequency(const Cohort& train, const Cohort& records, Index num_leaves,
                                         const std::vector<int>& ks);

}  // namespace necho
