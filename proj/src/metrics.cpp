#include "necho/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

namespace necho {

std::vector<Index> top_k(std::span<const Scalar> scores, Index k) {
    if (k < 1) throw std::invalid_argument("top_k: k must be >= 1");
    std::vector<Index> order(scores.size());
    std::iota(order.begin(), order.end(), Index{0});
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(),
                      [&](Index a, Index b) {
                          const Scalar sa = scores[static_cast<std::size_t>(a)];
                          const Scalar sb = scores[static_cast<std::size_t>(b)];
                          return sa != sb ? sa > sb : a < b;
                      });
    order.resize(kk);
    return order;
}

Scalar topk_accuracy(std::span<const Scalar> scores, std::span<const Index> truth, Index k) {
    if (truth.empty()) throw std::invalid_argument("topk_accuracy: empty truth set");
    const auto top = top_k(scores, k);
    Index hits = 0;
    for (const Index c : top)
        if (std::find(truth.begin(), truth.end(), c) != truth.end()) ++hits;
    return static_cast<Scalar>(hits) / static_cast<Scalar>(std::min<Index>(k, static_cast<Index>(truth.size())));
}

AccuracyAccumulator::AccuracyAccumulator(std::vector<int> ks) : ks_(std::move(ks)), sums_(ks_.size(), 0.0) {
    for (const int k : ks_)
        if (k < 1) throw std::invalid_argument("AccuracyAccumulator: k must be >= 1");
}

void AccuracyAccumulator::add(std::span<const Scalar> scores, std::span<const Index> truth) {
    if (truth.empty()) return;
    // One sort serves every k.
    const int kmax = *std::max_element(ks_.begin(), ks_.end());
    const auto top = top_k(scores, kmax);
    std::vector<char> in_truth(scores.size(), 0);
    for (const Index c : truth) in_truth[static_cast<std::size_t>(c)] = 1;
    for (std::size_t i = 0; i < ks_.size(); ++i) {
        const auto k = static_cast<std::size_t>(ks_[i]);
        std::size_t hits = 0;
        for (std::size_t j = 0; j < std::min(k, top.size()); ++j) hits += in_truth[static_cast<std::size_t>(top[j])];
        sums_[i] += static_cast<Scalar>(hits) / static_cast<Scalar>(std::min(k, truth.size()));
    }
    ++visits_;
}

void AccuracyAccumulator::add_batch(const Matrix& scores, const Batch& batch) {
    if (scores.rows() != batch.rows()) throw std::invalid_argument("add_batch: score rows do not match the batch");
    for (Index r = 0; r < batch.rows(); ++r) {
        const auto& truth = batch.next_codes[static_cast<std::size_t>(r)];
        if (truth.empty()) continue;
        add(std::span<const Scalar>(scores.row(r).data(), static_cast<std::size_t>(scores.cols())), truth);
    }
}

std::map<int, Scalar> AccuracyAccumulator::means() const {
    std::map<int, Scalar> out;
    for (std::size_t i = 0; i < ks_.size(); ++i)
        out[ks_[i]] = visits_ == 0 ? 0.0 : sums_[i] / static_cast<Scalar>(visits_);
    return out;
}

namespace {

// Calls f(current_visit, next_visit) for every visit with a successor.
template <typename F>
void for_each_transition(const Cohort& records, F&& f) {
    for (const auto& p : records)
        for (std::size_t t = 0; t + 1 < p.visits.size(); ++t)
            if (!p.visits[t + 1].codes.empty()) f(p.visits[t], p.visits[t + 1]);
}

}  // namespace

std::map<int, Scalar> random_ranking_expected(const Cohort& records, Index num_leaves, const std::vector<int>& ks) {
    std::map<int, Scalar> sums;
    std::size_t visits = 0;
    for_each_transition(records, [&](const Visit&, const Visit& next) {
        const auto n = static_cast<Scalar>(next.codes.size());
        for (const int k : ks) {
            const Scalar kk = std::min<Scalar>(k, static_cast<Scalar>(num_leaves));
            sums[k] += kk * n / static_cast<Scalar>(num_leaves) / std::min<Scalar>(k, n);
        }
        ++visits;
    });
    for (auto& [k, v] : sums) v /= static_cast<Scalar>(visits);
    return sums;
}

std::map<int, Scalar> random_ranking_monte_carlo(const Cohort& records, Index num_leaves, const std::vector<int>& ks,
                                                 int draws, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    AccuracyAccumulator acc(ks);
    std::uniform_real_distribution<Scalar> u(0.0, 1.0);
    std::vector<Scalar> scores(static_cast<std::size_t>(num_leaves));
    for_each_transition(records, [&](const Visit&, const Visit& next) {
        const auto& truth = next.codes;
        for (int d = 0; d < draws; ++d) {
            for (auto& s : scores) s = u(rng);
            acc.add(scores, truth);
        }
    });
    return acc.means();
}

std::map<int, Scalar> repeat_previous_visit(const Cohort& records, Index num_leaves, const std::vector<int>& ks) {
    AccuracyAccumulator acc(ks);
    std::vector<Scalar> scores(static_cast<std::size_t>(num_leaves));
    for_each_transition(records, [&](const Visit& cur, const Visit& next) {
        std::fill(scores.begin(), scores.end(), 0.0);
        for (const auto c : cur.codes) scores[static_cast<std::size_t>(c)] = 1.0;
        acc.add(scores, next.codes);
    });
    return acc.means();
}

std::map<int, Scalar> marginal_frequency(const Cohort& train, const Cohort& records, Index num_leaves,
                                         const std::vector<int>& ks) {
    std::vector<Scalar> freq(static_cast<std::size_t>(num_leaves), 0.0);
    for (const auto& p : train)
        for (const auto& v : p.visits)
            for (const auto c : v.codes) freq[static_cast<std::size_t>(c)] += 1.0;
    AccuracyAccumulator acc(ks);
    for_each_transition(records, [&](const Visit&, const Visit& next) { acc.add(freq, next.codes); });
    return acc.means();
}

}  // namespace necho
