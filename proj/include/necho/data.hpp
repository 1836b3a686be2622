#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "necho/ontology.hpp"
#include "necho/types.hpp"

namespace necho {

inline constexpr std::size_t kNumDemographics = 6;
/// Age bucket, gender, admission type, admission location, discharge
/// location, insurance.
inline constexpr std::array<Index, kNumDemographics> kDemographicCardinality = {73, 2, 3, 8, 16, 5};
inline constexpr Index kPadToken = 0;
inline constexpr std::size_t kMinVisits = 2;
inline constexpr std::size_t kMaxVisits = 21;
inline constexpr std::size_t kMaxNoteTokens = 10000;
inline constexpr std::size_t kMaxCodesPerVisit = 39;
/// Notes are padded to at least the widest convolution filter.
inline constexpr Index kMinNoteLength = 4;

using Demographics = std::array<Index, kNumDemographics>;

struct Visit {
    std::vector<Index> codes;  // leaf indices, sorted and unique
    Demographics demographics{};
    std::vector<Index> note;  // word indices, never kPadToken

    bool operator==(const Visit&) const = default;
};

struct PatientRecord {
    std::int64_t patient_id = 0;
    std::vector<Visit> visits;

    bool operator==(const PatientRecord&) const = default;
};

using Cohort = std::vector<PatientRecord>;

/// Knobs of the synthetic cohort generator.
///
/// Each patient carries 1-3 active condition clusters (one per parent code
/// group). Clusters progress along a fixed successor map and occasionally
/// resolve. Visit codes are drawn mostly from active clusters, repeat from
/// the previous visit with probability `p_persist`, and otherwise come from
/// anywhere. Notes mix tokens owned by the visit's codes, tokens owned by
/// clusters about to emerge at the next visit, and noise. Admission type
/// flags an imminent progression; age shifts which clusters are likely.
struct GeneratorParams {
    Index vocab_size = 2000;
    Scalar mean_extra_visits = 0.7;  // geometric, on top of the 2-visit minimum
    Scalar mean_codes_per_visit = 13.0;
    Scalar sd_codes_per_visit = 3.0;
    Scalar p_persist = 0.6;
    Scalar p_in_cluster = 0.95;
    Scalar child_rank_exponent = 1.0;  // child r of a cluster has weight (1 + r)^-exponent
    Scalar p_progress = 0.5;
    Scalar p_resolve = 0.3;
    Index max_active_clusters = 4;
    Index note_min_length = 16;
    Index note_max_length = 48;
    Index tokens_per_code = 4;
    Index tokens_per_cluster = 12;
    Scalar p_code_token = 0.45;
    Scalar p_cluster_token = 0.25;
    Scalar p_admission_signal = 0.8;
};

/// Vocabulary layout used by the generator: [pad | code blocks | cluster blocks | noise].
struct VocabularyLayout {
    Index code_begin = 1;
    Index cluster_begin = 0;
    Index noise_begin = 0;
    Index size = 0;
};
VocabularyLayout vocabulary_layout(const GeneratorParams& params, const Ontology& ont);

/// Successor of a condition cluster in the progression map.
Index successor_cluster(Index cluster, Index n_clusters);

/// Deterministic in (seed, n_patients, params); patient i uses its own RNG
/// stream, so patients are independent of how many others are generated.
Cohort generate_cohort(std::uint64_t seed, std::size_t n_patients, const Ontology& ont,
                       const GeneratorParams& params = {});

struct PreprocessOptions {
    std::size_t min_visits = kMinVisits;
    std::size_t max_visits = kMaxVisits;
    std::size_t max_note_tokens = kMaxNoteTokens;
};

/// Drops visits without notes, truncates notes and visit lists, then drops
/// patients left with fewer than `min_visits` visits.
Cohort preprocess(Cohort records, const PreprocessOptions& options = {});

struct SplitRatios {
    Scalar train = 0.8;
    Scalar valid = 0.1;
    Scalar test = 0.1;
};

struct CohortSplit {
    Cohort train;
    Cohort valid;
    Cohort test;
};

/// Patient-level split: floor(n*train) and floor(n*valid) patients after a
/// seeded shuffle, remainder to test.
CohortSplit split(const Cohort& records, const SplitRatios& ratios, std::uint64_t seed);

/// Padded mini-batch. Rows of the per-visit matrices are indexed
/// b * max_visits + t. Visit t of a patient predicts visit t + 1, so
/// target_mask is set for t < n_visits - 1 only.
struct Batch {
    Index n_patients = 0;
    Index max_visits = 0;
    std::vector<std::int64_t> patient_ids;
    std::vector<Index> n_visits;

    Matrix visit_mask;   // B x T
    Matrix target_mask;  // B x T
    Matrix codes;        // B*T x |C| multi-hot of the visit's own codes
    IndexMatrix demographics;  // B*T x 6
    IndexMatrix notes;         // B*T x L, padded with kPadToken, L >= kMinNoteLength
    std::vector<Index> note_lengths;  // unpadded lengths, 0 on padded visits
    Matrix y;  // B*T x |C| next-visit leaf targets
    Matrix o;  // B*T x |A| next-visit parent targets
    std::vector<std::vector<Index>> next_codes;  // next-visit code sets, empty without target

    Index row(Index b, Index t) const { return b * max_visits + t; }
    Index rows() const { return n_patients * max_visits; }
    Index num_targets() const;
};

Batch make_batch(std::span<const PatientRecord> patients, const Ontology& ont);

/// Chunks `records` into batches of `batch_size` patients (the last may be
/// smaller). With a seed, patient order is shuffled first.
std::vector<Batch> make_batches(const Cohort& records, std::size_t batch_size, const Ontology& ont,
                                std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// Inverse of make_batch: recovers the original records from the padding.
Cohort unpad(const Batch& batch, const Ontology& ont);

// Cohort file: one JSON object per line,
// {"patient_id": int, "visits": [{"codes": [int], "demo": [int x 6], "note": [int]}]}.
void write_cohort(const Cohort& records, std::ostream& out);
void write_cohort_file(const Cohort& records, const std::filesystem::path& path);
Cohort read_cohort(std::istream& in);
Cohort read_cohort_file(const std::filesystem::path& path);

}  // namespace necho
