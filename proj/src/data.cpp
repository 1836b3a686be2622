#include "necho/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "json.hpp"

namespace necho {

using nlohmann::json;

VocabularyLayout vocabulary_layout(const GeneratorParams& params, const Ontology& ont) {
    VocabularyLayout v;
    v.code_begin = 1;
    v.cluster_begin = v.code_begin + ont.num_leaves() * params.tokens_per_code;
    v.noise_begin = v.cluster_begin + ont.num_parents() * params.tokens_per_cluster;
    v.size = params.vocab_size;
    if (v.noise_begin >= v.size)
        throw ConfigError("vocab_size " + std::to_string(params.vocab_size) + " too small: " +
                          std::to_string(v.noise_begin) + " tokens are reserved for " +
                          std::to_string(ont.num_leaves()) + " codes and " +
                          std::to_string(ont.num_parents()) + " clusters");
    return v;
}

Index successor_cluster(Index cluster, Index n_clusters) {
    // 5 is coprime with the default 12 clusters, which makes this a single cycle.
    return (cluster * 5 + 1) % n_clusters;
}

namespace {

void validate(const GeneratorParams& p, const Ontology& ont) {
    auto prob = [](Scalar x) { return x >= 0.0 && x <= 1.0; };
    if (!prob(p.p_persist) || !prob(p.p_in_cluster) || !prob(p.p_progress) || !prob(p.p_resolve) ||
        !prob(p.p_admission_signal) || !prob(p.p_code_token + p.p_cluster_token) ||
        p.p_code_token < 0.0 || p.p_cluster_token < 0.0)
        throw ConfigError("generator probabilities must lie in [0, 1]");
    if (p.note_min_length < 1 || p.note_max_length < p.note_min_length)
        throw ConfigError("generator note length range is empty");
    if (p.child_rank_exponent < 0.0) throw ConfigError("child_rank_exponent must be >= 0");
    if (p.mean_codes_per_visit < 1.0) throw ConfigError("mean_codes_per_visit must be >= 1");
    if (p.max_active_clusters < 1) throw ConfigError("max_active_clusters must be >= 1");
    if (p.tokens_per_code < 1 || p.tokens_per_cluster < 1)
        throw ConfigError("tokens_per_code and tokens_per_cluster must be >= 1");
    if (ont.num_parents() < 2) throw ConfigError("generator needs at least 2 parent groups");
    vocabulary_layout(p, ont);
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng)];
}

class PatientGenerator {
  public:
    PatientGenerator(const Ontology& ont, const GeneratorParams& p, const VocabularyLayout& vocab,
                     std::mt19937_64& rng)
        : ont_(ont), p_(p), vocab_(vocab), rng_(rng) {
        // Within a cluster, earlier children are more common (1 / (1 + rank)).
        for (Index j = 0; j < ont.num_parents(); ++j) {
            std::vector<Scalar> w;
            for (std::size_t r = 0; r < ont.children(j).size(); ++r) w.push_back(std::pow(1.0 + static_cast<Scalar>(r), -p.child_rank_exponent));
            child_weights_.emplace_back(w.begin(), w.end());
        }
    }

    PatientRecord generate(std::int64_t id) {
        PatientRecord rec;
        rec.patient_id = id;
        std::geometric_distribution<int> extra(1.0 / (1.0 + p_.mean_extra_visits));
        const auto n_visits = std::min<std::size_t>(kMinVisits + static_cast<std::size_t>(extra(rng_)), kMaxVisits);

        Index age = uniform(0, kDemographicCardinality[0] - 1);
        const Index gender = uniform(0, 1);
        const Index insurance = uniform(0, kDemographicCardinality[5] - 1);

        std::vector<Index> active = initial_clusters(age);
        std::vector<Index> previous_codes;
        for (std::size_t t = 0; t < n_visits; ++t) {
            const std::vector<Index> next = progress(active);
            std::vector<Index> emerging;
            for (const Index k : next)
                if (std::find(active.begin(), active.end(), k) == active.end()) emerging.push_back(k);

            Visit v;
            v.codes = sample_codes(active, previous_codes);
            v.demographics = {age, gender, admission_type(!emerging.empty()),
                              uniform(0, kDemographicCardinality[3] - 1),
                              uniform(0, kDemographicCardinality[4] - 1), insurance};
            v.note = sample_note(v.codes, active, emerging);
            rec.visits.push_back(std::move(v));

            previous_codes = rec.visits.back().codes;
            active = next;
            if (bernoulli(0.5)) age = std::min<Index>(age + 1, kDemographicCardinality[0] - 1);
        }
        return rec;
    }

  private:
    Index uniform(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng_); }
    bool bernoulli(Scalar p) { return std::bernoulli_distribution(p)(rng_); }

    std::vector<Index> initial_clusters(Index age) {
        const Index n_clusters = ont_.num_parents();
        const Index age_group = age * 3 / kDemographicCardinality[0];
        std::vector<Scalar> w(static_cast<std::size_t>(n_clusters));
        for (Index k = 0; k < n_clusters; ++k) w[static_cast<std::size_t>(k)] = (k % 3 == age_group) ? 3.0 : 1.0;
        const Index count = std::min<Index>(uniform(1, 3), n_clusters);
        std::vector<Index> out;
        while (static_cast<Index>(out.size()) < count) {
            std::discrete_distribution<Index> d(w.begin(), w.end());
            const Index k = d(rng_);
            out.push_back(k);
            w[static_cast<std::size_t>(k)] = 0.0;
        }
        return out;
    }

    std::vector<Index> progress(const std::vector<Index>& active) {
        std::vector<Index> next;
        auto add = [&](Index k) {
            if (std::find(next.begin(), next.end(), k) == next.end()) next.push_back(k);
        };
        for (const Index k : active) {
            if (!bernoulli(p_.p_resolve)) add(k);
            if (bernoulli(p_.p_progress)) add(successor_cluster(k, ont_.num_parents()));
        }
        if (next.empty()) next.push_back(pick(active, rng_));
        while (static_cast<Index>(next.size()) > p_.max_active_clusters) next.erase(next.begin());
        return next;
    }

    Index admission_type(bool progression) {
        // 0 = emergency; elective/urgent otherwise, with label noise.
        if (bernoulli(p_.p_admission_signal)) return progression ? 0 : uniform(1, 2);
        return uniform(0, 2);
    }

    Index sample_leaf_in(Index cluster) {
        const auto& kids = ont_.children(cluster);
        return kids[static_cast<std::size_t>(child_weights_[static_cast<std::size_t>(cluster)](rng_))];
    }

    std::vector<Index> sample_codes(const std::vector<Index>& active, const std::vector<Index>& previous) {
        std::normal_distribution<Scalar> count_dist(p_.mean_codes_per_visit, p_.sd_codes_per_visit);
        const auto target = static_cast<std::size_t>(std::clamp<long>(
            std::lround(count_dist(rng_)), 1, static_cast<long>(std::min<std::size_t>(
                                                  kMaxCodesPerVisit, static_cast<std::size_t>(ont_.num_leaves())))));
        std::set<Index> codes;
        for (const Index c : previous)
            if (codes.size() < target && bernoulli(p_.p_persist)) codes.insert(c);
        std::size_t attempts = 0;
        while (codes.size() < target && attempts++ < 50 * target) {
            if (bernoulli(p_.p_in_cluster)) codes.insert(sample_leaf_in(pick(active, rng_)));
            else codes.insert(uniform(0, ont_.num_leaves() - 1));
        }
        return {codes.begin(), codes.end()};
    }

    std::vector<Index> sample_note(const std::vector<Index>& codes, const std::vector<Index>& active,
                                   const std::vector<Index>& emerging) {
        const Index len = uniform(p_.note_min_length, p_.note_max_length);
        std::uniform_real_distribution<Scalar> u(0.0, 1.0);
        std::vector<Index> note;
        note.reserve(static_cast<std::size_t>(len));
        for (Index i = 0; i < len; ++i) {
            const Scalar r = u(rng_);
            if (r < p_.p_code_token) {
                const Index c = pick(codes, rng_);
                note.push_back(vocab_.code_begin + c * p_.tokens_per_code + uniform(0, p_.tokens_per_code - 1));
            } else if (r < p_.p_code_token + p_.p_cluster_token) {
                const Index k = emerging.empty() ? pick(active, rng_) : pick(emerging, rng_);
                note.push_back(vocab_.cluster_begin + k * p_.tokens_per_cluster +
                               uniform(0, p_.tokens_per_cluster - 1));
            } else {
                note.push_back(uniform(vocab_.noise_begin, vocab_.size - 1));
            }
        }
        return note;
    }

    const Ontology& ont_;
    const GeneratorParams& p_;
    const VocabularyLayout& vocab_;
    std::mt19937_64& rng_;
    std::vector<std::discrete_distribution<Index>> child_weights_;
};

}  // namespace

Cohort generate_cohort(std::uint64_t seed, std::size_t n_patients, const Ontology& ont,
                       const GeneratorParams& params) {
    if (n_patients < 1) throw ConfigError("generate_cohort: n_patients must be >= 1");
    validate(params, ont);
    const VocabularyLayout vocab = vocabulary_layout(params, ont);
    Cohort out;
    out.reserve(n_patients);
    for (std::size_t i = 0; i < n_patients; ++i) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
        std::mt19937_64 rng(seq);
        PatientGenerator gen(ont, params, vocab, rng);
        out.push_back(gen.generate(static_cast<std::int64_t>(i)));
    }
    return out;
}

Cohort preprocess(Cohort records, const PreprocessOptions& options) {
    Cohort out;
    out.reserve(records.size());
    for (auto& rec : records) {
        std::erase_if(rec.visits, [](const Visit& v) { return v.note.empty(); });
        if (rec.visits.size() > options.max_visits) rec.visits.resize(options.max_visits);
        for (auto& v : rec.visits)
            if (v.note.size() > options.max_note_tokens) v.note.resize(options.max_note_tokens);
        if (rec.visits.size() >= options.min_visits) out.push_back(std::move(rec));
    }
    return out;
}

CohortSplit split(const Cohort& records, const SplitRatios& ratios, std::uint64_t seed) {
    if (ratios.train < 0.0 || ratios.valid < 0.0 || ratios.test < 0.0 ||
        std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must be nonnegative and sum to 1");
    const std::size_t n = records.size();
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<Scalar>(n) * ratios.train + 1e-9));
    const auto n_valid = static_cast<std::size_t>(std::floor(static_cast<Scalar>(n) * ratios.valid + 1e-9));
    if (n_train == 0 || n_valid == 0 || n_train + n_valid >= n)
        throw ConfigError("split of " + std::to_string(n) + " patients leaves an empty partition");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    CohortSplit s;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& rec = records[order[i]];
        if (i < n_train) s.train.push_back(rec);
        else if (i < n_train + n_valid) s.valid.push_back(rec);
        else s.test.push_back(rec);
    }
    return s;
}

Index Batch::num_targets() const { return static_cast<Index>(target_mask.sum()); }

Batch make_batch(std::span<const PatientRecord> patients, const Ontology& ont) {
    Batch b;
    b.n_patients = static_cast<Index>(patients.size());
    Index max_t = 0;
    Index max_len = kMinNoteLength;
    for (const auto& p : patients) {
        max_t = std::max<Index>(max_t, static_cast<Index>(p.visits.size()));
        for (const auto& v : p.visits) max_len = std::max<Index>(max_len, static_cast<Index>(v.note.size()));
    }
    b.max_visits = max_t;
    const Index rows = b.n_patients * max_t;
    b.visit_mask = Matrix::Zero(b.n_patients, max_t);
    b.target_mask = Matrix::Zero(b.n_patients, max_t);
    b.codes = Matrix::Zero(rows, ont.num_leaves());
    b.demographics = IndexMatrix::Zero(rows, static_cast<Index>(kNumDemographics));
    b.notes = IndexMatrix::Constant(rows, max_len, kPadToken);
    b.note_lengths.assign(static_cast<std::size_t>(rows), 0);
    b.y = Matrix::Zero(rows, ont.num_leaves());
    b.o = Matrix::Zero(rows, ont.num_parents());
    b.next_codes.assign(static_cast<std::size_t>(rows), {});

    for (Index pi = 0; pi < b.n_patients; ++pi) {
        const auto& p = patients[static_cast<std::size_t>(pi)];
        b.patient_ids.push_back(p.patient_id);
        b.n_visits.push_back(static_cast<Index>(p.visits.size()));
        for (std::size_t t = 0; t < p.visits.size(); ++t) {
            const auto& v = p.visits[t];
            const Index r = b.row(pi, static_cast<Index>(t));
            b.visit_mask(pi, static_cast<Index>(t)) = 1.0;
            b.codes.row(r) = leaf_label_vector(v.codes, ont).as_row();
            for (std::size_t k = 0; k < kNumDemographics; ++k) {
                if (v.demographics[k] < 0 || v.demographics[k] >= kDemographicCardinality[k])
                    throw std::out_of_range("demographic attribute " + std::to_string(k) +
                                            " out of range for patient " + std::to_string(p.patient_id));
                b.demographics(r, static_cast<Index>(k)) = v.demographics[k];
            }
            for (std::size_t w = 0; w < v.note.size(); ++w) b.notes(r, static_cast<Index>(w)) = v.note[w];
            b.note_lengths[static_cast<std::size_t>(r)] = static_cast<Index>(v.note.size());
            if (t + 1 < p.visits.size()) {
                const auto& next = p.visits[t + 1].codes;
                b.target_mask(pi, static_cast<Index>(t)) = 1.0;
                b.y.row(r) = leaf_label_vector(next, ont).as_row();
                b.o.row(r) = ancestor_label_vector(next, ont).as_row();
                b.next_codes[static_cast<std::size_t>(r)] = next;
            }
        }
    }
    return b;
}

std::vector<Batch> make_batches(const Cohort& records, std::size_t batch_size, const Ontology& ont,
                                std::optional<std::uint64_t> shuffle_seed) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle_seed) {
        std::mt19937_64 rng(*shuffle_seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::vector<Batch> out;
    std::vector<PatientRecord> chunk;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        chunk.clear();
        for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) chunk.push_back(records[order[j]]);
        out.push_back(make_batch(chunk, ont));
    }
    return out;
}

Cohort unpad(const Batch& batch, const Ontology& ont) {
    Cohort out;
    for (Index pi = 0; pi < batch.n_patients; ++pi) {
        PatientRecord rec;
        rec.patient_id = batch.patient_ids[static_cast<std::size_t>(pi)];
        for (Index t = 0; t < batch.max_visits && batch.visit_mask(pi, t) != 0.0; ++t) {
            const Index r = batch.row(pi, t);
            Visit v;
            for (Index c = 0; c < ont.num_leaves(); ++c)
                if (batch.codes(r, c) != 0.0) v.codes.push_back(c);
            for (std::size_t k = 0; k < kNumDemographics; ++k) v.demographics[k] = batch.demographics(r, static_cast<Index>(k));
            for (Index w = 0; w < batch.note_lengths[static_cast<std::size_t>(r)]; ++w) v.note.push_back(batch.notes(r, w));
            rec.visits.push_back(std::move(v));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void write_cohort(const Cohort& records, std::ostream& out) {
    for (const auto& rec : records) {
        json j;
        j["patient_id"] = rec.patient_id;
        j["visits"] = json::array();
        for (const auto& v : rec.visits)
            j["visits"].push_back({{"codes", v.codes}, {"demo", v.demographics}, {"note", v.note}});
        out << j.dump() << "\n";
    }
}

void write_cohort_file(const Cohort& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cohort file " + path.string());
    write_cohort(records, out);
}

Cohort read_cohort(std::istream& in) {
    Cohort out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            PatientRecord rec;
            rec.patient_id = j.at("patient_id").get<std::int64_t>();
            for (const auto& jv : j.at("visits")) {
                Visit v;
                std::set<Index> codes;
                for (const auto& c : jv.at("codes")) codes.insert(c.get<Index>());
                v.codes.assign(codes.begin(), codes.end());
                const auto& demo = jv.at("demo");
                if (demo.size() != kNumDemographics)
                    throw std::runtime_error("demo must have " + std::to_string(kNumDemographics) + " entries");
                for (std::size_t k = 0; k < kNumDemographics; ++k) v.demographics[k] = demo[k].get<Index>();
                v.note = jv.at("note").get<std::vector<Index>>();
                rec.visits.push_back(std::move(v));
            }
            out.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw std::runtime_error("cohort line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

Cohort read_cohort_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cohort file " + path.string());
    return read_cohort(in);
}

}  // namespace necho
