#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "necho/data.hpp"
#include "necho/metrics.hpp"

using namespace necho;

namespace {

const Ontology& default_ontology() {
    static const Ontology ont = Ontology::balanced(12, 10);
    return ont;
}

Visit make_visit(std::vector<Index> codes, std::size_t note_len, Index token = 7) {
    Visit v;
    v.codes = std::move(codes);
    v.demographics = {30, 1, 2, 3, 4, 0};
    v.note.assign(note_len, token);
    return v;
}

PatientRecord make_patient(std::int64_t id, std::size_t n_visits) {
    PatientRecord p;
    p.patient_id = id;
    for (std::size_t t = 0; t < n_visits; ++t)
        p.visits.push_back(make_visit({static_cast<Index>(t % 10), static_cast<Index>(10 + t % 5)}, 5 + t));
    return p;
}

Cohort numbered_cohort(std::size_t n) {
    Cohort c;
    for (std::size_t i = 0; i < n; ++i) c.push_back(make_patient(static_cast<std::int64_t>(i), 2));
    return c;
}

}  // namespace

TEST_CASE("generator is deterministic and per-patient independent") {
    const auto a = generate_cohort(5, 40, default_ontology());
    const auto b = generate_cohort(5, 40, default_ontology());
    CHECK(a == b);
    const auto c = generate_cohort(5, 60, default_ontology());
    CHECK(std::equal(a.begin(), a.end(), c.begin()));
    CHECK(generate_cohort(6, 40, default_ontology()) != a);
}

TEST_CASE("generated cohort respects the documented ranges") {
    const auto& ont = default_ontology();
    const auto raw = generate_cohort(1, 600, ont);
    const auto cohort = preprocess(raw);
    CHECK(cohort.size() >= 500);
    std::size_t visits = 0, codes = 0;
    for (const auto& p : cohort) {
        CHECK(p.visits.size() >= kMinVisits);
        CHECK(p.visits.size() <= kMaxVisits);
        for (const auto& v : p.visits) {
            ++visits;
            codes += v.codes.size();
            CHECK(!v.codes.empty());
            CHECK(v.codes.size() <= kMaxCodesPerVisit);
            CHECK(std::is_sorted(v.codes.begin(), v.codes.end()));
            CHECK(std::adjacent_find(v.codes.begin(), v.codes.end()) == v.codes.end());
            CHECK(v.codes.back() < ont.num_leaves());
            CHECK(!v.note.empty());
            for (const Index w : v.note) {
                CHECK(w > kPadToken);
                CHECK(w < 2000);
            }
            for (std::size_t k = 0; k < kNumDemographics; ++k) {
                CHECK(v.demographics[k] >= 0);
                CHECK(v.demographics[k] < kDemographicCardinality[k]);
            }
        }
    }
    const double mean_codes = static_cast<double>(codes) / static_cast<double>(visits);
    CHECK(mean_codes >= 8.0);
    CHECK(mean_codes <= 18.0);
}

TEST_CASE("preprocess drops short patients and truncates") {
    Cohort in;
    in.push_back(make_patient(1, 1));
    in.push_back(make_patient(2, 25));
    PatientRecord long_note = make_patient(3, 2);
    long_note.visits[0].note.assign(12000, 9);
    in.push_back(long_note);
    PatientRecord empty_note = make_patient(4, 2);
    empty_note.visits[1].note.clear();
    in.push_back(empty_note);

    const auto out = preprocess(in);
    REQUIRE(out.size() == 2);
    CHECK(out[0].patient_id == 2);
    CHECK(out[0].visits.size() == kMaxVisits);
    CHECK(out[0].visits == std::vector<Visit>(in[1].visits.begin(), in[1].visits.begin() + 21));
    CHECK(out[1].patient_id == 3);
    CHECK(out[1].visits[0].note.size() == kMaxNoteTokens);
}

TEST_CASE("split sizes follow floor rounding") {
    const SplitRatios r;
    const auto s = split(numbered_cohort(100), r, 1);
    CHECK(s.train.size() == 80);
    CHECK(s.valid.size() == 10);
    CHECK(s.test.size() == 10);

    const auto big = split(numbered_cohort(6812), r, 1);
    CHECK(big.train.size() == 5449);
    CHECK(big.valid.size() == 681);
    CHECK(big.test.size() == 682);

    CHECK_THROWS_AS(split(numbered_cohort(5), r, 1), ConfigError);
    CHECK_THROWS_AS(split(numbered_cohort(100), SplitRatios{0.5, 0.5, 0.5}, 1), ConfigError);
}

TEST_CASE("split partitions are disjoint, exhaustive and seeded") {
    const auto cohort = numbered_cohort(237);
    const auto s = split(cohort, {}, 9);
    std::set<std::int64_t> ids;
    for (const auto* part : {&s.train, &s.valid, &s.test})
        for (const auto& p : *part) CHECK(ids.insert(p.patient_id).second);
    CHECK(ids.size() == cohort.size());
    const auto again = split(cohort, {}, 9);
    CHECK(again.train == s.train);
    CHECK(split(cohort, {}, 10).train != s.train);
}

TEST_CASE("batch padding with two visits") {
    const auto& ont = default_ontology();
    const PatientRecord p = make_patient(11, 2);
    const Batch b = make_batch(std::span(&p, 1), ont);
    CHECK(b.n_patients == 1);
    CHECK(b.max_visits == 2);
    CHECK(b.visit_mask(0, 0) == 1.0);
    CHECK(b.visit_mask(0, 1) == 1.0);
    CHECK(b.target_mask(0, 0) == 1.0);
    CHECK(b.target_mask(0, 1) == 0.0);
    CHECK(b.num_targets() == 1);
    CHECK(b.notes.cols() >= kMinNoteLength);
    // visit 0 predicts visit 1
    CHECK(b.y.row(0).sum() == 2.0);
    CHECK(b.y(0, p.visits[1].codes[0]) == 1.0);
    CHECK(b.y.row(1).sum() == 0.0);
    CHECK(b.o(0, ont.parent_of(p.visits[1].codes[0])) == 1.0);
    CHECK(b.next_codes[0] == p.visits[1].codes);
    CHECK(b.next_codes[1].empty());
}

TEST_CASE("batch padding across ragged patients") {
    const auto& ont = default_ontology();
    Cohort c = {make_patient(1, 5), make_patient(2, 2), make_patient(3, 3)};
    const Batch b = make_batch(c, ont);
    CHECK(b.max_visits == 5);
    CHECK(b.rows() == 15);
    CHECK(b.visit_mask.row(1).sum() == 2.0);
    CHECK(b.target_mask.row(0).sum() == 4.0);
    CHECK(b.target_mask.row(1).sum() == 1.0);
    CHECK(b.target_mask.row(2).sum() == 2.0);
    CHECK(b.num_targets() == 7);
    for (Index t = 2; t < 5; ++t) {
        const Index r = b.row(1, t);
        CHECK(b.codes.row(r).sum() == 0.0);
        CHECK(b.y.row(r).sum() == 0.0);
        CHECK(b.note_lengths[static_cast<std::size_t>(r)] == 0);
        for (Index j = 0; j < b.notes.cols(); ++j) CHECK(b.notes(r, j) == kPadToken);
    }
    for (Index b_ = 0; b_ < 3; ++b_)
        for (Index t = 0; t + 1 < b.n_visits[static_cast<std::size_t>(b_)]; ++t) {
            const auto& next = c[static_cast<std::size_t>(b_)].visits[static_cast<std::size_t>(t + 1)];
            for (const Index code : next.codes) CHECK(b.y(b.row(b_, t), code) == 1.0);
            CHECK(b.y.row(b.row(b_, t)).sum() == static_cast<Scalar>(next.codes.size()));
        }
}

TEST_CASE("unpad inverts make_batch") {
    const auto& ont = default_ontology();
    const auto cohort = preprocess(generate_cohort(3, 30, ont));
    for (const auto& batch : make_batches(cohort, 7, ont)) {
        const auto back = unpad(batch, ont);
        for (const auto& rec : back) {
            const auto it = std::find_if(cohort.begin(), cohort.end(),
                                         [&](const PatientRecord& p) { return p.patient_id == rec.patient_id; });
            REQUIRE(it != cohort.end());
            CHECK(*it == rec);
        }
    }
}

TEST_CASE("make_batches chunks and shuffles deterministically") {
    const auto& ont = default_ontology();
    const auto cohort = numbered_cohort(10);
    const auto plain = make_batches(cohort, 4, ont);
    REQUIRE(plain.size() == 3);
    CHECK(plain[2].n_patients == 2);
    CHECK(plain[0].patient_ids == std::vector<std::int64_t>{0, 1, 2, 3});
    const auto s1 = make_batches(cohort, 4, ont, 42);
    const auto s2 = make_batches(cohort, 4, ont, 42);
    CHECK(s1[0].patient_ids == s2[0].patient_ids);
    CHECK_THROWS_AS(make_batches(cohort, 0, ont), ConfigError);
}

TEST_CASE("cohort JSONL round trip") {
    const auto cohort = preprocess(generate_cohort(4, 12, default_ontology()));
    std::stringstream ss;
    write_cohort(cohort, ss);
    CHECK(read_cohort(ss) == cohort);
    std::stringstream bad("{\"patient_id\": 1, \"visits\": [{\"codes\": [1], \"demo\": [1, 2], \"note\": [3]}]}\n");
    CHECK_THROWS(read_cohort(bad));
}

TEST_CASE("generator carries signal beyond marginal frequency") {
    const auto& ont = default_ontology();
    const auto s = split(preprocess(generate_cohort(1, 600, ont)), {}, 1);
    const std::vector<int> ks = {10};
    const auto repeat = repeat_previous_visit(s.test, ont.num_leaves(), ks);
    const auto freq = marginal_frequency(s.train, s.test, ont.num_leaves(), ks);
    const auto rnd = random_ranking_expected(s.test, ont.num_leaves(), ks);
    CHECK(repeat.at(10) > freq.at(10));
    CHECK(freq.at(10) > rnd.at(10));
}
