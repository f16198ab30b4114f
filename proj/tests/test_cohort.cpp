#include "doctest.h"

#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "trajgraph/common.hpp"
#include "trajgraph/cohort.hpp"
#include "trajgraph/metrics.hpp"

using namespace trajgraph;
using namespace trajgraph::cohort;

namespace {

PatientRecord t2d_patient(const std::string& id, const Date& diagnosis,
                          std::vector<Date> visit_dates) {
    PatientRecord r;
    r.patient_id = id;
    r.demographics = {55.0, "F", "B", std::nullopt};
    r.label = CohortLabel::T2D;
    r.diagnosis_date = diagnosis;
    int i = 0;
    for (const auto& d : visit_dates)
        r.visits.push_back({d, id + "_v" + std::to_string(i++), 150, "Progress Notes", "Physician"});
    return r;
}

PatientRecord demo_patient(const std::string& id, CohortLabel label, double age,
                           const std::string& gender, const std::string& race) {
    PatientRecord r;
    r.patient_id = id;
    r.demographics = {age, gender, race, std::nullopt};
    r.label = label;
    if (label == CohortLabel::T2D) r.diagnosis_date = Date(2020, 1, 1);
    r.visits.push_back({Date(2015, 1, 1), id + "_v0", 150, "Progress Notes", "Physician"});
    return r;
}

}  // namespace

TEST_CASE("record json round-trips through the manifest") {
    PatientRecord r = t2d_patient("p1", Date(2015, 6, 10), {Date(2015, 1, 1)});
    r.adjusted_diagnosis_date = Date(2015, 6, 1);
    r.demographics.ethnicity = "H";
    PatientRecord back = record_from_json(record_to_json(r), "test");
    CHECK(back.patient_id == "p1");
    CHECK(back.label == CohortLabel::T2D);
    CHECK(back.adjusted_diagnosis_date == Date(2015, 6, 1));
    CHECK(back.visits.size() == 1);
    CHECK(back.visits[0].word_count == 150);
}

TEST_CASE("validation enforces the diagnosis-date invariants") {
    PatientRecord r = t2d_patient("p1", Date(2015, 6, 10), {Date(2015, 1, 1)});
    r.diagnosis_date.reset();
    CHECK_THROWS_AS(r.validate(), InputError);

    PatientRecord r2 = t2d_patient("p2", Date(2015, 6, 10), {Date(2015, 1, 1)});
    r2.adjusted_diagnosis_date = Date(2015, 6, 11);  // after the ICD proxy
    CHECK_THROWS_AS(r2.validate(), InputError);
}

TEST_CASE("leakage filter drops notes inside the buffer window") {
    // diagnosis 2015-06-10, buffer 3: cutoff 2015-06-07
    PatientRecord r = t2d_patient("p1", Date(2015, 6, 10),
                                  {Date(2015, 6, 6), Date(2015, 6, 7), Date(2015, 6, 9)});
    auto filtered = filter_leakage(r, 3);
    REQUIRE(filtered.has_value());
    REQUIRE(filtered->visits.size() == 1);
    CHECK(filtered->visits[0].date == Date(2015, 6, 6));
}

TEST_CASE("leakage filter keeps NoD records unchanged") {
    PatientRecord r = demo_patient("c1", CohortLabel::NoD, 50, "M", "W");
    auto filtered = filter_leakage(r, 3);
    REQUIRE(filtered.has_value());
    CHECK(filtered->visits.size() == r.visits.size());
}

TEST_CASE("record with only post-diagnosis notes is removed") {
    PatientRecord r = t2d_patient("p1", Date(2015, 6, 10), {Date(2015, 6, 8), Date(2015, 7, 1)});
    CHECK_FALSE(filter_leakage(r, 3).has_value());
}

TEST_CASE("adjusted diagnosis date takes precedence") {
    PatientRecord r = t2d_patient("p1", Date(2015, 6, 10), {Date(2015, 6, 1), Date(2015, 6, 5)});
    r.adjusted_diagnosis_date = Date(2015, 6, 6);  // cutoff 2015-06-03
    auto filtered = filter_leakage(r, 3);
    REQUIRE(filtered.has_value());
    CHECK(filtered->visits.size() == 1);
    CHECK(filtered->visits[0].date == Date(2015, 6, 1));
}

TEST_CASE("leakage filter never keeps a note at or past the cutoff (fuzz)") {
    Rng rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        Date diag = Date(2015, 1, 1).plus_days(rng.uniform_int(0, 600));
        std::vector<Date> visits;
        int n = rng.uniform_int(1, 8);
        for (int i = 0; i < n; ++i)
            visits.push_back(diag.plus_days(rng.uniform_int(-30, 10)));
        int buffer = rng.uniform_int(0, 5);
        auto filtered = filter_leakage(t2d_patient("p", diag, visits), buffer);
        if (!filtered) continue;
        Date cutoff = diag.plus_days(-buffer);
        for (const auto& v : filtered->visits) CHECK(*v.date < cutoff);
    }
}

TEST_CASE("note quality filter applies words and allowlists") {
    PatientRecord r;
    r.patient_id = "p1";
    r.demographics = {60, "F", "B", std::nullopt};
    r.label = CohortLabel::NoD;
    r.visits = {
        {Date(2015, 1, 1), "a", 99, "Progress Notes", "Physician"},
        {Date(2015, 1, 2), "b", 100, "Progress Notes", "Physician"},
        {Date(2015, 1, 3), "c", 200, "Telephone Note", "Physician"},
        {Date(2015, 1, 4), "d", 300, "Progress Notes", "Clerk"},
    };
    NoteQualityFilter filter;
    filter.min_words = 100;
    filter.note_type_allowlist = {{"Progress Notes"}};
    filter.author_allowlist = {{"Physician"}};
    PatientRecord out = filter_note_quality(r, filter);
    REQUIRE(out.visits.size() == 1);
    CHECK(out.visits[0].note_id == "b");

    // absent allowlists accept everything above the word bound
    PatientRecord loose = filter_note_quality(r, NoteQualityFilter{});
    CHECK(loose.visits.size() == 3);
}

TEST_CASE("propensity fit separates a thresholded toy and stays in (0,1)") {
    std::vector<PatientRecord> records;
    for (int i = 0; i < 60; ++i) {
        bool treated = i < 30;
        records.push_back(demo_patient("p" + std::to_string(i),
                                       treated ? CohortLabel::T2D : CohortLabel::NoD,
                                       treated ? 70.0 + i % 5 : 40.0 + i % 5, "F", "B"));
    }
    auto scores = fit_propensity(records);
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& r : records) {
        double p = scores.at(r.patient_id);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        s.push_back(p);
        y.push_back(r.label == CohortLabel::T2D ? 1 : 0);
    }
    CHECK(eval::roc_auc_scores(s, y) >= 0.99);
}

TEST_CASE("zero iterations leave the zero-initialized fit at 0.5 everywhere") {
    std::vector<PatientRecord> records{demo_patient("a", CohortLabel::T2D, 70, "F", "B"),
                                       demo_patient("b", CohortLabel::NoD, 40, "M", "W")};
    auto scores = fit_propensity(records, 1e-6, /*max_iters=*/0);
    for (const auto& [id, p] : scores) CHECK(p == 0.5);
}

TEST_CASE("propensity fit rejects single-class cohorts") {
    std::vector<PatientRecord> records{demo_patient("a", CohortLabel::NoD, 50, "F", "B"),
                                       demo_patient("b", CohortLabel::NoD, 60, "M", "W")};
    CHECK_THROWS_AS(fit_propensity(records), InputError);
}

TEST_CASE("greedy matching hand enumeration") {
    std::vector<std::pair<std::string, double>> treated{{"t1", 0.80}, {"t2", 0.30}};
    std::vector<std::pair<std::string, double>> controls{{"c1", 0.90}, {"c2", 0.75},
                                                         {"c3", 0.35}};
    auto pairs = greedy_match(treated, controls);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].treated_id == "t1");
    CHECK(pairs[0].control_id == "c2");
    CHECK(pairs[1].treated_id == "t2");
    CHECK(pairs[1].control_id == "c3");
}

TEST_CASE("greedy matching ties pick the lower control index") {
    std::vector<std::pair<std::string, double>> treated{{"t", 0.5}};
    std::vector<std::pair<std::string, double>> controls{{"c1", 0.4}, {"c2", 0.6}};
    auto pairs = greedy_match(treated, controls);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].control_id == "c1");
}

TEST_CASE("one treated and one control match up; leftovers are reported") {
    std::vector<std::string> unmatched;
    auto pairs = greedy_match({{"t1", 0.2}, {"t2", 0.9}}, {{"c1", 0.5}}, &unmatched);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].treated_id == "t1");
    REQUIRE(unmatched.size() == 1);
    CHECK(unmatched[0] == "t2");
}

TEST_CASE("no control is used twice and each step picks the nearest unused") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::pair<std::string, double>> treated, controls;
        int nt = rng.uniform_int(1, 10), nc = rng.uniform_int(1, 14);
        for (int i = 0; i < nt; ++i)
            treated.emplace_back("t" + std::to_string(i), rng.uniform());
        for (int i = 0; i < nc; ++i)
            controls.emplace_back("c" + std::to_string(i), rng.uniform());

        auto pairs = greedy_match(treated, controls);
        std::set<std::string> used;
        for (const auto& p : pairs) CHECK(used.insert(p.control_id).second);

        // per-step local optimum: replay the greedy order
        std::set<std::string> replay_used;
        std::size_t pair_idx = 0;
        for (const auto& [tid, tscore] : treated) {
            if (pair_idx >= pairs.size() || pairs[pair_idx].treated_id != tid) continue;
            double best = 1e9;
            std::string best_id;
            for (const auto& [cid, cscore] : controls) {
                if (replay_used.count(cid)) continue;
                if (std::abs(tscore - cscore) < best) {
                    best = std::abs(tscore - cscore);
                    best_id = cid;
                }
            }
            CHECK(pairs[pair_idx].control_id == best_id);
            replay_used.insert(best_id);
            ++pair_idx;
        }
    }
}

TEST_CASE("covariate balance formula arithmetic") {
    // age means 1 vs 0 with sd 1 -> SMD exactly 1
    std::vector<PatientRecord> records;
    double t_ages[] = {0, 1, 2};   // mean 1, sample var 1
    double c_ages[] = {-1, 0, 1};  // mean 0, sample var 1
    for (int i = 0; i < 3; ++i)
        records.push_back(demo_patient("t" + std::to_string(i), CohortLabel::T2D, t_ages[i],
                                       "F", "B"));
    for (int i = 0; i < 3; ++i)
        records.push_back(demo_patient("c" + std::to_string(i), CohortLabel::NoD, c_ages[i],
                                       "F", "B"));
    auto rows = covariate_balance(records, {});
    REQUIRE(!rows.empty());
    // age is standardized over the pooled cohort; SMD is scale-invariant, so
    // the standardized difference is (mean_t - mean_c)/pooled_sd of the
    // standardized column = 1/ (pooled sd after overall standardization)
    const auto& age_row = rows[0];
    CHECK(age_row.covariate == "age");
    // raw smd: (1-0)/sqrt((1+1)/2) = 1; standardization divides both means and
    // sds by the same overall sd, leaving the ratio unchanged
    CHECK(age_row.smd_before == doctest::Approx(1.0));
}

TEST_CASE("equal means give zero SMD even with zero variance") {
    std::vector<PatientRecord> records;
    for (int i = 0; i < 4; ++i)
        records.push_back(demo_patient("p" + std::to_string(i),
                                       i % 2 ? CohortLabel::T2D : CohortLabel::NoD, 50.0, "F",
                                       "B"));
    auto rows = covariate_balance(records, {});
    for (const auto& row : rows) CHECK(row.smd_before == 0.0);
}

TEST_CASE("unequal means over zero variance give the infinity sentinel") {
    std::vector<PatientRecord> records;
    records.push_back(demo_patient("t0", CohortLabel::T2D, 60.0, "M", "B"));
    records.push_back(demo_patient("t1", CohortLabel::T2D, 60.0, "M", "B"));
    records.push_back(demo_patient("c0", CohortLabel::NoD, 50.0, "F", "B"));
    records.push_back(demo_patient("c1", CohortLabel::NoD, 50.0, "F", "B"));
    auto rows = covariate_balance(records, {});
    CHECK(std::isinf(rows[0].smd_before));  // age 60 vs 50, both sd 0
    CHECK(rows[0].smd_before > 0);
}

TEST_CASE("matching a shifted synthetic cohort improves covariate balance") {
    Rng rng(90);
    std::vector<PatientRecord> records;
    for (int i = 0; i < 400; ++i) {
        bool treated = i < 100;
        double age = 50.0 + rng.normal() * 10.0 + (treated ? 3.0 : 0.0);
        std::string gender = rng.bernoulli(treated ? 0.58 : 0.42) ? "M" : "F";
        std::string race = rng.bernoulli(treated ? 0.52 : 0.38) ? "B" : "W";
        records.push_back(demo_patient("p" + std::to_string(i),
                                       treated ? CohortLabel::T2D : CohortLabel::NoD, age,
                                       gender, race));
    }
    MatchResult result = match_cohort(records);
    CHECK(result.pairs.size() == 100);
    for (const auto& row : result.balance)
        CHECK(std::abs(row.smd_after) <= std::abs(row.smd_before) + 0.05);
}

TEST_CASE("descending-score order changes greedy assignments deterministically") {
    std::vector<PatientRecord> records;
    // age is the only varying covariate, treated skew older, so the fitted
    // score is increasing in age and t_high outranks t_low
    auto mk = [&](const std::string& id, CohortLabel label, double age) {
        records.push_back(demo_patient(id, label, age, "F", "B"));
    };
    mk("t_low", CohortLabel::T2D, 60);
    mk("t_high", CohortLabel::T2D, 70);
    mk("c_mid", CohortLabel::NoD, 65);
    mk("c_low", CohortLabel::NoD, 59);
    mk("c_high", CohortLabel::NoD, 69);

    MatchResult input_order = match_cohort(records, MatchOrder::InputOrder);
    MatchResult by_score = match_cohort(records, MatchOrder::DescendingScore);
    REQUIRE(input_order.pairs.size() == 2);
    REQUIRE(by_score.pairs.size() == 2);
    // input order starts with t_low; descending score starts with t_high
    CHECK(input_order.pairs[0].treated_id == "t_low");
    CHECK(by_score.pairs[0].treated_id == "t_high");
}
