#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "trajgraph/common.hpp"
#include "trajgraph/metrics.hpp"

using namespace trajgraph;
using namespace trajgraph::eval;

namespace {

PredictionEntry entry(const std::string& id, int y, double score,
                      std::map<std::string, std::string> groups = {},
                      std::optional<int> horizon = std::nullopt) {
    PredictionEntry e;
    e.patient_id = id;
    e.y_true = y;
    e.score = score;
    e.y_pred = score >= 0.5 ? 1 : 0;
    e.groups = std::move(groups);
    e.horizon_days = horizon;
    return e;
}

// independent pairwise AUC used as the oracle
double auc_by_enumeration(const std::vector<PredictionEntry>& entries) {
    double wins = 0;
    std::size_t pairs = 0;
    for (const auto& p : entries) {
        if (p.y_true != 1) continue;
        for (const auto& n : entries) {
            if (n.y_true != 0) continue;
            ++pairs;
            if (p.score > n.score) wins += 1.0;
            else if (p.score == n.score) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("roc_auc on the worked examples") {
    CHECK(roc_auc({entry("a", 1, 0.9), entry("b", 1, 0.8), entry("c", 0, 0.7),
                   entry("d", 0, 0.1)}) == 1.0);
    // pos {0.8, 0.4}, neg {0.6, 0.2}: 3 of 4 pairs correct
    CHECK(roc_auc({entry("a", 1, 0.8), entry("b", 1, 0.4), entry("c", 0, 0.6),
                   entry("d", 0, 0.2)}) == 0.75);
    CHECK(roc_auc({entry("a", 1, 0.5), entry("b", 0, 0.5), entry("c", 0, 0.5)}) == 0.5);
    CHECK_THROWS_AS(roc_auc({entry("a", 1, 0.5)}), InputError);
}

TEST_CASE("roc_auc is invariant under strictly monotone score transforms") {
    Rng rng(15);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<PredictionEntry> entries;
        for (int i = 0; i < 20; ++i)
            entries.push_back(entry("p" + std::to_string(i), i < 8 ? 1 : 0,
                                    std::round(rng.uniform() * 20) / 20.0));
        bool ok = false;
        for (const auto& e : entries) ok |= e.y_true == 1;
        double base = roc_auc(entries);
        auto transformed = entries;
        for (auto& e : transformed) e.score = 1.0 / (1.0 + std::exp(-(3.0 * e.score - 1.0)));
        CHECK(roc_auc(transformed) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("roc_auc matches pairwise enumeration on random sets") {
    Rng rng(25);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<PredictionEntry> entries;
        for (int i = 0; i < 20; ++i)
            entries.push_back(entry("p" + std::to_string(i), rng.bernoulli(0.4) ? 1 : 0,
                                    std::round(rng.uniform() * 10) / 10.0));
        bool pos = false, neg = false;
        for (const auto& e : entries) (e.y_true ? pos : neg) = true;
        if (!pos || !neg) continue;
        CHECK(roc_auc(entries) == doctest::Approx(auc_by_enumeration(entries)).epsilon(1e-12));
    }
}

TEST_CASE("classification metrics on the worked examples") {
    // all predicted NoD, half truly T2D
    std::vector<PredictionEntry> degenerate;
    for (int i = 0; i < 10; ++i) degenerate.push_back(entry("p" + std::to_string(i), i < 5, 0.1));
    auto rep = classification_metrics(degenerate);
    CHECK(rep.positive.precision == 0.0);
    CHECK(rep.positive.recall == 0.0);
    CHECK(rep.negative.recall == 1.0);

    // perfect predictions
    std::vector<PredictionEntry> perfect{entry("a", 1, 0.9), entry("b", 0, 0.1)};
    auto rep2 = classification_metrics(perfect);
    CHECK(rep2.positive.precision == 1.0);
    CHECK(rep2.positive.recall == 1.0);
    CHECK(rep2.negative.precision == 1.0);
    CHECK(rep2.negative.recall == 1.0);
    CHECK(rep2.macro_f1 == 1.0);

    // TP=3, FP=1, FN=2 -> P=0.75, R=0.6, F1=2/3
    std::vector<PredictionEntry> mixed;
    for (int i = 0; i < 3; ++i) mixed.push_back(entry("tp" + std::to_string(i), 1, 0.9));
    mixed.push_back(entry("fp", 0, 0.9));
    for (int i = 0; i < 2; ++i) mixed.push_back(entry("fn" + std::to_string(i), 1, 0.1));
    auto rep3 = classification_metrics(mixed);
    CHECK(rep3.positive.precision == doctest::Approx(0.75));
    CHECK(rep3.positive.recall == doctest::Approx(0.6));
    CHECK(rep3.positive.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("demographic parity difference by direct counting") {
    std::vector<PredictionEntry> entries;
    // group z: 3 of 4 predicted positive; others: 1 of 4
    for (int i = 0; i < 4; ++i)
        entries.push_back(entry("z" + std::to_string(i), 0, i < 3 ? 0.9 : 0.1,
                                {{"race", "B"}}));
    for (int i = 0; i < 4; ++i)
        entries.push_back(entry("o" + std::to_string(i), 0, i < 1 ? 0.9 : 0.1,
                                {{"race", "W"}}));
    CHECK(demographic_parity_difference(entries, "race", "B") == doctest::Approx(0.5));
    CHECK(demographic_parity_difference(entries, "race", "W") == doctest::Approx(-0.5));

    std::vector<PredictionEntry> same{entry("a", 0, 0.9, {{"g", "x"}}),
                                      entry("b", 0, 0.9, {{"g", "y"}})};
    CHECK(demographic_parity_difference(same, "g", "x") == 0.0);

    CHECK_THROWS_AS(demographic_parity_difference(same, "g", "missing"), InputError);
}

TEST_CASE("equal opportunity difference by direct counting") {
    std::vector<PredictionEntry> entries;
    // z: TPR 2/2, others: TPR 1/2
    entries.push_back(entry("z1", 1, 0.9, {{"gender", "F"}}));
    entries.push_back(entry("z2", 1, 0.9, {{"gender", "F"}}));
    entries.push_back(entry("o1", 1, 0.9, {{"gender", "M"}}));
    entries.push_back(entry("o2", 1, 0.1, {{"gender", "M"}}));
    entries.push_back(entry("o3", 0, 0.9, {{"gender", "M"}}));  // ignored: not a positive
    CHECK(equal_opportunity_difference(entries, "gender", "F") == doctest::Approx(0.5));
    CHECK(equal_opportunity_difference(entries, "gender", "M") == doctest::Approx(-0.5));

    std::vector<PredictionEntry> no_pos{entry("a", 0, 0.9, {{"g", "x"}}),
                                        entry("b", 1, 0.9, {{"g", "y"}})};
    CHECK_THROWS_AS(equal_opportunity_difference(no_pos, "g", "x"), InputError);
}

TEST_CASE("dpd and eod are antisymmetric under group complement (fuzz)") {
    Rng rng(35);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<PredictionEntry> entries;
        for (int i = 0; i < 24; ++i)
            entries.push_back(entry("p" + std::to_string(i), rng.bernoulli(0.5) ? 1 : 0,
                                    rng.uniform(), {{"g", rng.bernoulli(0.5) ? "a" : "b"}}));
        try {
            double d1 = demographic_parity_difference(entries, "g", "a");
            double d2 = demographic_parity_difference(entries, "g", "b");
            CHECK(d1 == doctest::Approx(-d2).epsilon(1e-12));
        } catch (const InputError&) {
        }
        try {
            double e1 = equal_opportunity_difference(entries, "g", "a");
            double e2 = equal_opportunity_difference(entries, "g", "b");
            CHECK(e1 == doctest::Approx(-e2).epsilon(1e-12));
        } catch (const InputError&) {
        }
    }
}

TEST_CASE("positive predictions split exactly across complementary groups") {
    Rng rng(45);
    std::vector<PredictionEntry> entries;
    for (int i = 0; i < 40; ++i)
        entries.push_back(entry("p" + std::to_string(i), rng.bernoulli(0.5) ? 1 : 0,
                                rng.uniform(), {{"g", rng.bernoulli(0.3) ? "a" : "b"}}));
    std::size_t total = 0, in_a = 0, in_b = 0;
    for (const auto& e : entries) {
        total += static_cast<std::size_t>(e.y_pred == 1);
        if (e.groups.at("g") == "a") in_a += static_cast<std::size_t>(e.y_pred == 1);
        else in_b += static_cast<std::size_t>(e.y_pred == 1);
    }
    CHECK(in_a + in_b == total);
}

TEST_CASE("horizon bucketing on the worked examples") {
    std::vector<PredictionEntry> t2d{
        entry("a", 1, 0.9, {}, 200),  // 200/91 -> bucket 2
        entry("b", 1, 0.8, {}, 0),    // bucket 0
        entry("c", 1, 0.7, {}, 95),   // bucket 1
    };
    std::vector<PredictionEntry> controls{entry("x", 0, 0.1), entry("y", 0, 0.2)};
    auto rows = horizon_curve(t2d, controls, 91);
    REQUIRE(!rows.empty());
    CHECK(rows[0].n == 1);  // horizon 0
    CHECK(rows[1].n == 1);  // horizon 95
    CHECK(rows[2].n == 1);  // horizon 200
    // every t2d score beats every control: bucket AUC 1.0
    for (const auto& row : rows)
        if (row.n > 0) CHECK(row.auc == 1.0);

    std::size_t total = 0;
    for (const auto& row : rows) total += row.n;
    CHECK(total == t2d.size());
}

TEST_CASE("horizon curve merges everything above the 95th percentile into the tail") {
    std::vector<PredictionEntry> t2d;
    for (int i = 0; i < 100; ++i)
        t2d.push_back(entry("p" + std::to_string(i), 1, 0.9, {}, i));  // horizons 0..99
    std::vector<PredictionEntry> controls{entry("c", 0, 0.5)};
    auto rows = horizon_curve(t2d, controls, 10);
    // nearest-rank p95 over 0..99 is 94; tail holds 95..99
    const auto& tail = rows.back();
    CHECK(tail.aggregated_tail);
    CHECK(tail.n == 5);
    std::size_t total = 0;
    for (const auto& row : rows) total += row.n;
    CHECK(total == 100);
    // buckets 0..9 regular; tail index is one past floor(94/10)=9
    CHECK(rows.size() == 11);
}

TEST_CASE("empty horizon buckets appear as n=0 rows") {
    std::vector<PredictionEntry> t2d{entry("a", 1, 0.9, {}, 5), entry("b", 1, 0.8, {}, 200)};
    std::vector<PredictionEntry> controls{entry("c", 0, 0.1)};
    auto rows = horizon_curve(t2d, controls, 91);
    bool saw_empty = false;
    for (const auto& row : rows)
        if (row.n == 0) {
            saw_empty = true;
            CHECK(std::isnan(row.auc));
        }
    CHECK(saw_empty);
}

TEST_CASE("prediction csv round-trips entries, groups, and horizons") {
    PredictionSet set;
    set.threshold = 0.5;
    set.entries = {entry("a", 1, 0.9, {{"gender", "F"}, {"race", "B"}}, 120),
                   entry("b", 0, 0.2, {{"gender", "M"}, {"race", "W"}})};
    auto tmp = std::filesystem::temp_directory_path() / "trajgraph_test_preds.csv";
    save_predictions_csv(set, tmp.string());
    PredictionSet back = load_predictions_csv(tmp.string());
    std::filesystem::remove(tmp);

    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[0].patient_id == "a");
    CHECK(back.entries[0].score == 0.9);
    CHECK(back.entries[0].y_pred == 1);
    CHECK(back.entries[0].groups.at("gender") == "F");
    CHECK(back.entries[0].horizon_days == 120);
    CHECK_FALSE(back.entries[1].horizon_days.has_value());
}
