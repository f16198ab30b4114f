#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "trajgraph/common.hpp"
#include "trajgraph/reveal.hpp"

using namespace trajgraph;
using namespace trajgraph::reveal;
using nlohmann::json;

namespace {

ReasoningPath path(int id, bool prediction) {
    ReasoningPath p;
    p.path_id = id;
    p.prediction = prediction;
    p.explanation = "path " + std::to_string(id);
    return p;
}

std::vector<CaseInput> two_cases() {
    return {{"case1", json::array({"doc a"}), json{{"age", 60}}},
            {"case2", json::array({"doc b"}), json{{"age", 50}}}};
}

json constant_reasoner_response(int n, bool prediction) {
    json paths = json::array();
    for (int i = 0; i < n; ++i)
        paths.push_back({{"prediction", prediction}, {"explanation", "because"}});
    return json{{"paths", paths}};
}

}  // namespace

TEST_CASE("normalize_confidence arithmetic and guards") {
    CHECK(normalize_confidence(0.6, 0.2) == doctest::Approx(0.75));
    CHECK(normalize_confidence(0.3, 0.3) == 0.5);
    CHECK(normalize_confidence(1.0, 0.0) == 1.0);
    CHECK_THROWS_AS(normalize_confidence(0.0, 0.0), InputError);
    CHECK_THROWS_AS(normalize_confidence(-0.1, 0.5), InputError);
}

TEST_CASE("aggregate worked example: top-3 vote") {
    std::vector<ReasoningPath> paths{path(0, true), path(1, false), path(2, true),
                                     path(3, false), path(4, true)};
    std::vector<VerifierJudgment> judgments{{0, 0.9}, {1, 0.85}, {2, 0.4}, {3, 0.3}, {4, 0.2}};
    Aggregation agg = aggregate(paths, judgments, 3);
    CHECK(agg.label == true);
    REQUIRE(agg.supporting.size() == 2);
    CHECK(agg.supporting[0].path_id == 0);
    CHECK(agg.supporting[1].path_id == 2);
    CHECK(agg.score == doctest::Approx((0.9 + 0.4) / 2.0));
}

TEST_CASE("unanimous paths win for any k") {
    std::vector<ReasoningPath> paths{path(0, false), path(1, false), path(2, false)};
    std::vector<VerifierJudgment> judgments{{0, 0.2}, {1, 0.9}, {2, 0.5}};
    for (std::size_t k = 1; k <= 3; ++k) {
        Aggregation agg = aggregate(paths, judgments, k);
        CHECK(agg.label == false);
        CHECK(agg.supporting.size() == k);
    }
}

TEST_CASE("k=1 follows the single most confident path") {
    std::vector<ReasoningPath> paths{path(0, true), path(1, false)};
    std::vector<VerifierJudgment> judgments{{0, 0.3}, {1, 0.7}};
    Aggregation agg = aggregate(paths, judgments, 1);
    CHECK(agg.label == false);
    REQUIRE(agg.supporting.size() == 1);
    CHECK(agg.supporting[0].path_id == 1);
}

TEST_CASE("confidence ties rank by lower path id") {
    std::vector<ReasoningPath> paths{path(2, true), path(0, false), path(1, true)};
    std::vector<VerifierJudgment> judgments{{2, 0.5}, {0, 0.5}, {1, 0.5}};
    Aggregation agg = aggregate(paths, judgments, 1);
    CHECK(agg.supporting[0].path_id == 0);
    CHECK(agg.label == false);
}

TEST_CASE("even-k tie breaks on summed confidence") {
    std::vector<ReasoningPath> paths{path(0, true), path(1, false), path(2, true),
                                     path(3, false)};
    std::vector<VerifierJudgment> judgments{{0, 0.9}, {1, 0.8}, {2, 0.3}, {3, 0.5}};
    // top-2: {0:true 0.9, 1:false 0.8} -> one vote each, sums 0.9 vs 0.8
    Aggregation agg = aggregate(paths, judgments, 2);
    CHECK(agg.label == true);
}

TEST_CASE("aggregate is invariant to input order") {
    std::vector<ReasoningPath> paths{path(0, true), path(1, false), path(2, true),
                                     path(3, false), path(4, true)};
    std::vector<VerifierJudgment> judgments{{0, 0.9}, {1, 0.85}, {2, 0.4}, {3, 0.3}, {4, 0.2}};
    Aggregation base = aggregate(paths, judgments, 3);

    std::vector<ReasoningPath> shuffled{paths[3], paths[0], paths[4], paths[2], paths[1]};
    std::vector<VerifierJudgment> shuffled_j{judgments[4], judgments[1], judgments[0],
                                             judgments[3], judgments[2]};
    Aggregation same = aggregate(shuffled, shuffled_j, 3);
    CHECK(same.label == base.label);
    CHECK(same.score == base.score);
    REQUIRE(same.supporting.size() == base.supporting.size());
    for (std::size_t i = 0; i < base.supporting.size(); ++i)
        CHECK(same.supporting[i].path_id == base.supporting[i].path_id);
}

TEST_CASE("k = N with equal confidences reduces to plain majority vote") {
    std::vector<ReasoningPath> paths;
    std::vector<VerifierJudgment> judgments;
    for (int i = 0; i < 10; ++i) {
        paths.push_back(path(i, i < 6));  // 6 true, 4 false
        judgments.push_back({i, 0.5});
    }
    Aggregation agg = aggregate(paths, judgments, 10);
    CHECK(agg.label == true);
    CHECK(agg.supporting.size() == 6);
}

TEST_CASE("the returned label always appears among the top-k") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        int n = rng.uniform_int(1, 8);
        std::vector<ReasoningPath> paths;
        std::vector<VerifierJudgment> judgments;
        for (int i = 0; i < n; ++i) {
            paths.push_back(path(i, rng.bernoulli(0.5)));
            judgments.push_back({i, static_cast<double>(rng.uniform_int(1, 9)) / 10.0});
        }
        std::size_t k = static_cast<std::size_t>(rng.uniform_int(1, n));
        Aggregation agg = aggregate(paths, judgments, k);
        CHECK(!agg.supporting.empty());
        for (const auto& s : agg.supporting) CHECK(s.prediction == agg.label);
    }
}

TEST_CASE("aggregate configuration errors") {
    std::vector<ReasoningPath> paths{path(0, true)};
    std::vector<VerifierJudgment> judgments{{0, 0.5}};
    CHECK_THROWS_AS(aggregate(paths, judgments, 2), ConfigError);
    CHECK_THROWS_AS(aggregate(paths, judgments, 0), ConfigError);
    CHECK_THROWS_AS(aggregate(paths, {}, 1), InputError);
}

TEST_CASE("constant backends run every case to the same label and score") {
    ConstantBackend reasoner(constant_reasoner_response(10, true));
    ConstantBackend verifier(json{{"confidence", 1.0}});
    RunResult result = run_reveal(two_cases(), reasoner, verifier, 10, 3);
    CHECK_FALSE(result.partial_failure);
    REQUIRE(result.cases.size() == 2);
    for (const auto& c : result.cases) {
        CHECK(c.ok);
        CHECK(c.label == true);
        CHECK(c.score == 1.0);
    }
}

TEST_CASE("verifier likelihood pairs are normalized on the way in") {
    ConstantBackend reasoner(constant_reasoner_response(4, true));
    ConstantBackend verifier(json{{"l_correct", 0.6}, {"l_incorrect", 0.2}});
    RunResult result = run_reveal(two_cases(), reasoner, verifier, 4, 2);
    CHECK(result.cases[0].score == doctest::Approx(0.75));
}

TEST_CASE("scripted replay reproduces a recorded session byte for byte") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "trajgraph_reveal_test";
    fs::create_directories(dir);
    auto reasoner_replay = (dir / "reasoner.jsonl").string();
    auto verifier_replay = (dir / "verifier.jsonl").string();
    auto audit1 = (dir / "audit1.jsonl").string();
    auto audit2 = (dir / "audit2.jsonl").string();

    {
        auto reasoner = std::make_shared<ConstantBackend>(constant_reasoner_response(5, false));
        auto verifier = std::make_shared<ConstantBackend>(json{{"confidence", 0.8}});
        RecordingBackend rec_reasoner(reasoner, reasoner_replay);
        RecordingBackend rec_verifier(verifier, verifier_replay);
        run_reveal(two_cases(), rec_reasoner, rec_verifier, 5, 3, audit1);
    }
    {
        ScriptedBackend reasoner(reasoner_replay);
        ScriptedBackend verifier(verifier_replay);
        RunResult replayed = run_reveal(two_cases(), reasoner, verifier, 5, 3, audit2);
        CHECK_FALSE(replayed.partial_failure);
    }
    std::ifstream a(audit1), b(audit2);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(!sa.empty());
    fs::remove_all(dir);
}

TEST_CASE("missing replay entries mark the case failed and the run partial") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "trajgraph_reveal_fail";
    fs::create_directories(dir);
    auto replay = (dir / "empty.jsonl").string();
    std::ofstream(replay) << "";

    ScriptedBackend reasoner(replay);
    ConstantBackend verifier(json{{"confidence", 0.5}});
    RunResult result = run_reveal(two_cases(), reasoner, verifier, 5, 3);
    CHECK(result.partial_failure);
    for (const auto& c : result.cases) {
        CHECK_FALSE(c.ok);
        CHECK(!c.error.empty());
    }
    fs::remove_all(dir);
}

TEST_CASE("external command backend speaks json over pipes") {
    // `cat` echoes the request; craft a request that is also a valid response
    ExternalCommandBackend echo("cat");
    json request{{"paths", json::array({{{"prediction", true}, {"explanation", "x"}}})}};
    json response = echo.call(request);
    CHECK(response == request);

    ExternalCommandBackend failing("exit 3");
    CHECK_THROWS_AS(failing.call(json{{"a", 1}}), InputError);
}

TEST_CASE("n_paths mismatches from the reasoner are case failures") {
    ConstantBackend reasoner(constant_reasoner_response(4, true));
    ConstantBackend verifier(json{{"confidence", 0.5}});
    RunResult result = run_reveal(two_cases(), reasoner, verifier, 10, 3);
    CHECK(result.partial_failure);
    CHECK_FALSE(result.cases[0].ok);
}
