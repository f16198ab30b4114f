#include "doctest.h"

#include <map>
#include <set>
#include <tuple>

#include "timegraph_oracle.hpp"
#include "trajgraph/common.hpp"
#include "trajgraph/ingest.hpp"

using namespace trajgraph;
using namespace trajgraph::ingest;

namespace {

std::map<std::string, std::string> identity_map(int n) {
    std::map<std::string, std::string> m;
    for (int i = 0; i < n; ++i) {
        std::string name(1, static_cast<char>('A' + i));
        m[name] = name;
    }
    return m;
}

TemporalRelationCandidate rel(const std::string& s, const std::string& t, TemporalRelation r,
                              double conf) {
    return {s, t, r, conf};
}

std::size_t count_kind(const std::vector<GraphEdge>& edges, EdgeKind kind) {
    std::size_t n = 0;
    for (const auto& e : edges) n += static_cast<std::size_t>(e.kind == kind);
    return n;
}

// random candidate sets over up to max_nodes nodes
std::vector<TemporalRelationCandidate> fuzz_candidates(Rng& rng, int max_nodes) {
    int nodes = rng.uniform_int(2, max_nodes);
    int n_rel = rng.uniform_int(0, 3 * nodes);
    std::vector<TemporalRelationCandidate> out;
    for (int i = 0; i < n_rel; ++i) {
        int a = rng.uniform_int(0, nodes - 1);
        int b = rng.uniform_int(0, nodes - 1);
        if (a == b) continue;
        TemporalRelation r;
        switch (rng.next_below(3)) {
            case 0: r = TemporalRelation::Before; break;
            case 1: r = TemporalRelation::After; break;
            default: r = TemporalRelation::Overlap; break;
        }
        // coarse confidences force plenty of ties
        double conf = static_cast<double>(rng.uniform_int(1, 10)) / 10.0;
        out.push_back(rel(std::string(1, static_cast<char>('A' + a)),
                          std::string(1, static_cast<char>('A' + b)), r, conf));
    }
    return out;
}

}  // namespace

TEST_CASE("empty candidate set reduces to the empty edge set") {
    auto result = reduce_timegraph({}, identity_map(3));
    CHECK(result.edges.empty());
    CHECK(result.rejected.empty());
}

TEST_CASE("confidence-ordered cycle keeps the two strongest edges") {
    auto result = reduce_timegraph(
        {rel("A", "B", TemporalRelation::Before, 0.9),
         rel("B", "C", TemporalRelation::Before, 0.8),
         rel("C", "A", TemporalRelation::Before, 0.7)},
        identity_map(3));
    REQUIRE(result.edges.size() == 2);
    CHECK(result.edges[0].source == "A");
    CHECK(result.edges[0].target == "B");
    CHECK(result.edges[1].source == "B");
    CHECK(result.edges[1].target == "C");
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected[0].source == "C");
    CHECK(result.rejected[0].target == "A");
}

TEST_CASE("after edges are rewritten to before") {
    auto result =
        reduce_timegraph({rel("A", "B", TemporalRelation::After, 0.9)}, identity_map(2));
    REQUIRE(result.edges.size() == 1);
    CHECK(result.edges[0].source == "B");
    CHECK(result.edges[0].target == "A");
    CHECK(result.edges[0].kind == EdgeKind::Before);
    CHECK(result.edges[0].confidence == 0.9);
}

TEST_CASE("overlap edges are stored symmetrically") {
    auto result =
        reduce_timegraph({rel("A", "B", TemporalRelation::Overlap, 0.8)}, identity_map(2));
    CHECK(count_kind(result.edges, EdgeKind::Overlap) == 2);
}

TEST_CASE("before inside an overlap component is rejected") {
    auto result = reduce_timegraph(
        {rel("A", "B", TemporalRelation::Overlap, 0.9),
         rel("A", "B", TemporalRelation::Before, 0.5)},
        identity_map(2));
    CHECK(count_kind(result.edges, EdgeKind::Before) == 0);
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected[0].reason == "before inside an overlap component");
}

TEST_CASE("overlap contradicting a before chain is rejected") {
    auto result = reduce_timegraph(
        {rel("A", "B", TemporalRelation::Before, 0.9),
         rel("B", "C", TemporalRelation::Before, 0.8),
         rel("A", "C", TemporalRelation::Overlap, 0.5)},
        identity_map(3));
    CHECK(count_kind(result.edges, EdgeKind::Overlap) == 0);
    REQUIRE(result.rejected.size() == 1);
}

TEST_CASE("cycle through an overlap component is rejected") {
    auto result = reduce_timegraph(
        {rel("A", "B", TemporalRelation::Overlap, 0.9),
         rel("B", "C", TemporalRelation::Before, 0.8),
         rel("C", "A", TemporalRelation::Before, 0.7)},
        identity_map(3));
    CHECK(result.rejected.size() == 1);
    CHECK(result.rejected[0].reason == "would create a cycle");
}

TEST_CASE("self-relations created by mention merging are dropped silently") {
    std::map<std::string, std::string> node_map{{"m1", "N"}, {"m2", "N"}, {"m3", "X"}};
    auto result = reduce_timegraph(
        {rel("m1", "m2", TemporalRelation::Before, 0.9),
         rel("m1", "m3", TemporalRelation::Before, 0.8)},
        node_map);
    CHECK(result.edges.size() == 1);
    CHECK(result.rejected.empty());
}

TEST_CASE("dangling endpoints are rejected input") {
    CHECK_THROWS_AS(
        reduce_timegraph({rel("A", "Z", TemporalRelation::Before, 0.9)}, identity_map(2)),
        InputError);
}

TEST_CASE("reduction is deterministic") {
    Rng rng(7);
    auto candidates = fuzz_candidates(rng, 8);
    auto map = identity_map(8);
    auto a = reduce_timegraph(candidates, map);
    auto b = reduce_timegraph(candidates, map);
    REQUIRE(a.edges.size() == b.edges.size());
    for (std::size_t i = 0; i < a.edges.size(); ++i) {
        CHECK(a.edges[i].source == b.edges[i].source);
        CHECK(a.edges[i].target == b.edges[i].target);
        CHECK(a.edges[i].kind == b.edges[i].kind);
    }
    CHECK(a.rejected.size() == b.rejected.size());
}

TEST_CASE("equal confidences keep input order") {
    // two contradictory edges at the same confidence: the first one wins
    auto result = reduce_timegraph(
        {rel("A", "B", TemporalRelation::Before, 0.5),
         rel("B", "A", TemporalRelation::Before, 0.5)},
        identity_map(2));
    REQUIRE(result.edges.size() == 1);
    CHECK(result.edges[0].source == "A");
}

TEST_CASE("fuzzed reductions stay acyclic and match the closure oracle") {
    Rng rng(1234);
    auto map = identity_map(12);
    for (int trial = 0; trial < 300; ++trial) {
        auto candidates = fuzz_candidates(rng, 12);
        auto result = reduce_timegraph(candidates, map);

        VisitGraph g;
        for (const auto& m : map) {
            GraphNode n;
            n.node_id = m.second;
            n.kind = NodeKind::Entity;
            n.mention_ids = {m.first};
            g.nodes.push_back(n);
        }
        g.edges = result.edges;
        CHECK(before_subgraph_is_acyclic(g));

        // every kept/dropped decision must agree with the oracle
        auto decisions = timegraph_oracle::reduce(candidates, map);
        std::size_t oracle_rejects = 0;
        for (const auto& d : decisions) oracle_rejects += static_cast<std::size_t>(!d.kept);
        REQUIRE(result.rejected.size() == oracle_rejects);

        std::size_t reject_cursor = 0;
        for (const auto& d : decisions) {
            if (d.kept) continue;
            const auto& r = result.rejected[reject_cursor++];
            CHECK(r.source == d.relation.source);
            CHECK(r.target == d.relation.target);
            CHECK(r.confidence == d.relation.confidence);
        }

        // kept edges are exactly the oracle's kept set (overlaps symmetrized)
        std::set<std::tuple<std::string, std::string, int>> impl_kept, oracle_kept;
        for (const auto& e : result.edges)
            impl_kept.insert({e.source, e.target, static_cast<int>(e.kind)});
        for (const auto& d : decisions) {
            if (!d.kept) continue;
            if (d.relation.relation == TemporalRelation::Before) {
                oracle_kept.insert({d.relation.source, d.relation.target,
                                    static_cast<int>(EdgeKind::Before)});
            } else {
                oracle_kept.insert({d.relation.source, d.relation.target,
                                    static_cast<int>(EdgeKind::Overlap)});
                oracle_kept.insert({d.relation.target, d.relation.source,
                                    static_cast<int>(EdgeKind::Overlap)});
            }
        }
        CHECK(impl_kept == oracle_kept);
    }
}
