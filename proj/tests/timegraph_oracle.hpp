// Brute-force temporal-consistency oracle used by the unit and acceptance
// suites. Re-implements lifting, flipping, ordering, and the keep/drop rule
// from scratch via full transitive-closure recomputation at every step;
// deliberately shares no machinery with the library's incremental checker.
#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "trajgraph/extraction.hpp"

namespace timegraph_oracle {

using trajgraph::ingest::TemporalRelation;
using trajgraph::ingest::TemporalRelationCandidate;

struct LiftedRelation {
    std::string source, target;
    TemporalRelation relation;  // Before or Overlap only
    double confidence;
};

struct Decision {
    LiftedRelation relation;
    bool kept;
};

// Same preprocessing contract as the reducer: lift to node level, drop
// self-loops, flip After, stable sort by descending confidence.
inline std::vector<LiftedRelation> prepare(
    const std::vector<TemporalRelationCandidate>& candidates,
    const std::map<std::string, std::string>& mention_to_node) {
    std::vector<LiftedRelation> lifted;
    for (const auto& c : candidates) {
        std::string s = mention_to_node.at(c.source);
        std::string t = mention_to_node.at(c.target);
        if (s == t) continue;
        LiftedRelation l{s, t, c.relation, c.confidence};
        if (l.relation == TemporalRelation::After) {
            std::swap(l.source, l.target);
            l.relation = TemporalRelation::Before;
        }
        lifted.push_back(std::move(l));
    }
    std::stable_sort(lifted.begin(), lifted.end(),
                     [](const LiftedRelation& a, const LiftedRelation& b) {
                         return a.confidence > b.confidence;
                     });
    return lifted;
}

// Consistency by full closure: the set is consistent iff, after closing the
// overlap relation transitively and propagating before-chains through overlap
// classes, no node is before itself or before an overlap-equivalent node.
inline bool consistent(const std::vector<LiftedRelation>& relations) {
    std::vector<std::string> names;
    auto index_of = [&](const std::string& n) {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == n) return i;
        names.push_back(n);
        return names.size() - 1;
    };
    struct Pair {
        std::size_t a, b;
        bool before;
    };
    std::vector<Pair> pairs;
    for (const auto& r : relations)
        pairs.push_back({index_of(r.source), index_of(r.target),
                         r.relation == TemporalRelation::Before});

    std::size_t n = names.size();
    std::vector<std::vector<bool>> same(n, std::vector<bool>(n, false));
    std::vector<std::vector<bool>> before(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) same[i][i] = true;
    for (const auto& p : pairs) {
        if (p.before) before[p.a][p.b] = true;
        else same[p.a][p.b] = same[p.b][p.a] = true;
    }

    // closure of the overlap equivalence
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            if (same[i][k])
                for (std::size_t j = 0; j < n; ++j)
                    if (same[k][j]) same[i][j] = true;

    // fixpoint of before under composition with itself and with overlap
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (before[i][j]) continue;
                bool derived = false;
                for (std::size_t k = 0; k < n && !derived; ++k) {
                    if (before[i][k] && before[k][j]) derived = true;
                    if (same[i][k] && before[k][j]) derived = true;
                    if (before[i][k] && same[k][j]) derived = true;
                }
                if (derived) {
                    before[i][j] = true;
                    changed = true;
                }
            }
    }

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (before[i][j] && same[i][j]) return false;
    return true;
}

// Greedy reduction driven purely by the closure check.
inline std::vector<Decision> reduce(const std::vector<TemporalRelationCandidate>& candidates,
                                    const std::map<std::string, std::string>& mention_to_node) {
    std::vector<Decision> decisions;
    std::vector<LiftedRelation> kept;
    for (const auto& r : prepare(candidates, mention_to_node)) {
        std::vector<LiftedRelation> attempt = kept;
        attempt.push_back(r);
        bool ok = consistent(attempt);
        if (ok) kept.push_back(r);
        decisions.push_back({r, ok});
    }
    return decisions;
}

}  // namespace timegraph_oracle
