#include "trajgraph/ingest.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "trajgraph/common.hpp"

namespace trajgraph::ingest {

std::optional<Date> resolve_dct(const NoteExtraction& note, DateLocale locale) {
    if (note.visit_date) return note.visit_date;
    if (note.dct_mention) {
        if (const EntityMention* m = note.find_mention(*note.dct_mention))
            return normalize_date(m->text, std::nullopt, locale);
    }
    return std::nullopt;
}

std::vector<GraphNode> cluster_mentions(const NoteExtraction& note, const ConceptLinks& links,
                                        DateLocale locale) {
    for (const auto& [mention_id, concept_id] : links) {
        if (!note.find_mention(mention_id))
            throw InputError("note " + note.note_id + ": concept link references unknown mention '" +
                             mention_id + "'");
        if (concept_id.empty())
            throw InputError("note " + note.note_id + ": empty concept id for mention '" +
                             mention_id + "'");
    }

    const std::optional<Date> dct = resolve_dct(note, locale);

    std::vector<GraphNode> nodes;
    std::unordered_map<std::string, std::size_t> group_index;  // group key -> node slot

    auto append_to_group = [&](const std::string& key, GraphNode proto,
                               const std::string& mention_id) {
        auto it = group_index.find(key);
        if (it == group_index.end()) {
            proto.mention_ids.push_back(mention_id);
            group_index.emplace(key, nodes.size());
            nodes.push_back(std::move(proto));
        } else {
            nodes[it->second].mention_ids.push_back(mention_id);
        }
    };

    for (const auto& m : note.mentions) {
        if (is_time_expression(m.entity_class)) {
            std::optional<Date> d;
            if (m.entity_class == EntityClass::Date) d = normalize_date(m.text, dct, locale);
            if (d) {
                GraphNode proto;
                proto.node_id = "t:" + d->to_iso();
                proto.kind = NodeKind::Timex;
                proto.normalized_date = d;
                append_to_group("d:" + d->to_iso(), std::move(proto), m.mention_id);
            } else {
                GraphNode n;
                n.node_id = "m:" + m.mention_id;
                n.kind = NodeKind::Timex;
                n.mention_ids.push_back(m.mention_id);
                nodes.push_back(std::move(n));
            }
        } else {
            auto link = links.find(m.mention_id);
            if (link != links.end()) {
                GraphNode proto;
                proto.node_id = "e:" + link->second;
                proto.kind = NodeKind::Entity;
                proto.concept_id = link->second;
                append_to_group("c:" + link->second, std::move(proto), m.mention_id);
            } else {
                GraphNode n;
                n.node_id = "m:" + m.mention_id;
                n.kind = NodeKind::Entity;
                n.mention_ids.push_back(m.mention_id);
                nodes.push_back(std::move(n));
            }
        }
    }
    return nodes;
}

namespace {

// Overlap components with the Before relation checked between components.
class ConsistencyState {
public:
    int id_of(const std::string& node) {
        auto it = index_.find(node);
        if (it != index_.end()) return it->second;
        int id = static_cast<int>(parent_.size());
        index_.emplace(node, id);
        parent_.push_back(id);
        return id;
    }

    int find(int x) {
        while (parent_[static_cast<std::size_t>(x)] != x) {
            parent_[static_cast<std::size_t>(x)] =
                parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
            x = parent_[static_cast<std::size_t>(x)];
        }
        return x;
    }

    void unite(int a, int b) { parent_[static_cast<std::size_t>(find(a))] = find(b); }

    // True when some Before chain leads from the component of `from` to the
    // component of `to`.
    bool reaches(int from, int to) {
        int src = find(from), dst = find(to);
        if (src == dst) return true;
        std::deque<int> queue{src};
        std::unordered_set<int> seen{src};
        while (!queue.empty()) {
            int u = queue.front();
            queue.pop_front();
            for (const auto& [a, b] : before_) {
                if (find(a) != u) continue;
                int v = find(b);
                if (v == dst) return true;
                if (seen.insert(v).second) queue.push_back(v);
            }
        }
        return false;
    }

    void add_before(int a, int b) { before_.emplace_back(a, b); }

private:
    std::unordered_map<std::string, int> index_;
    std::vector<int> parent_;
    std::vector<std::pair<int, int>> before_;
};

}  // namespace

TimegraphResult reduce_timegraph(const std::vector<TemporalRelationCandidate>& candidates,
                                 const std::map<std::string, std::string>& mention_to_node) {
    struct Lifted {
        std::string source, target;
        TemporalRelation relation;
        double confidence;
    };

    std::vector<Lifted> lifted;
    lifted.reserve(candidates.size());
    for (const auto& c : candidates) {
        auto s = mention_to_node.find(c.source);
        auto t = mention_to_node.find(c.target);
        if (s == mention_to_node.end())
            throw InputError("relation endpoint '" + c.source + "' has no graph node");
        if (t == mention_to_node.end())
            throw InputError("relation endpoint '" + c.target + "' has no graph node");
        if (s->second == t->second) continue;  // merged mentions; dropped silently
        Lifted l{s->second, t->second, c.relation, c.confidence};
        if (l.relation == TemporalRelation::After) {
            std::swap(l.source, l.target);
            l.relation = TemporalRelation::Before;
        }
        lifted.push_back(std::move(l));
    }

    std::stable_sort(lifted.begin(), lifted.end(),
                     [](const Lifted& a, const Lifted& b) { return a.confidence > b.confidence; });

    TimegraphResult result;
    ConsistencyState state;
    auto edge_present = [&](const std::string& s, const std::string& t, EdgeKind k) {
        for (const auto& e : result.edges)
            if (e.source == s && e.target == t && e.kind == k) return true;
        return false;
    };

    for (const auto& l : lifted) {
        int a = state.id_of(l.source);
        int b = state.id_of(l.target);
        if (l.relation == TemporalRelation::Before) {
            if (state.find(a) == state.find(b)) {
                result.rejected.push_back({l.source, l.target, l.relation, l.confidence,
                                           "before inside an overlap component"});
                continue;
            }
            if (state.reaches(b, a)) {
                result.rejected.push_back(
                    {l.source, l.target, l.relation, l.confidence, "would create a cycle"});
                continue;
            }
            state.add_before(a, b);
            if (!edge_present(l.source, l.target, EdgeKind::Before))
                result.edges.push_back({l.source, l.target, EdgeKind::Before, l.confidence});
        } else {  // Overlap
            if (state.find(a) != state.find(b)) {
                if (state.reaches(a, b) || state.reaches(b, a)) {
                    result.rejected.push_back({l.source, l.target, l.relation, l.confidence,
                                               "contradicts an existing before ordering"});
                    continue;
                }
                state.unite(a, b);
            }
            if (!edge_present(l.source, l.target, EdgeKind::Overlap))
                result.edges.push_back({l.source, l.target, EdgeKind::Overlap, l.confidence});
            if (!edge_present(l.target, l.source, EdgeKind::Overlap))
                result.edges.push_back({l.target, l.source, EdgeKind::Overlap, l.confidence});
        }
    }
    return result;
}

VisitGraph build_visit_graph(const NoteExtraction& note, const ConceptLinks& links,
                             int visit_index, DateLocale locale,
                             std::vector<RejectedEdge>* rejected_out) {
    VisitGraph g;
    g.visit_index = visit_index;
    g.nodes = cluster_mentions(note, links, locale);

    std::map<std::string, std::string> mention_to_node;
    for (const auto& n : g.nodes)
        for (const auto& m : n.mention_ids) mention_to_node[m] = n.node_id;

    TimegraphResult reduced = reduce_timegraph(note.relations, mention_to_node);
    g.edges = std::move(reduced.edges);
    if (rejected_out)
        rejected_out->insert(rejected_out->end(), reduced.rejected.begin(),
                             reduced.rejected.end());
    g.validate();
    return g;
}

std::vector<NoteExtraction> sort_notes_by_visit(std::vector<NoteExtraction> notes) {
    bool all_dated = std::all_of(notes.begin(), notes.end(),
                                 [](const NoteExtraction& n) { return n.visit_date.has_value(); });
    if (all_dated) {
        std::stable_sort(notes.begin(), notes.end(),
                         [](const NoteExtraction& a, const NoteExtraction& b) {
                             if (*a.visit_date != *b.visit_date)
                                 return *a.visit_date < *b.visit_date;
                             return a.note_id < b.note_id;
                         });
    }
    return notes;
}

std::vector<NoteExtraction> truncate_visits(std::vector<NoteExtraction> notes,
                                            std::size_t max_notes) {
    if (notes.empty()) throw InputError("patient record has no notes");
    if (notes.size() <= max_notes) return notes;
    return std::vector<NoteExtraction>(notes.end() - static_cast<long>(max_notes), notes.end());
}

}  // namespace trajgraph::ingest
