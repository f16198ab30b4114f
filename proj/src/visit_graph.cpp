#include "trajgraph/visit_graph.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "trajgraph/common.hpp"

namespace trajgraph::ingest {

using nlohmann::json;

std::string node_kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::Entity: return "Entity";
        case NodeKind::Timex: return "Timex";
        case NodeKind::SemanticType: return "SemanticType";
    }
    return "Entity";
}

std::optional<NodeKind> node_kind_from_name(std::string_view name) {
    if (name == "Entity") return NodeKind::Entity;
    if (name == "Timex") return NodeKind::Timex;
    if (name == "SemanticType") return NodeKind::SemanticType;
    return std::nullopt;
}

std::string edge_kind_name(EdgeKind k) {
    switch (k) {
        case EdgeKind::Before: return "Before";
        case EdgeKind::Overlap: return "Overlap";
        case EdgeKind::IsA: return "IsA";
        case EdgeKind::Semantic: return "Semantic";
    }
    return "Before";
}

std::optional<EdgeKind> edge_kind_from_name(std::string_view name) {
    if (name == "Before") return EdgeKind::Before;
    if (name == "Overlap") return EdgeKind::Overlap;
    if (name == "IsA") return EdgeKind::IsA;
    if (name == "Semantic") return EdgeKind::Semantic;
    return std::nullopt;
}

bool VisitGraph::has_node(const std::string& node_id) const {
    return find_node(node_id) != nullptr;
}

const GraphNode* VisitGraph::find_node(const std::string& node_id) const {
    for (const auto& n : nodes)
        if (n.node_id == node_id) return &n;
    return nullptr;
}

bool VisitGraph::add_edge(GraphEdge edge) {
    for (const auto& e : edges)
        if (e == edge) return false;
    edges.push_back(std::move(edge));
    return true;
}

std::map<std::string, std::size_t> VisitGraph::node_index() const {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < nodes.size(); ++i) idx[nodes[i].node_id] = i;
    return idx;
}

bool before_subgraph_is_acyclic(const VisitGraph& g) {
    std::unordered_map<std::string, std::vector<std::string>> adj;
    for (const auto& e : g.edges)
        if (e.kind == EdgeKind::Before) adj[e.source].push_back(e.target);

    enum class Mark { White, Grey, Black };
    std::unordered_map<std::string, Mark> mark;
    std::function<bool(const std::string&)> dfs = [&](const std::string& u) {
        mark[u] = Mark::Grey;
        for (const auto& v : adj[u]) {
            Mark m = mark.count(v) ? mark[v] : Mark::White;
            if (m == Mark::Grey) return false;
            if (m == Mark::White && !dfs(v)) return false;
        }
        mark[u] = Mark::Black;
        return true;
    };
    for (const auto& [u, _] : adj) {
        Mark m = mark.count(u) ? mark[u] : Mark::White;
        if (m == Mark::White && !dfs(u)) return false;
    }
    return true;
}

void VisitGraph::validate() const {
    std::unordered_set<std::string> ids;
    std::unordered_set<std::string> seen_mentions;
    for (const auto& n : nodes) {
        if (!ids.insert(n.node_id).second)
            throw InputError("graph: duplicate node id '" + n.node_id + "'");
        if (n.kind == NodeKind::SemanticType) {
            if (!n.mention_ids.empty())
                throw InputError("graph: semantic-type node '" + n.node_id + "' has mentions");
            if (!n.concept_id)
                throw InputError("graph: semantic-type node '" + n.node_id +
                                 "' lacks a concept label");
        } else if (n.mention_ids.empty()) {
            throw InputError("graph: node '" + n.node_id + "' has no mentions");
        }
        for (const auto& m : n.mention_ids)
            if (!seen_mentions.insert(m).second)
                throw InputError("graph: mention '" + m + "' belongs to more than one node");
    }
    std::set<std::pair<std::string, std::string>> overlaps;
    for (const auto& e : edges) {
        if (!ids.count(e.source) || !ids.count(e.target))
            throw InputError("graph: edge endpoint not among nodes (" + e.source + " -> " +
                             e.target + ")");
        if (e.kind == EdgeKind::Overlap) overlaps.insert({e.source, e.target});
    }
    for (const auto& [s, t] : overlaps)
        if (!overlaps.count({t, s}))
            throw InputError("graph: overlap edge " + s + " <-> " + t + " is not symmetric");
    if (!before_subgraph_is_acyclic(*this))
        throw InputError("graph: before edges contain a cycle");
}

json graph_to_json(const VisitGraph& g) {
    json nodes = json::array();
    for (const auto& n : g.nodes) {
        nodes.push_back(
            {{"id", n.node_id},
             {"kind", node_kind_name(n.kind)},
             {"mentions", n.mention_ids},
             {"concept", n.concept_id ? json(*n.concept_id) : json(nullptr)},
             {"date", n.normalized_date ? json(n.normalized_date->to_iso()) : json(nullptr)}});
    }
    json edges = json::array();
    for (const auto& e : g.edges)
        edges.push_back({e.source, e.target, edge_kind_name(e.kind), e.confidence});
    return json{{"visit_index", g.visit_index}, {"nodes", std::move(nodes)},
                {"edges", std::move(edges)}};
}

VisitGraph graph_from_json(const json& j, const std::string& origin) {
    auto fail = [&](const std::string& what) -> InputError {
        return InputError(origin + ": " + what);
    };
    VisitGraph g;
    g.visit_index = j.value("visit_index", 0);
    for (const auto& jn : j.value("nodes", json::array())) {
        GraphNode n;
        n.node_id = jn.value("id", std::string{});
        auto kind = node_kind_from_name(jn.value("kind", std::string{}));
        if (!kind) throw fail("node '" + n.node_id + "' has unknown kind");
        n.kind = *kind;
        n.mention_ids = jn.value("mentions", std::vector<std::string>{});
        if (jn.contains("concept") && !jn.at("concept").is_null())
            n.concept_id = jn.at("concept").get<std::string>();
        if (jn.contains("date") && !jn.at("date").is_null()) {
            auto d = Date::parse_iso(jn.at("date").get<std::string>());
            if (!d) throw fail("node '" + n.node_id + "' has malformed date");
            n.normalized_date = *d;
        }
        g.nodes.push_back(std::move(n));
    }
    for (const auto& je : j.value("edges", json::array())) {
        if (!je.is_array() || je.size() != 4) throw fail("edge entry is not [src,tgt,kind,conf]");
        GraphEdge e;
        e.source = je[0].get<std::string>();
        e.target = je[1].get<std::string>();
        auto kind = edge_kind_from_name(je[2].get<std::string>());
        if (!kind) throw fail("edge has unknown kind '" + je[2].get<std::string>() + "'");
        e.kind = *kind;
        e.confidence = je[3].get<double>();
        g.edges.push_back(std::move(e));
    }
    try {
        g.validate();
    } catch (const InputError& e) {
        throw fail(e.what());
    }
    return g;
}

VisitGraph load_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open graph file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw InputError(path + ": invalid JSON (" + e.what() + ")");
    }
    return graph_from_json(j, path);
}

void save_graph_file(const VisitGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write graph file " + path);
    out << graph_to_json(g).dump() << "\n";
}

}  // namespace trajgraph::ingest
