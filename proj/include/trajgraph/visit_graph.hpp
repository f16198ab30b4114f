#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trajgraph/date.hpp"

namespace trajgraph::ingest {

enum class NodeKind { Entity, Timex, SemanticType };

std::string node_kind_name(NodeKind k);
std::optional<NodeKind> node_kind_from_name(std::string_view name);

enum class EdgeKind { Before, Overlap, IsA, Semantic };

std::string edge_kind_name(EdgeKind k);
std::optional<EdgeKind> edge_kind_from_name(std::string_view name);

struct GraphNode {
    std::string node_id;
    NodeKind kind = NodeKind::Entity;
    std::vector<std::string> mention_ids;  // empty for SemanticType nodes
    std::optional<std::string> concept_id;
    std::optional<Date> normalized_date;
};

struct GraphEdge {
    std::string source;
    std::string target;
    EdgeKind kind = EdgeKind::Before;
    double confidence = 1.0;

    friend bool operator==(const GraphEdge& a, const GraphEdge& b) {
        return a.source == b.source && a.target == b.target && a.kind == b.kind;
    }
};

// Reduced, knowledge-augmented temporal graph of one visit. Edges behave as a
// set keyed by (source, target, kind); insertion order is preserved so runs
// stay reproducible. Overlap edges are stored in both directions.
struct VisitGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
    int visit_index = 0;

    bool has_node(const std::string& node_id) const;
    const GraphNode* find_node(const std::string& node_id) const;
    // Returns false (and leaves the graph unchanged) when the edge is already present.
    bool add_edge(GraphEdge edge);

    std::map<std::string, std::size_t> node_index() const;

    // Endpoint existence, Overlap symmetry, mention-partition, Before acyclicity.
    void validate() const;
};

bool before_subgraph_is_acyclic(const VisitGraph& g);

nlohmann::json graph_to_json(const VisitGraph& g);
VisitGraph graph_from_json(const nlohmann::json& j, const std::string& origin);

VisitGraph load_graph_file(const std::string& path);
void save_graph_file(const VisitGraph& g, const std::string& path);

}  // namespace trajgraph::ingest
