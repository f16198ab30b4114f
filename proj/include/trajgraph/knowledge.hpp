#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trajgraph/extraction.hpp"
#include "trajgraph/ingest.hpp"
#include "trajgraph/visit_graph.hpp"

namespace trajgraph::kb {

struct ConceptInfo {
    std::string preferred_name;
    std::vector<std::string> semantic_types;
};

struct SemanticRelation {
    std::string subject_type;
    std::string label;
    std::string object_type;
};

// Self-contained local concept table: concepts with their semantic types,
// the type hierarchy labels, permissible type-to-type relations, and optional
// concept vectors. Immutable after load.
struct KnowledgeBase {
    std::map<std::string, ConceptInfo> concepts;
    std::map<std::string, std::string> type_labels;
    std::vector<SemanticRelation> semantic_relations;
    std::map<std::string, std::vector<double>> concept_vectors;
    std::size_t vector_dim = 0;

    bool has_concept(const std::string& cui) const { return concepts.count(cui) > 0; }

    // Every semantic type and relation endpoint must exist in type_labels;
    // all vectors must share vector_dim.
    void validate() const;
};

nlohmann::json kb_to_json(const KnowledgeBase& kb);
KnowledgeBase kb_from_json(const nlohmann::json& j, const std::string& origin);
KnowledgeBase load_kb_file(const std::string& path);
void save_kb_file(const KnowledgeBase& kb, const std::string& path);

// lowercased surface string -> concept id
using Lexicon = std::map<std::string, std::string>;

Lexicon load_lexicon_tsv(const std::string& path);
void save_lexicon_tsv(const Lexicon& lexicon, const std::string& path);

// Only Problem/Treatment/Test/ClinicalDepartment mentions are linked; other
// classes stay unmapped regardless of lexicon content. Throws InputError when
// the lexicon maps to a concept the KB does not know.
ingest::ConceptLinks link_concepts(const ingest::NoteExtraction& note, const KnowledgeBase& kb,
                                   const Lexicon& lexicon);

// Node id for the semantic-type node of a type id.
std::string semantic_type_node_id(const std::string& type_id);

// Adds one SemanticType node per distinct type among linked nodes, an IsA
// edge from each linked node to each of its type nodes, and Semantic edges
// between type nodes for every permissible relation present. Idempotent.
ingest::VisitGraph augment_graph(ingest::VisitGraph graph, const KnowledgeBase& kb);

// Exact inverse of augment_graph.
ingest::VisitGraph strip_augmentation(ingest::VisitGraph graph);

}  // namespace trajgraph::kb
