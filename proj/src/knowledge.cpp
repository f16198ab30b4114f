#include "trajgraph/knowledge.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "trajgraph/common.hpp"

namespace trajgraph::kb {

using ingest::EdgeKind;
using ingest::EntityClass;
using ingest::GraphEdge;
using ingest::GraphNode;
using ingest::NodeKind;
using ingest::VisitGraph;
using nlohmann::json;

void KnowledgeBase::validate() const {
    for (const auto& [cui, info] : concepts) {
        for (const auto& t : info.semantic_types)
            if (!type_labels.count(t))
                throw InputError("kb: concept " + cui + " uses unknown semantic type '" + t + "'");
    }
    for (const auto& r : semantic_relations) {
        if (!type_labels.count(r.subject_type) || !type_labels.count(r.object_type))
            throw InputError("kb: semantic relation (" + r.subject_type + ", " + r.label + ", " +
                             r.object_type + ") references an unknown type");
    }
    for (const auto& [cui, vec] : concept_vectors) {
        if (vec.size() != vector_dim)
            throw InputError("kb: vector for " + cui + " has dimension " +
                             std::to_string(vec.size()) + ", expected " +
                             std::to_string(vector_dim));
    }
}

json kb_to_json(const KnowledgeBase& kb) {
    json concepts = json::object();
    for (const auto& [cui, info] : kb.concepts)
        concepts[cui] = {{"name", info.preferred_name}, {"types", info.semantic_types}};
    json relations = json::array();
    for (const auto& r : kb.semantic_relations)
        relations.push_back({r.subject_type, r.label, r.object_type});
    json vectors = json::object();
    for (const auto& [cui, vec] : kb.concept_vectors) vectors[cui] = vec;
    return json{{"concepts", std::move(concepts)},
                {"type_labels", kb.type_labels},
                {"semantic_relations", std::move(relations)},
                {"vectors", std::move(vectors)}};
}

KnowledgeBase kb_from_json(const json& j, const std::string& origin) {
    auto fail = [&](const std::string& what) -> InputError {
        return InputError(origin + ": " + what);
    };
    KnowledgeBase kb;
    const json concepts = j.value("concepts", json::object());
    for (const auto& [cui, jc] : concepts.items()) {
        ConceptInfo info;
        info.preferred_name = jc.value("name", std::string{});
        info.semantic_types = jc.value("types", std::vector<std::string>{});
        kb.concepts.emplace(cui, std::move(info));
    }
    if (j.contains("type_labels"))
        kb.type_labels = j.at("type_labels").get<std::map<std::string, std::string>>();
    for (const auto& jr : j.value("semantic_relations", json::array())) {
        if (!jr.is_array() || jr.size() != 3)
            throw fail("semantic relation entry is not [type, label, type]");
        kb.semantic_relations.push_back(
            {jr[0].get<std::string>(), jr[1].get<std::string>(), jr[2].get<std::string>()});
    }
    const json vectors = j.value("vectors", json::object());
    for (const auto& [cui, jv] : vectors.items()) {
        auto vec = jv.get<std::vector<double>>();
        if (kb.vector_dim == 0) kb.vector_dim = vec.size();
        kb.concept_vectors.emplace(cui, std::move(vec));
    }
    try {
        kb.validate();
    } catch (const InputError& e) {
        throw fail(e.what());
    }
    return kb;
}

KnowledgeBase load_kb_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open knowledge base " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw InputError(path + ": invalid JSON (" + e.what() + ")");
    }
    return kb_from_json(j, path);
}

void save_kb_file(const KnowledgeBase& kb, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write knowledge base " + path);
    out << kb_to_json(kb).dump(2) << "\n";
}

Lexicon load_lexicon_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open lexicon " + path);
    Lexicon lex;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw InputError(path + ":" + std::to_string(line_no) + ": expected 'surface\\tcui'");
        std::string surface = lowercase(trim(line.substr(0, tab)));
        std::string cui = trim(line.substr(tab + 1));
        if (surface.empty() || cui.empty())
            throw InputError(path + ":" + std::to_string(line_no) + ": empty surface or cui");
        lex[surface] = cui;
    }
    return lex;
}

void save_lexicon_tsv(const Lexicon& lexicon, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write lexicon " + path);
    for (const auto& [surface, cui] : lexicon) out << surface << "\t" << cui << "\n";
}

namespace {

bool is_linkable(EntityClass c) {
    switch (c) {
        case EntityClass::Problem:
        case EntityClass::Treatment:
        case EntityClass::Test:
        case EntityClass::ClinicalDepartment:
            return true;
        default:
            return false;
    }
}

}  // namespace

ingest::ConceptLinks link_concepts(const ingest::NoteExtraction& note, const KnowledgeBase& kb,
                                   const Lexicon& lexicon) {
    for (const auto& [surface, cui] : lexicon)
        if (!kb.has_concept(cui))
            throw InputError("lexicon entry '" + surface + "' maps to unknown concept " + cui);

    ingest::ConceptLinks links;
    for (const auto& m : note.mentions) {
        if (!is_linkable(m.entity_class)) continue;
        auto hit = lexicon.find(lowercase(trim(m.text)));
        if (hit == lexicon.end()) continue;
        links.emplace(m.mention_id, hit->second);
    }
    return links;
}

std::string semantic_type_node_id(const std::string& type_id) { return "st:" + type_id; }

VisitGraph augment_graph(VisitGraph graph, const KnowledgeBase& kb) {
    // distinct types in first-appearance order over linked nodes
    std::vector<std::string> type_order;
    std::set<std::string> type_seen;
    for (const auto& n : graph.nodes) {
        if (n.kind == NodeKind::SemanticType || !n.concept_id) continue;
        auto it = kb.concepts.find(*n.concept_id);
        if (it == kb.concepts.end()) continue;
        for (const auto& t : it->second.semantic_types)
            if (type_seen.insert(t).second) type_order.push_back(t);
    }

    for (const auto& t : type_order) {
        std::string id = semantic_type_node_id(t);
        if (!graph.has_node(id)) {
            GraphNode tn;
            tn.node_id = id;
            tn.kind = NodeKind::SemanticType;
            tn.concept_id = t;
            graph.nodes.push_back(std::move(tn));
        }
    }

    for (const auto& n : graph.nodes) {
        if (n.kind == NodeKind::SemanticType || !n.concept_id) continue;
        auto it = kb.concepts.find(*n.concept_id);
        if (it == kb.concepts.end()) continue;
        for (const auto& t : it->second.semantic_types)
            graph.add_edge({n.node_id, semantic_type_node_id(t), EdgeKind::IsA, 1.0});
    }

    for (const auto& r : kb.semantic_relations) {
        if (type_seen.count(r.subject_type) && type_seen.count(r.object_type) &&
            r.subject_type != r.object_type) {
            graph.add_edge({semantic_type_node_id(r.subject_type),
                            semantic_type_node_id(r.object_type), EdgeKind::Semantic, 1.0});
        }
    }
    return graph;
}

VisitGraph strip_augmentation(VisitGraph graph) {
    graph.nodes.erase(std::remove_if(graph.nodes.begin(), graph.nodes.end(),
                                     [](const GraphNode& n) {
                                         return n.kind == NodeKind::SemanticType;
                                     }),
                      graph.nodes.end());
    graph.edges.erase(std::remove_if(graph.edges.begin(), graph.edges.end(),
                                     [](const GraphEdge& e) {
                                         return e.kind == EdgeKind::IsA ||
                                                e.kind == EdgeKind::Semantic;
                                     }),
                      graph.edges.end());
    return graph;
}

}  // namespace trajgraph::kb
