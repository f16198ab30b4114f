#include "trajgraph/extraction.hpp"

#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "trajgraph/common.hpp"

namespace trajgraph::ingest {

using nlohmann::json;

bool is_time_expression(EntityClass c) {
    switch (c) {
        case EntityClass::Date:
        case EntityClass::Time:
        case EntityClass::Duration:
        case EntityClass::Frequency:
            return true;
        default:
            return false;
    }
}

std::string entity_class_name(EntityClass c) {
    switch (c) {
        case EntityClass::Problem: return "Problem";
        case EntityClass::Test: return "Test";
        case EntityClass::Treatment: return "Treatment";
        case EntityClass::ClinicalDepartment: return "ClinicalDepartment";
        case EntityClass::ClinicalOccurrence: return "ClinicalOccurrence";
        case EntityClass::Evidential: return "Evidential";
        case EntityClass::Date: return "Date";
        case EntityClass::Time: return "Time";
        case EntityClass::Duration: return "Duration";
        case EntityClass::Frequency: return "Frequency";
    }
    return "Problem";
}

std::optional<EntityClass> entity_class_from_name(std::string_view name) {
    static const std::pair<const char*, EntityClass> table[] = {
        {"Problem", EntityClass::Problem},
        {"Test", EntityClass::Test},
        {"Treatment", EntityClass::Treatment},
        {"ClinicalDepartment", EntityClass::ClinicalDepartment},
        {"ClinicalOccurrence", EntityClass::ClinicalOccurrence},
        {"Evidential", EntityClass::Evidential},
        {"Date", EntityClass::Date},
        {"Time", EntityClass::Time},
        {"Duration", EntityClass::Duration},
        {"Frequency", EntityClass::Frequency},
    };
    for (const auto& [n, c] : table)
        if (name == n) return c;
    return std::nullopt;
}

std::string relation_name(TemporalRelation r) {
    switch (r) {
        case TemporalRelation::Before: return "Before";
        case TemporalRelation::After: return "After";
        case TemporalRelation::Overlap: return "Overlap";
    }
    return "Before";
}

std::optional<TemporalRelation> relation_from_name(std::string_view name) {
    if (name == "Before") return TemporalRelation::Before;
    if (name == "After") return TemporalRelation::After;
    if (name == "Overlap") return TemporalRelation::Overlap;
    return std::nullopt;
}

const EntityMention* NoteExtraction::find_mention(const std::string& mention_id) const {
    for (const auto& m : mentions)
        if (m.mention_id == mention_id) return &m;
    return nullptr;
}

void NoteExtraction::validate() const {
    std::unordered_set<std::string> ids;
    for (const auto& m : mentions) {
        if (m.mention_id.empty())
            throw InputError("note " + note_id + ": mention with empty id");
        if (!ids.insert(m.mention_id).second)
            throw InputError("note " + note_id + ": duplicate mention id '" + m.mention_id + "'");
        if (m.start_token > m.end_token)
            throw InputError("note " + note_id + ": mention '" + m.mention_id +
                             "' has start_token > end_token");
        if (m.start_token < 0)
            throw InputError("note " + note_id + ": mention '" + m.mention_id +
                             "' has negative token index");
    }
    for (const auto& r : relations) {
        if (!ids.count(r.source))
            throw InputError("note " + note_id + ": relation references unknown mention '" +
                             r.source + "'");
        if (!ids.count(r.target))
            throw InputError("note " + note_id + ": relation references unknown mention '" +
                             r.target + "'");
        if (r.source == r.target)
            throw InputError("note " + note_id + ": relation with identical endpoints '" +
                             r.source + "'");
        if (!(r.confidence >= 0.0 && r.confidence <= 1.0))
            throw InputError("note " + note_id + ": relation confidence outside [0,1]");
    }
    if (dct_mention && !ids.count(*dct_mention))
        throw InputError("note " + note_id + ": dct references unknown mention '" +
                         *dct_mention + "'");
}

json note_to_json(const NoteExtraction& note) {
    json mentions = json::array();
    for (const auto& m : note.mentions) {
        mentions.push_back({{"id", m.mention_id},
                            {"start", m.start_token},
                            {"end", m.end_token},
                            {"text", m.text},
                            {"class", entity_class_name(m.entity_class)}});
    }
    json relations = json::array();
    for (const auto& r : note.relations) {
        relations.push_back({{"src", r.source},
                             {"tgt", r.target},
                             {"rel", relation_name(r.relation)},
                             {"conf", r.confidence}});
    }
    json j{{"note_id", note.note_id},
           {"visit_date", note.visit_date ? json(note.visit_date->to_iso()) : json(nullptr)},
           {"note_type", note.note_type},
           {"mentions", std::move(mentions)},
           {"relations", std::move(relations)},
           {"dct", note.dct_mention ? json(*note.dct_mention) : json(nullptr)}};
    return j;
}

NoteExtraction note_from_json(const json& j, const std::string& origin) {
    auto fail = [&](const std::string& what) -> InputError {
        return InputError(origin + ": " + what);
    };
    if (!j.is_object()) throw fail("note document is not a JSON object");

    NoteExtraction note;
    note.note_id = j.value("note_id", std::string{});
    if (note.note_id.empty()) throw fail("missing field 'note_id'");
    note.note_type = j.value("note_type", std::string{});

    if (j.contains("visit_date") && !j.at("visit_date").is_null()) {
        auto d = Date::parse_iso(j.at("visit_date").get<std::string>());
        if (!d) throw fail("field 'visit_date' is not an ISO-8601 date");
        note.visit_date = *d;
    }

    for (const auto& jm : j.value("mentions", json::array())) {
        EntityMention m;
        m.mention_id = jm.value("id", std::string{});
        if (m.mention_id.empty()) throw fail("mention missing field 'id'");
        if (!jm.contains("start") || !jm.contains("end"))
            throw fail("mention '" + m.mention_id + "' missing span fields 'start'/'end'");
        m.start_token = jm.at("start").get<int>();
        m.end_token = jm.at("end").get<int>();
        m.text = jm.value("text", std::string{});
        auto cls = entity_class_from_name(jm.value("class", std::string{}));
        if (!cls)
            throw fail("mention '" + m.mention_id + "' has unknown class '" +
                       jm.value("class", std::string{}) + "'");
        m.entity_class = *cls;
        note.mentions.push_back(std::move(m));
    }

    for (const auto& jr : j.value("relations", json::array())) {
        TemporalRelationCandidate r;
        r.source = jr.value("src", std::string{});
        r.target = jr.value("tgt", std::string{});
        auto rel = relation_from_name(jr.value("rel", std::string{}));
        if (!rel) throw fail("relation has unknown kind '" + jr.value("rel", std::string{}) + "'");
        r.relation = *rel;
        if (!jr.contains("conf")) throw fail("relation missing field 'conf'");
        r.confidence = jr.at("conf").get<double>();
        note.relations.push_back(std::move(r));
    }

    if (j.contains("dct") && !j.at("dct").is_null())
        note.dct_mention = j.at("dct").get<std::string>();

    note.validate();
    return note;
}

NoteExtraction load_note_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open note file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw InputError(path + ": invalid JSON (" + e.what() + ")");
    }
    return note_from_json(j, path);
}

void save_note_file(const NoteExtraction& note, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write note file " + path);
    out << note_to_json(note).dump(2) << "\n";
}

}  // namespace trajgraph::ingest
