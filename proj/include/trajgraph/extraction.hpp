#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trajgraph/date.hpp"

namespace trajgraph::ingest {

enum class EntityClass {
    Problem,
    Test,
    Treatment,
    ClinicalDepartment,
    ClinicalOccurrence,
    Evidential,
    Date,
    Time,
    Duration,
    Frequency,
};

// Date/Time/Duration/Frequency are time expressions, the rest clinical events.
bool is_time_expression(EntityClass c);

std::string entity_class_name(EntityClass c);
std::optional<EntityClass> entity_class_from_name(std::string_view name);

enum class TemporalRelation { Before, After, Overlap };

std::string relation_name(TemporalRelation r);
std::optional<TemporalRelation> relation_from_name(std::string_view name);

struct EntityMention {
    std::string mention_id;
    int start_token = 0;
    int end_token = 0;  // inclusive
    std::string text;
    EntityClass entity_class = EntityClass::Problem;

    int width() const { return end_token - start_token + 1; }
};

struct TemporalRelationCandidate {
    std::string source;  // mention_id
    std::string target;  // mention_id
    TemporalRelation relation = TemporalRelation::Before;
    double confidence = 0.0;
};

// One extractor output file: the mentions and pairwise relation candidates of
// a single clinical note.
struct NoteExtraction {
    std::string note_id;
    std::optional<Date> visit_date;
    std::string note_type;
    std::vector<EntityMention> mentions;
    std::vector<TemporalRelationCandidate> relations;
    std::optional<std::string> dct_mention;

    const EntityMention* find_mention(const std::string& mention_id) const;

    // Throws InputError on dangling relation endpoints, bad spans, or
    // confidences outside [0,1].
    void validate() const;
};

nlohmann::json note_to_json(const NoteExtraction& note);
NoteExtraction note_from_json(const nlohmann::json& j, const std::string& origin);

NoteExtraction load_note_file(const std::string& path);
void save_note_file(const NoteExtraction& note, const std::string& path);

}  // namespace trajgraph::ingest
