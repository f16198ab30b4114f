#include "trajgraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "trajgraph/common.hpp"
#include "trajgraph/features.hpp"

namespace trajgraph::synth {

using cohort::CohortLabel;
using cohort::PatientRecord;
using cohort::VisitRef;
using ingest::EntityClass;
using ingest::EntityMention;
using ingest::NoteExtraction;
using ingest::TemporalRelation;
using ingest::TemporalRelationCandidate;

void SynthConfig::validate() const {
    if (!seed_set) throw ConfigError("synthetic generation requires an explicit seed");
    if (n_patients < 1) throw ConfigError("n_patients must be >= 1");
    if (min_visits < 1 || max_visits < min_visits)
        throw ConfigError("visit range must satisfy 1 <= min <= max");
    if (!(p_label_given_order >= 0.0 && p_label_given_order <= 1.0))
        throw ConfigError("p_label_given_order must be in [0,1]");
    if (!(order_prob > 0.0 && order_prob < 1.0))
        throw ConfigError("order_prob must be in (0,1)");
    if (min_noise_relations < 0 || max_noise_relations < min_noise_relations)
        throw ConfigError("noise relation range must satisfy 0 <= min <= max");
    if (kg_dim < 1) throw ConfigError("kg_dim must be >= 1");
    if (event_a.empty() || event_b.empty() || bridge_event.empty())
        throw ConfigError("motif event surfaces must be non-empty");
}

namespace {

struct VocabEntry {
    const char* surface;
    EntityClass entity_class;
    const char* cui;  // nullptr = not in the lexicon
};

// Filler vocabulary; roughly half resolves through the lexicon.
const VocabEntry kFillerVocab[] = {
    {"hypertension", EntityClass::Problem, "C3000101"},
    {"metformin", EntityClass::Treatment, "C3000102"},
    {"lisinopril", EntityClass::Treatment, "C3000103"},
    {"hemoglobin a1c", EntityClass::Test, "C3000104"},
    {"obesity", EntityClass::Problem, "C3000105"},
    {"fatigue", EntityClass::Problem, "C3000106"},
    {"polyuria", EntityClass::Problem, "C3000107"},
    {"blood pressure", EntityClass::Test, "C3000108"},
    {"lipid panel", EntityClass::Test, "C3000109"},
    {"endocrinology", EntityClass::ClinicalDepartment, "C3000110"},
    {"atorvastatin", EntityClass::Treatment, "C3000111"},
    {"neuropathy", EntityClass::Problem, "C3000112"},
    {"dizziness", EntityClass::Problem, nullptr},
    {"follow up", EntityClass::ClinicalOccurrence, nullptr},
    {"admission", EntityClass::ClinicalOccurrence, nullptr},
    {"reports", EntityClass::Evidential, nullptr},
    {"denies", EntityClass::Evidential, nullptr},
    {"family history", EntityClass::Evidential, nullptr},
    {"twice daily", EntityClass::Frequency, nullptr},
    {"two weeks", EntityClass::Duration, nullptr},
};

const char* kNoteTypes[] = {"Progress Notes", "Endocrinology Note", "Discharge Summary",
                            "Nutrition Note"};

const char* kMotifCuiA = "C3000001";
const char* kMotifCuiB = "C3000002";
const char* kMotifCuiBridge = "C3000003";
const char* kMotifCuiBridge2 = "C3000004";
const char* kBridge2Surface = "hemoglobin panel";

std::string pad_id(const char* prefix, int value, int width) {
    std::string digits = std::to_string(value);
    std::string out(prefix);
    for (int i = static_cast<int>(digits.size()); i < width; ++i) out.push_back('0');
    return out + digits;
}

// exact count of successes: round(p * n), clipped to [0, n]
long calibrated_count(double p, std::size_t n) {
    long c = std::lround(p * static_cast<double>(n));
    return std::clamp(c, 0L, static_cast<long>(n));
}

}  // namespace

kb::KnowledgeBase toy_knowledge_base(std::size_t kg_dim, std::uint64_t seed) {
    kb::KnowledgeBase base;
    base.type_labels = {
        {"T033", "Finding"},
        {"T047", "Disease or Syndrome"},
        {"T059", "Laboratory Procedure"},
        {"T060", "Diagnostic Procedure"},
        {"T061", "Therapeutic Procedure"},
        {"T073", "Clinical Department"},
        {"T079", "Temporal Concept"},
        {"T121", "Pharmacologic Substance"},
        {"T184", "Sign or Symptom"},
    };

    auto add = [&](const std::string& cui, const std::string& name,
                   std::vector<std::string> types) {
        base.concepts[cui] = {name, std::move(types)};
    };
    add(kMotifCuiA, "corticosteroid", {"T121"});
    add(kMotifCuiB, "hyperglycemia finding", {"T033"});
    add(kMotifCuiBridge, "glucose measurement", {"T059"});
    add(kMotifCuiBridge2, "hemoglobin measurement", {"T059"});
    add("C3000101", "hypertensive disease", {"T047"});
    add("C3000102", "metformin", {"T121"});
    add("C3000103", "lisinopril", {"T121"});
    add("C3000104", "hemoglobin a1c measurement", {"T059"});
    add("C3000105", "obesity", {"T047"});
    add("C3000106", "fatigue", {"T184"});
    add("C3000107", "polyuria", {"T184", "T033"});
    add("C3000108", "blood pressure measurement", {"T060"});
    add("C3000109", "lipid panel", {"T059"});
    add("C3000110", "endocrinology service", {"T073"});
    add("C3000111", "atorvastatin", {"T121"});
    add("C3000112", "peripheral neuropathy", {"T047"});
    // padding concepts so the table looks like a realistic excerpt
    for (int i = 0; i < 34; ++i) {
        const char* type_pool[] = {"T047", "T121", "T033", "T059", "T184"};
        add(pad_id("C39", 100 + i, 5), "concept " + std::to_string(100 + i),
            {type_pool[i % 5]});
    }

    base.semantic_relations = {
        {"T121", "treats", "T047"},
        {"T121", "affects", "T033"},
        {"T059", "measures", "T033"},
        {"T033", "associated_with", "T047"},
        {"T184", "manifestation_of", "T047"},
        {"T060", "diagnoses", "T047"},
    };

    base.vector_dim = kg_dim;
    for (const auto& [cui, _] : base.concepts)
        base.concept_vectors[cui] = feat::hash_token_vector("kg:" + cui, kg_dim, seed);
    for (const auto& [tid, _] : base.type_labels)
        base.concept_vectors[tid] = feat::hash_token_vector("kg:" + tid, kg_dim, seed);
    base.validate();
    return base;
}

kb::Lexicon toy_lexicon(const SynthConfig& config) {
    kb::Lexicon lex;
    lex[lowercase(config.event_a)] = kMotifCuiA;
    lex[lowercase(config.event_b)] = kMotifCuiB;
    lex[lowercase(config.bridge_event)] = kMotifCuiBridge;
    lex[lowercase(kBridge2Surface)] = kMotifCuiBridge2;
    for (const auto& entry : kFillerVocab)
        if (entry.cui) lex[lowercase(entry.surface)] = entry.cui;
    return lex;
}

namespace {

struct PatientPlan {
    int index;
    bool order_a_first;
    int label;
};

// Calibrated assignment of order bits and labels: counts match the requested
// probabilities exactly, membership is a seeded shuffle.
std::vector<PatientPlan> plan_patients(const SynthConfig& config) {
    std::size_t n = static_cast<std::size_t>(config.n_patients);
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    Rng order_rng = Rng::derive(config.seed, 0x0add0001ULL);
    order_rng.shuffle(order);

    std::vector<PatientPlan> plans(n);
    long n_first = calibrated_count(config.order_prob, n);
    std::vector<std::size_t> first_group, second_group;
    for (std::size_t pos = 0; pos < n; ++pos) {
        std::size_t i = static_cast<std::size_t>(order[pos]);
        plans[i].index = static_cast<int>(i);
        plans[i].order_a_first = static_cast<long>(pos) < n_first;
        (plans[i].order_a_first ? first_group : second_group).push_back(i);
    }

    Rng label_rng = Rng::derive(config.seed, 0x0add0002ULL);
    auto assign_labels = [&](std::vector<std::size_t>& group, double p_pos) {
        label_rng.shuffle(group);
        long n_pos = calibrated_count(p_pos, group.size());
        for (std::size_t pos = 0; pos < group.size(); ++pos)
            plans[group[pos]].label = static_cast<long>(pos) < n_pos ? 1 : 0;
    };
    assign_labels(first_group, config.p_label_given_order);
    assign_labels(second_group, 1.0 - config.p_label_given_order);
    return plans;
}

std::string format_date_variant(const Date& d, int variant) {
    using namespace std::chrono;
    year_month_day ymd{d.raw()};
    int y = static_cast<int>(ymd.year());
    unsigned m = static_cast<unsigned>(ymd.month());
    unsigned day = static_cast<unsigned>(ymd.day());
    static const char* month_names[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                        "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    char buf[32];
    switch (variant % 3) {
        case 0:
            return d.to_iso();
        case 1:
            std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", m, day, y);
            return buf;
        default:
            std::snprintf(buf, sizeof buf, "%s %u, %d", month_names[m - 1], day, y);
            return buf;
    }
}

NoteExtraction make_note(const SynthConfig& config, const PatientPlan& plan,
                         const std::string& patient_id, int visit, const Date& visit_date,
                         Rng& rng) {
    NoteExtraction note;
    note.note_id = patient_id + "_v" + std::to_string(visit);
    note.visit_date = visit_date;
    note.note_type = kNoteTypes[rng.next_below(std::size(kNoteTypes))];

    int cursor = 0;
    int next_mention = 0;
    auto add_mention = [&](const std::string& text, EntityClass cls) {
        EntityMention m;
        m.mention_id = "m" + std::to_string(next_mention++);
        int words = std::max<int>(1, static_cast<int>(split_words(text).size()));
        m.start_token = cursor;
        m.end_token = cursor + words - 1;
        cursor += words + static_cast<int>(rng.next_below(3));  // gap tokens
        m.text = text;
        m.entity_class = cls;
        note.mentions.push_back(m);
        return m.mention_id;
    };

    std::string id_a = add_mention(config.event_a, EntityClass::Treatment);
    std::string id_b = add_mention(config.event_b, EntityClass::Problem);
    std::string id_bridge = add_mention(config.bridge_event, EntityClass::Test);
    std::string id_bridge2 = add_mention(kBridge2Surface, EntityClass::Test);

    int n_fillers = rng.uniform_int(2, 4);
    for (int f = 0; f < n_fillers; ++f) {
        const VocabEntry& v = kFillerVocab[rng.next_below(std::size(kFillerVocab))];
        add_mention(v.surface, v.entity_class);
    }

    // one anchored date plus occasionally a second mention of the same date in
    // a different surface form (they must merge into one timex node)
    int date_variant = static_cast<int>(rng.next_below(3));
    std::string id_date = add_mention(format_date_variant(visit_date, date_variant),
                                      EntityClass::Date);
    note.dct_mention = id_date;
    if (rng.bernoulli(0.35))
        add_mention(format_date_variant(visit_date, date_variant + 1), EntityClass::Date);
    if (rng.bernoulli(0.25))
        add_mention(std::to_string(rng.uniform_int(2, 9)) + " days ago", EntityClass::Date);

    auto add_relation = [&](const std::string& src, const std::string& tgt,
                            TemporalRelation rel, double conf) {
        note.relations.push_back({src, tgt, rel, conf});
    };

    // motif at top confidence; half the time expressed through the After form
    bool as_after = rng.bernoulli(0.5);
    if (plan.order_a_first) {
        if (as_after) add_relation(id_b, id_a, TemporalRelation::After, 0.99);
        else add_relation(id_a, id_b, TemporalRelation::Before, 0.99);
    } else {
        if (as_after) add_relation(id_a, id_b, TemporalRelation::After, 0.99);
        else add_relation(id_b, id_a, TemporalRelation::Before, 0.99);
    }
    // bridge scaffold: the bridge-to-b legs are inconsistent when the motif
    // is reversed, so the reduced structure encodes the order
    add_relation(id_a, id_bridge, TemporalRelation::Before, 0.95);
    add_relation(id_bridge, id_b, TemporalRelation::Before, 0.94);
    add_relation(id_a, id_bridge2, TemporalRelation::Before, 0.93);
    add_relation(id_bridge2, id_b, TemporalRelation::Before, 0.92);
    // date anchor
    add_relation(id_a, id_date, TemporalRelation::Overlap, 0.90);

    // noise stays off the motif and scaffold mentions so the planted structure
    // reduces identically in every note; fillers and dates carry the clutter
    std::size_t first_filler = 4;
    int n_noise = rng.uniform_int(config.min_noise_relations, config.max_noise_relations);
    for (int k = 0; k < n_noise; ++k) {
        std::size_t span = note.mentions.size() - first_filler;
        std::size_t i = first_filler + rng.next_below(span);
        std::size_t j = first_filler + rng.next_below(span);
        if (i == j) continue;
        TemporalRelation rel;
        switch (rng.next_below(3)) {
            case 0: rel = TemporalRelation::Before; break;
            case 1: rel = TemporalRelation::After; break;
            default: rel = TemporalRelation::Overlap; break;
        }
        add_relation(note.mentions[i].mention_id, note.mentions[j].mention_id, rel,
                     rng.uniform(0.30, 0.89));
    }

    note.validate();
    return note;
}

}  // namespace

SynthOutput generate(const SynthConfig& config) {
    config.validate();

    SynthOutput out;
    out.knowledge_base = toy_knowledge_base(config.kg_dim, config.seed);
    out.lexicon = toy_lexicon(config);

    std::vector<PatientPlan> plans = plan_patients(config);

    for (const PatientPlan& plan : plans) {
        std::string patient_id = pad_id("p", plan.index, 5);
        Rng demo_rng = Rng::derive(config.seed, 0xde000000ULL + 2ULL * plan.index);
        Rng note_rng = Rng::derive(config.seed, 0xde000000ULL + 2ULL * plan.index + 1ULL);

        PatientRecord record;
        record.patient_id = patient_id;
        record.label = plan.label == 1 ? CohortLabel::T2D : CohortLabel::NoD;

        // demographics with a class-conditional shift so matching has work to do
        double shift = config.demographic_shift;
        record.demographics.age = 52.0 + 10.0 * demo_rng.normal() +
                                  (plan.label == 1 ? 10.0 * shift : 0.0);
        double p_male = 0.5 + (plan.label == 1 ? shift / 4.0 : -shift / 4.0) / 2.0;
        record.demographics.gender = demo_rng.bernoulli(p_male) ? "M" : "F";
        double u = demo_rng.uniform();
        double black_w = plan.label == 1 ? 0.45 + shift / 4.0 : 0.45 - shift / 4.0;
        if (u < black_w) record.demographics.race = "B";
        else if (u < black_w + 0.35) record.demographics.race = "W";
        else record.demographics.race = "A";
        double p_hispanic = plan.label == 1 ? 0.20 + shift / 8.0 : 0.20 - shift / 8.0;
        record.demographics.ethnicity = demo_rng.bernoulli(p_hispanic) ? "H" : "N";

        int n_visits = note_rng.uniform_int(config.min_visits, config.max_visits);
        Date visit_date = Date(2012, 1, 1).plus_days(note_rng.uniform_int(0, 2000));
        for (int v = 0; v < n_visits; ++v) {
            if (v > 0) visit_date = visit_date.plus_days(note_rng.uniform_int(21, 90));
            NoteExtraction note =
                make_note(config, plan, patient_id, v, visit_date, note_rng);
            VisitRef ref;
            ref.date = visit_date;
            ref.note_id = note.note_id;
            ref.word_count = note_rng.uniform_int(120, 400);
            ref.note_type = note.note_type;
            ref.author = "Physician";
            record.visits.push_back(ref);
            out.notes.push_back(std::move(note));
        }

        if (record.label == CohortLabel::T2D) {
            int gap = note_rng.uniform_int(14, 600);
            record.diagnosis_date = visit_date.plus_days(gap);
            if (note_rng.bernoulli(0.3)) {
                int back = note_rng.uniform_int(0, std::min(10, gap - 4));
                record.adjusted_diagnosis_date = record.diagnosis_date->plus_days(-back);
            }
        }

        record.validate();
        out.gold_labels[patient_id] = plan.label;
        out.order_bits[patient_id] = plan.order_a_first;
        out.manifest.push_back(std::move(record));
    }
    return out;
}

void write_synth_output(const SynthOutput& output, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "notes");
    for (const auto& note : output.notes)
        ingest::save_note_file(note, (fs::path(dir) / "notes" / (note.note_id + ".json")).string());
    cohort::save_manifest(output.manifest, (fs::path(dir) / "manifest.jsonl").string());
    kb::save_kb_file(output.knowledge_base, (fs::path(dir) / "kb.json").string());
    kb::save_lexicon_tsv(output.lexicon, (fs::path(dir) / "lexicon.tsv").string());

    std::ofstream gold((fs::path(dir) / "gold.csv").string());
    if (!gold) throw InputError("cannot write gold labels in " + dir);
    gold << "patient_id,label,event_a_first\n";
    for (const auto& [pid, label] : output.gold_labels)
        gold << pid << "," << label << "," << (output.order_bits.at(pid) ? 1 : 0) << "\n";
}

}  // namespace trajgraph::synth
