#include "trajgraph/pipeline.hpp"

#include <algorithm>
#include <filesystem>

#include "trajgraph/common.hpp"

namespace trajgraph::pipeline {

namespace fs = std::filesystem;
using cohort::PatientRecord;
using ingest::NoteExtraction;
using ingest::VisitGraph;

Corpus load_corpus(const std::string& notes_dir, const std::string& kb_path,
                   const std::string& lexicon_path) {
    Corpus corpus;
    if (!fs::is_directory(notes_dir))
        throw InputError("notes directory " + notes_dir + " does not exist");
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(notes_dir))
        if (entry.path().extension() == ".json") paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
        NoteExtraction note = ingest::load_note_file(p.string());
        corpus.notes.emplace(note.note_id, std::move(note));
    }
    corpus.knowledge_base = kb::load_kb_file(kb_path);
    corpus.lexicon = kb::load_lexicon_tsv(lexicon_path);
    return corpus;
}

VisitGraph note_graph(const NoteExtraction& note, const Corpus& corpus, int visit_index,
                      std::vector<ingest::RejectedEdge>* rejected) {
    ingest::ConceptLinks links = kb::link_concepts(note, corpus.knowledge_base, corpus.lexicon);
    VisitGraph graph =
        ingest::build_visit_graph(note, links, visit_index, ingest::DateLocale::US, rejected);
    return kb::augment_graph(std::move(graph), corpus.knowledge_base);
}

feat::EmbeddingStore note_store(const NoteExtraction& note, const FeatureConfig& config) {
    if (!config.embedding_dir.empty()) {
        fs::path p = fs::path(config.embedding_dir) / (note.note_id + ".emb");
        if (fs::exists(p)) return feat::load_embedding_store(p.string(), config.seed);
    }
    if (!config.allow_hash_fallback)
        throw InputError("no precomputed embeddings for note " + note.note_id +
                         " and hash fallback is disabled (--allow-hash-fallback)");
    return feat::hash_fallback_store(note, config.token_dim, config.seed);
}

std::optional<model::TrajectorySample> build_sample(const PatientRecord& record,
                                                    const Corpus& corpus,
                                                    const FeatureConfig& features,
                                                    const model::TrainConfig& train_config,
                                                    std::vector<std::string>* warnings) {
    std::vector<NoteExtraction> notes;
    for (const auto& visit : record.visits) {
        auto it = corpus.notes.find(visit.note_id);
        if (it == corpus.notes.end())
            throw InputError("patient " + record.patient_id + ": note '" + visit.note_id +
                             "' not found in the corpus");
        notes.push_back(it->second);
    }
    if (notes.empty()) return std::nullopt;
    notes = ingest::truncate_visits(ingest::sort_notes_by_visit(std::move(notes)),
                                    train_config.max_notes);

    feat::WidthEmbeddingTable widths = feat::WidthEmbeddingTable::seeded(
        features.width_buckets, features.width_dim, features.seed);
    feat::FeatureSwitches feature_switches{train_config.use_text, train_config.use_kg};

    model::TrajectorySample sample;
    sample.patient_id = record.patient_id;
    sample.label = record.label == cohort::CohortLabel::T2D ? 1 : 0;

    int visit_index = 0;
    for (const auto& note : notes) {
        VisitGraph graph = note_graph(note, corpus, visit_index++);
        model::Adjacency adj = model::build_adjacency(graph, train_config.graph_switches);
        if (adj.kept_nodes.empty()) {
            if (warnings)
                warnings->push_back("patient " + record.patient_id + ": visit '" + note.note_id +
                                    "' has no nodes under the current switches; skipped");
            continue;
        }
        feat::EmbeddingStore store = note_store(note, features);
        model::VisitInput input;
        input.neighbors = adj.neighbors;
        for (std::size_t idx : adj.kept_nodes) {
            feat::NodeFeatures f = feat::node_feature(graph.nodes[idx], note, store, widths,
                                                      corpus.knowledge_base, feature_switches);
            input.features.push_back(std::move(f.vector));
        }
        sample.visits.push_back(std::move(input));
    }
    if (sample.visits.empty()) {
        if (warnings)
            warnings->push_back("patient " + record.patient_id +
                                ": no usable visits after filtering; dropped");
        return std::nullopt;
    }
    return sample;
}

std::vector<model::TrajectorySample> build_samples(const std::vector<PatientRecord>& records,
                                                   const Corpus& corpus,
                                                   const FeatureConfig& features,
                                                   const model::TrainConfig& train_config,
                                                   std::vector<std::string>* warnings) {
    std::vector<model::TrajectorySample> samples;
    samples.reserve(records.size());
    for (const auto& record : records) {
        auto sample = build_sample(record, corpus, features, train_config, warnings);
        if (sample) samples.push_back(std::move(*sample));
    }
    return samples;
}

std::optional<int> horizon_days(const PatientRecord& record) {
    auto effective = record.effective_diagnosis_date();
    if (!effective) return std::nullopt;
    std::optional<Date> last;
    for (const auto& v : record.visits)
        if (v.date && (!last || *v.date > *last)) last = v.date;
    if (!last) return std::nullopt;
    long days = last->days_until(*effective);
    return static_cast<int>(std::max(0L, days));
}

eval::PredictionSet predictions_from_scores(const std::vector<PatientRecord>& records,
                                            const std::vector<double>& scores,
                                            double threshold) {
    if (records.size() != scores.size())
        throw InputError("predictions_from_scores: record/score count mismatch");
    eval::PredictionSet set;
    set.threshold = threshold;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const PatientRecord& r = records[i];
        eval::PredictionEntry e;
        e.patient_id = r.patient_id;
        e.y_true = r.label == cohort::CohortLabel::T2D ? 1 : 0;
        e.score = scores[i];
        e.groups["gender"] = r.demographics.gender;
        e.groups["race"] = r.demographics.race;
        if (r.demographics.ethnicity) e.groups["ethnicity"] = *r.demographics.ethnicity;
        if (e.y_true == 1) e.horizon_days = horizon_days(r);
        set.entries.push_back(std::move(e));
    }
    set.apply_threshold();
    set.validate();
    return set;
}

eval::PredictionSet predict_records(const std::vector<PatientRecord>& records,
                                    const Corpus& corpus, const FeatureConfig& features,
                                    const model::TrainConfig& train_config,
                                    const model::Ensemble& ensemble, double threshold) {
    std::vector<PatientRecord> scored_records;
    std::vector<double> scores;
    for (const auto& record : records) {
        auto sample = build_sample(record, corpus, features, train_config);
        if (!sample) continue;
        scored_records.push_back(record);
        scores.push_back(model::predict_ensemble(*sample, ensemble));
    }
    return predictions_from_scores(scored_records, scores, threshold);
}

}  // namespace trajgraph::pipeline
