#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajgraph/cohort.hpp"
#include "trajgraph/features.hpp"
#include "trajgraph/ingest.hpp"
#include "trajgraph/knowledge.hpp"
#include "trajgraph/metrics.hpp"
#include "trajgraph/model.hpp"
#include "trajgraph/train.hpp"

namespace trajgraph::pipeline {

struct FeatureConfig {
    std::size_t token_dim = feat::kDefaultTokenDim;
    std::size_t width_dim = feat::kDefaultWidthDim;
    std::vector<int> width_buckets{std::begin(feat::kDefaultWidthBuckets),
                                   std::end(feat::kDefaultWidthBuckets)};
    std::uint64_t seed = 0;
    bool allow_hash_fallback = true;
    std::string embedding_dir;  // looked up as <dir>/<note_id>.emb when set
};

// Everything loaded once and shared read-only across patients.
struct Corpus {
    std::map<std::string, ingest::NoteExtraction> notes;  // by note_id
    kb::KnowledgeBase knowledge_base;
    kb::Lexicon lexicon;
};

Corpus load_corpus(const std::string& notes_dir, const std::string& kb_path,
                   const std::string& lexicon_path);

// Augmented visit graph for one note (link -> cluster -> reduce -> augment).
ingest::VisitGraph note_graph(const ingest::NoteExtraction& note, const Corpus& corpus,
                              int visit_index,
                              std::vector<ingest::RejectedEdge>* rejected = nullptr);

feat::EmbeddingStore note_store(const ingest::NoteExtraction& note,
                                const FeatureConfig& config);

// Builds the model-ready sample for one patient: orders the record's notes,
// keeps the last max_notes, builds graphs, applies switches, and assembles
// features. Visits whose filtered graph has no nodes are skipped with a
// warning; returns nullopt when nothing survives.
std::optional<model::TrajectorySample> build_sample(
    const cohort::PatientRecord& record, const Corpus& corpus, const FeatureConfig& features,
    const model::TrainConfig& train_config, std::vector<std::string>* warnings = nullptr);

std::vector<model::TrajectorySample> build_samples(
    const std::vector<cohort::PatientRecord>& records, const Corpus& corpus,
    const FeatureConfig& features, const model::TrainConfig& train_config,
    std::vector<std::string>* warnings = nullptr);

// Days from the last usable visit to the effective diagnosis date.
std::optional<int> horizon_days(const cohort::PatientRecord& record);

// Scored predictions with demographics attached as group attributes.
eval::PredictionSet predict_records(const std::vector<cohort::PatientRecord>& records,
                                    const Corpus& corpus, const FeatureConfig& features,
                                    const model::TrainConfig& train_config,
                                    const model::Ensemble& ensemble, double threshold = 0.5);

eval::PredictionSet predictions_from_scores(const std::vector<cohort::PatientRecord>& records,
                                            const std::vector<double>& scores,
                                            double threshold = 0.5);

}  // namespace trajgraph::pipeline
