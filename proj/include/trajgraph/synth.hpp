#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trajgraph/cohort.hpp"
#include "trajgraph/extraction.hpp"
#include "trajgraph/knowledge.hpp"

namespace trajgraph::synth {

struct SynthConfig {
    int n_patients = 200;
    int min_visits = 2;
    int max_visits = 5;
    std::string event_a = "corticosteroid";
    std::string event_b = "elevated glucose";
    std::string bridge_event = "fasting glucose test";
    double p_label_given_order = 0.9;  // P(T2D | event_a before event_b)
    double order_prob = 0.5;           // fraction of patients with a-before-b
    double demographic_shift = 0.3;    // target pre-match SMD on planted covariates
    int min_noise_relations = 1;
    int max_noise_relations = 4;
    std::size_t kg_dim = 8;
    std::uint64_t seed = 0;
    bool seed_set = false;

    void validate() const;  // probabilities in range, seed mandatory
};

struct SynthOutput {
    std::vector<cohort::PatientRecord> manifest;
    std::vector<ingest::NoteExtraction> notes;
    std::map<std::string, int> gold_labels;       // patient_id -> 0/1
    std::map<std::string, bool> order_bits;       // patient_id -> a-before-b
    kb::KnowledgeBase knowledge_base;
    kb::Lexicon lexicon;
};

// Bundled toy concept table (~50 concepts) with semantic types, permissible
// type relations, and seeded unit concept vectors.
kb::KnowledgeBase toy_knowledge_base(std::size_t kg_dim, std::uint64_t seed);
kb::Lexicon toy_lexicon(const SynthConfig& config);

// Deterministic per seed. Each note plants the motif edge at confidence 0.99
// plus a bridge scaffold whose survival through timegraph reduction depends
// on the motif direction; labels are calibrated so the empirical
// P(T2D | order) matches p_label_given_order exactly. Demographics carry a
// controllable covariate shift between classes.
SynthOutput generate(const SynthConfig& config);

// Writes notes/*.json, manifest.jsonl, gold.csv, kb.json, lexicon.tsv.
void write_synth_output(const SynthOutput& output, const std::string& dir);

}  // namespace trajgraph::synth
