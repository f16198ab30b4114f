#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajgraph/extraction.hpp"
#include "trajgraph/knowledge.hpp"
#include "trajgraph/visit_graph.hpp"

namespace trajgraph::feat {

// Deterministic unit-norm vector for a token string. Same (token, seed) gives
// the same vector on every platform.
std::vector<double> hash_token_vector(std::string_view token, std::size_t dim,
                                      std::uint64_t seed);

// Per-note contextual embedding source: token index -> vector. Either loaded
// from a precomputed file or synthesized from token strings by seeded hashing.
struct EmbeddingStore {
    enum class Provenance { Precomputed, HashFallback };

    Provenance provenance = Provenance::HashFallback;
    std::size_t dim = 0;  // d_tok
    std::unordered_map<int, std::vector<double>> token_vectors;
    // Drives label embeddings for semantic-type nodes; kept for precomputed
    // stores too so feature assembly stays a pure function of its inputs.
    std::uint64_t hash_seed = 0;

    const std::vector<double>* find_token(int index) const {
        auto it = token_vectors.find(index);
        return it == token_vectors.end() ? nullptr : &it->second;
    }
};

// Builds a fallback store covering every token index referenced by a mention
// span. Token strings come from the mentions' surface words.
EmbeddingStore hash_fallback_store(const ingest::NoteExtraction& note, std::size_t dim,
                                   std::uint64_t seed);

// Binary store file: magic, d_tok, n_tokens header + row-major f32 matrix.
EmbeddingStore load_embedding_store(const std::string& path, std::uint64_t hash_seed = 0);
void save_embedding_store(const EmbeddingStore& store, const std::string& path);

// Frozen span-width vectors, bucketed by width upper bounds.
struct WidthEmbeddingTable {
    std::vector<int> buckets;                       // strictly increasing upper bounds
    std::vector<std::vector<double>> vectors;       // one per bucket

    std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().size(); }
    std::size_t bucket_for(int width) const;

    static WidthEmbeddingTable seeded(std::vector<int> buckets, std::size_t dim,
                                      std::uint64_t seed);
};

inline constexpr int kDefaultWidthBuckets[] = {1, 2, 3, 4, 8, 16, 32};
inline constexpr std::size_t kDefaultTokenDim = 64;
inline constexpr std::size_t kDefaultWidthDim = 16;

// [first-token vec ; last-token vec ; width-bucket vec], length 2*d_tok + d_w.
// Throws InputError when a span token is missing from the store.
std::vector<double> mention_embedding(const ingest::EntityMention& mention,
                                      const EmbeddingStore& store,
                                      const WidthEmbeddingTable& widths);

struct FeatureSwitches {
    bool use_text = true;
    bool use_kg = true;
};

struct NodeFeatures {
    std::string node_id;
    std::vector<double> vector;  // d_node = 2*d_tok + d_w + d_kg, zero-padded slots
};

// Layout of the assembled vector; the kg slot starts at text_width_dim().
struct FeatureLayout {
    std::size_t token_dim = 0;
    std::size_t width_dim = 0;
    std::size_t kg_dim = 0;

    std::size_t text_width_dim() const { return 2 * token_dim + width_dim; }
    std::size_t node_dim() const { return text_width_dim() + kg_dim; }
};

NodeFeatures node_feature(const ingest::GraphNode& node, const ingest::NoteExtraction& note,
                          const EmbeddingStore& store, const WidthEmbeddingTable& widths,
                          const kb::KnowledgeBase& kb, const FeatureSwitches& switches);

// Features for every node of a visit graph, in node order.
std::vector<NodeFeatures> graph_features(const ingest::VisitGraph& graph,
                                         const ingest::NoteExtraction& note,
                                         const EmbeddingStore& store,
                                         const WidthEmbeddingTable& widths,
                                         const kb::KnowledgeBase& kb,
                                         const FeatureSwitches& switches);

}  // namespace trajgraph::feat
