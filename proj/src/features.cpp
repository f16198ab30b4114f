#include "trajgraph/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "trajgraph/common.hpp"

namespace trajgraph::feat {

using ingest::EntityMention;
using ingest::GraphNode;
using ingest::NodeKind;
using ingest::NoteExtraction;
using ingest::VisitGraph;

std::vector<double> hash_token_vector(std::string_view token, std::size_t dim,
                                      std::uint64_t seed) {
    std::uint64_t state = fnv1a64(token) ^ (seed * 0x9e3779b97f4a7c15ULL);
    Rng rng(state);
    std::vector<double> v(dim);
    double norm_sq = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        norm_sq += x * x;
    }
    double norm = std::sqrt(norm_sq);
    if (norm == 0.0) {  // astronomically unlikely; keep a valid unit vector
        v[0] = 1.0;
        return v;
    }
    for (auto& x : v) x /= norm;
    return v;
}

EmbeddingStore hash_fallback_store(const NoteExtraction& note, std::size_t dim,
                                   std::uint64_t seed) {
    if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
    EmbeddingStore store;
    store.provenance = EmbeddingStore::Provenance::HashFallback;
    store.dim = dim;
    store.hash_seed = seed;
    for (const auto& m : note.mentions) {
        std::vector<std::string> words = split_words(m.text);
        for (int t = m.start_token; t <= m.end_token; ++t) {
            if (store.token_vectors.count(t)) continue;  // first mention wins
            std::size_t offset = static_cast<std::size_t>(t - m.start_token);
            const std::string& token =
                words.empty() ? m.text : words[std::min(offset, words.size() - 1)];
            store.token_vectors.emplace(t, hash_token_vector(token, dim, seed));
        }
    }
    return store;
}

namespace {
constexpr char kEmbMagic[8] = {'T', 'G', 'E', 'M', 'B', '0', '0', '1'};
}

EmbeddingStore load_embedding_store(const std::string& path, std::uint64_t hash_seed) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open embedding store " + path);
    char magic[8];
    std::uint32_t dim = 0, n_tokens = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&n_tokens), sizeof n_tokens);
    if (!in || std::memcmp(magic, kEmbMagic, 8) != 0)
        throw InputError(path + ": not an embedding store file");
    if (dim == 0) throw InputError(path + ": embedding dimension is zero");

    EmbeddingStore store;
    store.provenance = EmbeddingStore::Provenance::Precomputed;
    store.dim = dim;
    store.hash_seed = hash_seed;
    std::vector<float> row(dim);
    for (std::uint32_t i = 0; i < n_tokens; ++i) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(sizeof(float) * dim));
        if (!in) throw InputError(path + ": truncated embedding matrix");
        std::vector<double> v(row.begin(), row.end());
        store.token_vectors.emplace(static_cast<int>(i), std::move(v));
    }
    return store;
}

void save_embedding_store(const EmbeddingStore& store, const std::string& path) {
    int max_index = -1;
    for (const auto& [idx, _] : store.token_vectors) max_index = std::max(max_index, idx);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write embedding store " + path);
    std::uint32_t dim = static_cast<std::uint32_t>(store.dim);
    std::uint32_t n_tokens = static_cast<std::uint32_t>(max_index + 1);
    out.write(kEmbMagic, 8);
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(&n_tokens), sizeof n_tokens);
    std::vector<float> zero(store.dim, 0.0f);
    for (std::uint32_t i = 0; i < n_tokens; ++i) {
        const std::vector<double>* v = store.find_token(static_cast<int>(i));
        if (!v) {
            out.write(reinterpret_cast<const char*>(zero.data()),
                      static_cast<std::streamsize>(sizeof(float) * store.dim));
            continue;
        }
        std::vector<float> row(v->begin(), v->end());
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(sizeof(float) * store.dim));
    }
}

std::size_t WidthEmbeddingTable::bucket_for(int width) const {
    for (std::size_t i = 0; i < buckets.size(); ++i)
        if (width <= buckets[i]) return i;
    return buckets.size() - 1;  // widths above the last bound clamp
}

WidthEmbeddingTable WidthEmbeddingTable::seeded(std::vector<int> buckets, std::size_t dim,
                                                std::uint64_t seed) {
    for (std::size_t i = 1; i < buckets.size(); ++i)
        if (buckets[i] <= buckets[i - 1])
            throw ConfigError("width buckets must be strictly increasing");
    if (buckets.empty()) throw ConfigError("width bucket list is empty");
    WidthEmbeddingTable table;
    table.buckets = std::move(buckets);
    table.vectors.reserve(table.buckets.size());
    for (std::size_t i = 0; i < table.buckets.size(); ++i)
        table.vectors.push_back(
            hash_token_vector("width#" + std::to_string(table.buckets[i]), dim, seed));
    return table;
}

std::vector<double> mention_embedding(const EntityMention& mention, const EmbeddingStore& store,
                                      const WidthEmbeddingTable& widths) {
    const std::vector<double>* first = store.find_token(mention.start_token);
    const std::vector<double>* last = store.find_token(mention.end_token);
    if (!first || !last)
        throw InputError("mention '" + mention.mention_id + "': token vector missing for span [" +
                         std::to_string(mention.start_token) + "," +
                         std::to_string(mention.end_token) + "]");
    const std::vector<double>& w = widths.vectors[widths.bucket_for(mention.width())];
    std::vector<double> out;
    out.reserve(2 * store.dim + w.size());
    out.insert(out.end(), first->begin(), first->end());
    out.insert(out.end(), last->begin(), last->end());
    out.insert(out.end(), w.begin(), w.end());
    return out;
}

NodeFeatures node_feature(const GraphNode& node, const NoteExtraction& note,
                          const EmbeddingStore& store, const WidthEmbeddingTable& widths,
                          const kb::KnowledgeBase& kb, const FeatureSwitches& switches) {
    FeatureLayout layout{store.dim, widths.dim(), kb.vector_dim};
    NodeFeatures out;
    out.node_id = node.node_id;
    out.vector.assign(layout.node_dim(), 0.0);

    if (switches.use_text) {
        if (node.kind == NodeKind::SemanticType) {
            // token-mean of the type label, mirrored into both token slots
            auto label_it = node.concept_id ? kb.type_labels.find(*node.concept_id)
                                            : kb.type_labels.end();
            if (label_it != kb.type_labels.end()) {
                std::vector<std::string> words = split_words(lowercase(label_it->second));
                if (!words.empty()) {
                    std::vector<double> mean(store.dim, 0.0);
                    for (const auto& w : words) {
                        std::vector<double> v = hash_token_vector(w, store.dim, store.hash_seed);
                        for (std::size_t i = 0; i < store.dim; ++i) mean[i] += v[i];
                    }
                    for (auto& x : mean) x /= static_cast<double>(words.size());
                    for (std::size_t i = 0; i < store.dim; ++i) {
                        out.vector[i] = mean[i];
                        out.vector[store.dim + i] = mean[i];
                    }
                }
            }
            // width slot stays zero: no span
        } else {
            std::vector<double> mean(layout.text_width_dim(), 0.0);
            std::size_t count = 0;
            for (const auto& mid : node.mention_ids) {
                const EntityMention* m = note.find_mention(mid);
                if (!m)
                    throw InputError("node '" + node.node_id + "' references unknown mention '" +
                                     mid + "'");
                std::vector<double> e = mention_embedding(*m, store, widths);
                for (std::size_t i = 0; i < e.size(); ++i) mean[i] += e[i];
                ++count;
            }
            if (count == 0)
                throw InputError("node '" + node.node_id + "' has no mentions to embed");
            for (std::size_t i = 0; i < mean.size(); ++i)
                out.vector[i] = mean[i] / static_cast<double>(count);
        }
    }

    if (switches.use_kg && node.concept_id) {
        auto it = kb.concept_vectors.find(*node.concept_id);
        if (it != kb.concept_vectors.end()) {
            for (std::size_t i = 0; i < layout.kg_dim; ++i)
                out.vector[layout.text_width_dim() + i] = it->second[i];
        }
    }
    return out;
}

std::vector<NodeFeatures> graph_features(const VisitGraph& graph, const NoteExtraction& note,
                                         const EmbeddingStore& store,
                                         const WidthEmbeddingTable& widths,
                                         const kb::KnowledgeBase& kb,
                                         const FeatureSwitches& switches) {
    std::vector<NodeFeatures> out;
    out.reserve(graph.nodes.size());
    for (const auto& n : graph.nodes)
        out.push_back(node_feature(n, note, store, widths, kb, switches));
    return out;
}

}  // namespace trajgraph::feat
