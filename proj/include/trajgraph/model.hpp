#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trajgraph/tensor.hpp"
#include "trajgraph/visit_graph.hpp"

namespace trajgraph::model {

struct NamedParam {
    std::string name;
    nn::Tensor tensor;
};

struct SageLayerParams {
    nn::Tensor w_self;   // [d, d]
    nn::Tensor w_neigh;  // [d, d]
    nn::Tensor ln_gain;  // [d]
    nn::Tensor ln_bias;  // [d]
};

struct GruCellParams {
    nn::Tensor w_reset, u_reset, b_reset;        // [H,D] [H,H] [H]
    nn::Tensor w_update, u_update, b_update;
    nn::Tensor w_cand, u_cand, b_cand;
};

struct ModelDims {
    std::size_t node_dim = 0;    // incoming feature width
    std::size_t model_dim = 64;  // SAGE width; projection inserted when != node_dim
    std::size_t hidden_dim = 128;
    std::size_t layers = 2;
};

// Every learnable tensor of the trajectory model: optional input projection,
// K residual SAGE layers, forward/backward recurrent cells, sigmoid head.
struct TrajectoryEncoderParams {
    ModelDims dims;
    std::optional<nn::Tensor> input_proj;  // [model_dim, node_dim]
    std::vector<SageLayerParams> sage;
    GruCellParams forward_cell, backward_cell;
    nn::Tensor head_weight;  // [2H]
    nn::Tensor head_bias;    // [1]

    static TrajectoryEncoderParams init(const ModelDims& dims, std::uint64_t seed);

    std::vector<NamedParam> all_params();
    std::vector<NamedParam> all_params() const;

    // Deep copy of parameter values (detached from the tape).
    TrajectoryEncoderParams clone() const;
};

struct GraphSwitches {
    bool use_temporal_edges = true;  // Before/Overlap
    bool use_kg_subgraph = true;     // SemanticType nodes + IsA/Semantic edges
};

// Node subset kept under the switches plus symmetrized, deduplicated
// neighbor lists over the kept edges.
struct Adjacency {
    std::vector<std::size_t> kept_nodes;  // indices into graph.nodes
    std::vector<std::vector<int>> neighbors;
};

Adjacency build_adjacency(const ingest::VisitGraph& graph, const GraphSwitches& switches);

// h'_v = LayerNorm(W1 h_v + W2 * mean_{u in N(v)} h_u) + h_v
nn::Tensor sage_layer(const nn::Tensor& h, const std::vector<std::vector<int>>& neighbors,
                      const SageLayerParams& params);

// Mean of node embeddings; throws InputError on an empty graph.
nn::Tensor pool_graph(const nn::Tensor& node_matrix);

nn::Tensor gru_step(const nn::Tensor& input, const nn::Tensor& state,
                    const GruCellParams& cell);

// Runs the forward cell over the visit vectors and the backward cell over the
// reversed sequence; returns the concatenation of the two final states (2H).
nn::Tensor encode_trajectory(const std::vector<nn::Tensor>& visit_vectors,
                             const TrajectoryEncoderParams& params);

// sigma(w . z + b)
nn::Tensor predict_probability(const nn::Tensor& trajectory, const TrajectoryEncoderParams& params);

// One visit ready for the encoder: features for kept nodes + neighbor lists.
struct VisitInput {
    std::vector<std::vector<double>> features;  // [n_kept][node_dim]
    std::vector<std::vector<int>> neighbors;
};

struct TrajectorySample {
    std::string patient_id;
    int label = 0;
    std::vector<VisitInput> visits;
};

// Full forward pass for one patient.
nn::Tensor forward_sample(const TrajectorySample& sample, const TrajectoryEncoderParams& params);

}  // namespace trajgraph::model
