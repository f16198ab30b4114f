#include "trajgraph/model.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "trajgraph/common.hpp"

namespace trajgraph::model {

using ingest::EdgeKind;
using ingest::NodeKind;
using ingest::VisitGraph;
using nn::Tensor;

namespace {

Tensor init_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = rng.normal() * scale;
    return Tensor::from_matrix(rows, cols, std::move(v), /*requires_grad=*/true);
}

Tensor init_vector(std::size_t n, double fill) {
    return Tensor::from_vector(std::vector<double>(n, fill), /*requires_grad=*/true);
}

GruCellParams init_gru(std::size_t hidden, std::size_t input, Rng& rng) {
    double s_in = 1.0 / std::sqrt(static_cast<double>(input));
    double s_h = 1.0 / std::sqrt(static_cast<double>(hidden));
    GruCellParams cell;
    cell.w_reset = init_matrix(hidden, input, rng, s_in);
    cell.u_reset = init_matrix(hidden, hidden, rng, s_h);
    cell.b_reset = init_vector(hidden, 0.0);
    cell.w_update = init_matrix(hidden, input, rng, s_in);
    cell.u_update = init_matrix(hidden, hidden, rng, s_h);
    cell.b_update = init_vector(hidden, 0.0);
    cell.w_cand = init_matrix(hidden, input, rng, s_in);
    cell.u_cand = init_matrix(hidden, hidden, rng, s_h);
    cell.b_cand = init_vector(hidden, 0.0);
    return cell;
}

void collect_gru(std::vector<NamedParam>& out, const std::string& prefix,
                 const GruCellParams& cell) {
    out.push_back({prefix + ".w_reset", cell.w_reset});
    out.push_back({prefix + ".u_reset", cell.u_reset});
    out.push_back({prefix + ".b_reset", cell.b_reset});
    out.push_back({prefix + ".w_update", cell.w_update});
    out.push_back({prefix + ".u_update", cell.u_update});
    out.push_back({prefix + ".b_update", cell.b_update});
    out.push_back({prefix + ".w_cand", cell.w_cand});
    out.push_back({prefix + ".u_cand", cell.u_cand});
    out.push_back({prefix + ".b_cand", cell.b_cand});
}

}  // namespace

TrajectoryEncoderParams TrajectoryEncoderParams::init(const ModelDims& dims,
                                                      std::uint64_t seed) {
    if (dims.layers < 1) throw ConfigError("model needs at least one graph layer");
    if (dims.node_dim == 0 || dims.model_dim == 0 || dims.hidden_dim == 0)
        throw ConfigError("model dimensions must be positive");

    Rng rng = Rng::derive(seed, 0x6d6f64656cULL);
    TrajectoryEncoderParams p;
    p.dims = dims;
    if (dims.node_dim != dims.model_dim)
        p.input_proj = init_matrix(dims.model_dim, dims.node_dim, rng,
                                   1.0 / std::sqrt(static_cast<double>(dims.node_dim)));
    double s = 1.0 / std::sqrt(static_cast<double>(dims.model_dim));
    for (std::size_t k = 0; k < dims.layers; ++k) {
        SageLayerParams layer;
        layer.w_self = init_matrix(dims.model_dim, dims.model_dim, rng, s);
        layer.w_neigh = init_matrix(dims.model_dim, dims.model_dim, rng, s);
        layer.ln_gain = init_vector(dims.model_dim, 1.0);
        layer.ln_bias = init_vector(dims.model_dim, 0.0);
        p.sage.push_back(std::move(layer));
    }
    p.forward_cell = init_gru(dims.hidden_dim, dims.model_dim, rng);
    p.backward_cell = init_gru(dims.hidden_dim, dims.model_dim, rng);
    {
        std::vector<double> w(2 * dims.hidden_dim);
        double sh = 1.0 / std::sqrt(static_cast<double>(2 * dims.hidden_dim));
        for (auto& x : w) x = rng.normal() * sh;
        p.head_weight = Tensor::from_vector(std::move(w), true);
        p.head_bias = Tensor::from_vector({0.0}, true);
    }
    return p;
}

std::vector<NamedParam> TrajectoryEncoderParams::all_params() {
    std::vector<NamedParam> out;
    if (input_proj) out.push_back({"input_proj", *input_proj});
    for (std::size_t k = 0; k < sage.size(); ++k) {
        std::string prefix = "sage" + std::to_string(k);
        out.push_back({prefix + ".w_self", sage[k].w_self});
        out.push_back({prefix + ".w_neigh", sage[k].w_neigh});
        out.push_back({prefix + ".ln_gain", sage[k].ln_gain});
        out.push_back({prefix + ".ln_bias", sage[k].ln_bias});
    }
    collect_gru(out, "fwd", forward_cell);
    collect_gru(out, "bwd", backward_cell);
    out.push_back({"head.w", head_weight});
    out.push_back({"head.b", head_bias});
    return out;
}

std::vector<NamedParam> TrajectoryEncoderParams::all_params() const {
    return const_cast<TrajectoryEncoderParams*>(this)->all_params();
}

TrajectoryEncoderParams TrajectoryEncoderParams::clone() const {
    TrajectoryEncoderParams copy = *this;
    auto dup = [](const Tensor& t) {
        Tensor c;
        if (t.shape().size() == 2)
            c = Tensor::from_matrix(t.rows(), t.cols(), t.values(), true);
        else
            c = Tensor::from_vector(t.values(), true);
        return c;
    };
    if (copy.input_proj) copy.input_proj = dup(*copy.input_proj);
    for (auto& layer : copy.sage) {
        layer.w_self = dup(layer.w_self);
        layer.w_neigh = dup(layer.w_neigh);
        layer.ln_gain = dup(layer.ln_gain);
        layer.ln_bias = dup(layer.ln_bias);
    }
    auto dup_gru = [&](GruCellParams& cell) {
        cell.w_reset = dup(cell.w_reset);
        cell.u_reset = dup(cell.u_reset);
        cell.b_reset = dup(cell.b_reset);
        cell.w_update = dup(cell.w_update);
        cell.u_update = dup(cell.u_update);
        cell.b_update = dup(cell.b_update);
        cell.w_cand = dup(cell.w_cand);
        cell.u_cand = dup(cell.u_cand);
        cell.b_cand = dup(cell.b_cand);
    };
    dup_gru(copy.forward_cell);
    dup_gru(copy.backward_cell);
    copy.head_weight = dup(copy.head_weight);
    copy.head_bias = dup(copy.head_bias);
    return copy;
}

Adjacency build_adjacency(const VisitGraph& graph, const GraphSwitches& switches) {
    Adjacency adj;
    std::unordered_map<std::string, int> position;  // node_id -> kept index
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& n = graph.nodes[i];
        if (n.kind == NodeKind::SemanticType && !switches.use_kg_subgraph) continue;
        position.emplace(n.node_id, static_cast<int>(adj.kept_nodes.size()));
        adj.kept_nodes.push_back(i);
    }
    adj.neighbors.assign(adj.kept_nodes.size(), {});

    std::vector<std::set<int>> seen(adj.kept_nodes.size());
    auto connect = [&](const std::string& a, const std::string& b) {
        auto ia = position.find(a);
        auto ib = position.find(b);
        if (ia == position.end() || ib == position.end()) return;
        if (ia->second == ib->second) return;
        if (seen[static_cast<std::size_t>(ia->second)].insert(ib->second).second)
            adj.neighbors[static_cast<std::size_t>(ia->second)].push_back(ib->second);
        if (seen[static_cast<std::size_t>(ib->second)].insert(ia->second).second)
            adj.neighbors[static_cast<std::size_t>(ib->second)].push_back(ia->second);
    };

    for (const auto& e : graph.edges) {
        bool temporal = e.kind == EdgeKind::Before || e.kind == EdgeKind::Overlap;
        if (temporal && !switches.use_temporal_edges) continue;
        if (!temporal && !switches.use_kg_subgraph) continue;
        connect(e.source, e.target);
    }
    return adj;
}

Tensor sage_layer(const Tensor& h, const std::vector<std::vector<int>>& neighbors,
                  const SageLayerParams& params) {
    Tensor self_term = nn::linear(h, params.w_self);
    Tensor agg = nn::neighbor_mean(h, neighbors);
    Tensor neigh_term = nn::linear(agg, params.w_neigh);
    Tensor normed =
        nn::layer_norm_rows(nn::add(self_term, neigh_term), params.ln_gain, params.ln_bias);
    return nn::add(normed, h);
}

Tensor pool_graph(const Tensor& node_matrix) {
    if (node_matrix.shape().size() != 2 || node_matrix.rows() == 0)
        throw InputError("cannot pool an empty visit graph");
    return nn::mean_rows(node_matrix);
}

Tensor gru_step(const Tensor& input, const Tensor& state, const GruCellParams& cell) {
    Tensor r = nn::sigmoid(nn::add(nn::add(nn::matvec(cell.w_reset, input),
                                           nn::matvec(cell.u_reset, state)),
                                   cell.b_reset));
    Tensor z = nn::sigmoid(nn::add(nn::add(nn::matvec(cell.w_update, input),
                                           nn::matvec(cell.u_update, state)),
                                   cell.b_update));
    Tensor candidate = nn::tanh_op(nn::add(
        nn::add(nn::matvec(cell.w_cand, input), nn::mul(r, nn::matvec(cell.u_cand, state))),
        cell.b_cand));
    // h' = (1 - z) * candidate + z * h
    return nn::add(nn::mul(nn::affine(z, -1.0, 1.0), candidate), nn::mul(z, state));
}

Tensor encode_trajectory(const std::vector<Tensor>& visit_vectors,
                         const TrajectoryEncoderParams& params) {
    if (visit_vectors.empty()) throw InputError("trajectory has no visits");
    std::size_t hidden = params.dims.hidden_dim;
    Tensor fwd = Tensor::zeros({hidden});
    for (const auto& g : visit_vectors) fwd = gru_step(g, fwd, params.forward_cell);
    Tensor bwd = Tensor::zeros({hidden});
    for (auto it = visit_vectors.rbegin(); it != visit_vectors.rend(); ++it)
        bwd = gru_step(*it, bwd, params.backward_cell);
    return nn::concat(fwd, bwd);
}

Tensor predict_probability(const Tensor& trajectory, const TrajectoryEncoderParams& params) {
    Tensor logit = nn::add(nn::dot(params.head_weight, trajectory), params.head_bias);
    return nn::sigmoid(logit);
}

Tensor forward_sample(const TrajectorySample& sample, const TrajectoryEncoderParams& params) {
    std::vector<Tensor> visit_vectors;
    visit_vectors.reserve(sample.visits.size());
    for (const auto& visit : sample.visits) {
        if (visit.features.empty())
            throw InputError("patient " + sample.patient_id + ": empty visit graph");
        std::size_t n = visit.features.size();
        std::size_t d = visit.features.front().size();
        std::vector<double> flat;
        flat.reserve(n * d);
        for (const auto& row : visit.features) {
            if (row.size() != d)
                throw InputError("patient " + sample.patient_id + ": ragged feature matrix");
            flat.insert(flat.end(), row.begin(), row.end());
        }
        Tensor h = Tensor::from_matrix(n, d, std::move(flat));
        if (params.input_proj) h = nn::linear(h, *params.input_proj);
        else if (d != params.dims.model_dim)
            throw ConfigError("feature width " + std::to_string(d) +
                              " does not match model width " +
                              std::to_string(params.dims.model_dim));
        for (const auto& layer : params.sage) h = sage_layer(h, visit.neighbors, layer);
        visit_vectors.push_back(pool_graph(h));
    }
    Tensor z = encode_trajectory(visit_vectors, params);
    return predict_probability(z, params);
}

}  // namespace trajgraph::model
