#include "trajgraph/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "trajgraph/common.hpp"
#include "trajgraph/metrics.hpp"

namespace trajgraph::model {

using nlohmann::json;
using nn::Tensor;

void TrainConfig::validate() const {
    if (folds < 2) throw ConfigError("training needs at least 2 folds");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!graph_switches.use_temporal_edges && !graph_switches.use_kg_subgraph)
        throw ConfigError(
            "at least one of the temporal and knowledge subgraphs must be enabled");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    if (class_weight && !(*class_weight > 0.0))
        throw ConfigError("class weight must be positive");
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"learning_rate", c.learning_rate},
                {"epochs", c.epochs},
                {"folds", c.folds},
                {"seed", c.seed},
                {"class_weight", c.class_weight ? json(*c.class_weight) : json(nullptr)},
                {"max_notes", c.max_notes},
                {"use_temporal_edges", c.graph_switches.use_temporal_edges},
                {"use_kg_subgraph", c.graph_switches.use_kg_subgraph},
                {"use_text", c.use_text},
                {"use_kg", c.use_kg},
                {"weight_decay", c.weight_decay},
                {"dropout", c.dropout},
                {"node_dim", c.dims.node_dim},
                {"model_dim", c.dims.model_dim},
                {"hidden_dim", c.dims.hidden_dim},
                {"layers", c.dims.layers}};
}

std::uint64_t train_config_hash(const TrainConfig& config) {
    return fnv1a64(train_config_to_json(config).dump());
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds,
                                  std::uint64_t seed) {
    std::vector<int> assignment(labels.size(), 0);
    for (int cls : {0, 1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) idx.push_back(i);
        Rng rng = Rng::derive(seed, 0xf01d0000ULL + static_cast<std::uint64_t>(cls));
        rng.shuffle(idx);
        for (std::size_t j = 0; j < idx.size(); ++j)
            assignment[idx[j]] = static_cast<int>(j % static_cast<std::size_t>(folds));
    }
    return assignment;
}

namespace {

// Adam with decoupled weight decay.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<NamedParam> params, double lr, double weight_decay)
        : params_(std::move(params)), lr_(lr), weight_decay_(weight_decay) {
        for (const auto& p : params_) {
            m_.emplace_back(p.tensor.size(), 0.0);
            v_.emplace_back(p.tensor.size(), 0.0);
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    void step() {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& values = params_[i].tensor.values();
            const auto& grads = params_[i].tensor.grad();
            for (std::size_t j = 0; j < values.size(); ++j) {
                double g = grads[j];
                m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
                v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
                double mhat = m_[i][j] / bc1;
                double vhat = v_[i][j] / bc2;
                values[j] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * values[j]);
            }
        }
    }

private:
    std::vector<NamedParam> params_;
    double lr_;
    double weight_decay_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng) {
    std::vector<double> mask(n, 1.0);
    if (rate <= 0.0) return mask;
    double keep = 1.0 - rate;
    for (auto& m : mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    return mask;
}

// Forward pass with optional dropout on visit vectors and the trajectory.
Tensor training_forward(const TrajectorySample& sample, const TrajectoryEncoderParams& params,
                        double dropout, Rng* rng) {
    std::vector<Tensor> visit_vectors;
    visit_vectors.reserve(sample.visits.size());
    for (const auto& visit : sample.visits) {
        if (visit.features.empty())
            throw InputError("patient " + sample.patient_id + ": empty visit graph");
        std::size_t n = visit.features.size();
        std::size_t d = visit.features.front().size();
        std::vector<double> flat;
        flat.reserve(n * d);
        for (const auto& row : visit.features) flat.insert(flat.end(), row.begin(), row.end());
        Tensor h = Tensor::from_matrix(n, d, std::move(flat));
        if (params.input_proj) h = nn::linear(h, *params.input_proj);
        for (const auto& layer : params.sage) h = sage_layer(h, visit.neighbors, layer);
        Tensor g = pool_graph(h);
        if (dropout > 0.0 && rng) g = nn::mask_mul(g, dropout_mask(g.size(), dropout, *rng));
        visit_vectors.push_back(g);
    }
    Tensor z = encode_trajectory(visit_vectors, params);
    if (dropout > 0.0 && rng) z = nn::mask_mul(z, dropout_mask(z.size(), dropout, *rng));
    return predict_probability(z, params);
}

}  // namespace

TrainResult train(const std::vector<TrajectorySample>& samples, const TrainConfig& config) {
    config.validate();
    if (samples.empty()) throw InputError("training dataset is empty");

    std::vector<int> labels;
    labels.reserve(samples.size());
    for (const auto& s : samples) labels.push_back(s.label);
    bool has_pos = std::count(labels.begin(), labels.end(), 1) > 0;
    bool has_neg = std::count(labels.begin(), labels.end(), 0) > 0;
    if (!has_pos || !has_neg)
        throw InputError("training dataset must contain both classes (T2D and NoD)");

    ModelDims dims = config.dims;
    if (dims.node_dim == 0) dims.node_dim = samples.front().visits.front().features.front().size();

    TrainResult result;
    result.fold_of_sample = stratified_folds(labels, config.folds, config.seed);
    result.ensemble.dims = dims;
    result.ensemble.config_hash = train_config_hash(config);

    double pos_weight = config.class_weight.value_or(1.0);

    for (int fold = 0; fold < config.folds; ++fold) {
        std::vector<std::size_t> train_idx, val_idx;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (result.fold_of_sample[i] == fold) val_idx.push_back(i);
            else train_idx.push_back(i);
        }

        TrajectoryEncoderParams params = TrajectoryEncoderParams::init(
            dims, config.seed ^ (0x5eedf01dULL + static_cast<std::uint64_t>(fold)));
        AdamOptimizer optimizer(params.all_params(), config.learning_rate, config.weight_decay);

        FoldModel best;
        best.fold_id = fold;
        best.params = params.clone();
        best.best_val_auc = -std::numeric_limits<double>::infinity();
        best.best_epoch = -1;

        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            Rng dropout_rng = Rng::derive(
                config.seed, 0xd20b0000ULL + static_cast<std::uint64_t>(fold) * 100003ULL +
                                 static_cast<std::uint64_t>(epoch));
            optimizer.zero_grad();
            double total_loss = 0.0;
            for (std::size_t i : train_idx) {
                const auto& sample = samples[i];
                Tensor prob = training_forward(sample, params, config.dropout, &dropout_rng);
                double w = sample.label == 1 ? pos_weight : 1.0;
                Tensor loss = nn::bce_loss(prob, sample.label, w);
                total_loss += loss.scalar();
                nn::backward(loss);
            }
            // mean-loss gradients
            double inv_n = 1.0 / static_cast<double>(train_idx.size());
            for (auto& p : params.all_params())
                for (auto& g : p.tensor.grad()) g *= inv_n;
            optimizer.step();

            double train_loss = total_loss * inv_n;
            double val_auc = std::numeric_limits<double>::quiet_NaN();
            {
                std::vector<double> scores;
                std::vector<int> val_labels;
                for (std::size_t i : val_idx) {
                    scores.push_back(predict_sample(samples[i], params));
                    val_labels.push_back(samples[i].label);
                }
                try {
                    val_auc = eval::roc_auc_scores(scores, val_labels);
                } catch (const InputError&) {
                    // single-class validation fold: AUC stays undefined
                }
            }
            result.log.push_back({fold, epoch, train_loss, val_auc});
            if (!std::isnan(val_auc) && val_auc > best.best_val_auc) {
                best.best_val_auc = val_auc;
                best.best_epoch = epoch;
                best.params = params.clone();
            }
        }

        if (best.best_epoch < 0) {
            // epochs == 0 or validation AUC was never defined: keep the last state
            best.params = params.clone();
            best.best_val_auc = std::numeric_limits<double>::quiet_NaN();
        }
        result.ensemble.members.push_back(std::move(best));
    }
    return result;
}

double predict_sample(const TrajectorySample& sample, const TrajectoryEncoderParams& params) {
    return forward_sample(sample, params).scalar();
}

double predict_ensemble(const TrajectorySample& sample, const Ensemble& ensemble) {
    if (ensemble.members.empty()) throw ConfigError("ensemble has no members");
    double sum = 0.0;
    for (const auto& member : ensemble.members) sum += predict_sample(sample, member.params);
    return sum / static_cast<double>(ensemble.members.size());
}

std::vector<double> out_of_fold_scores(const std::vector<TrajectorySample>& samples,
                                       const TrainResult& result) {
    if (samples.size() != result.fold_of_sample.size())
        throw InputError("out_of_fold_scores: sample count does not match training run");
    std::vector<double> scores(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        int fold = result.fold_of_sample[i];
        scores[i] = predict_sample(samples[i], result.ensemble.members.at(
                                                    static_cast<std::size_t>(fold)).params);
    }
    return scores;
}

namespace {
constexpr char kCheckpointMagic[8] = {'T', 'G', 'C', 'K', '0', '0', '0', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
}

void write_tensor(std::ofstream& out, const std::string& name, const Tensor& t) {
    std::uint32_t name_len = static_cast<std::uint32_t>(name.size());
    write_pod(out, name_len);
    out.write(name.data(), name_len);
    std::uint32_t ndims = static_cast<std::uint32_t>(t.shape().size());
    write_pod(out, ndims);
    for (std::size_t d : t.shape()) write_pod(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const Ensemble& ensemble, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint " + path);
    out.write(kCheckpointMagic, 8);
    write_pod(out, ensemble.config_hash);
    write_pod(out, static_cast<std::uint64_t>(ensemble.dims.node_dim));
    write_pod(out, static_cast<std::uint64_t>(ensemble.dims.model_dim));
    write_pod(out, static_cast<std::uint64_t>(ensemble.dims.hidden_dim));
    write_pod(out, static_cast<std::uint64_t>(ensemble.dims.layers));
    write_pod(out, static_cast<std::uint32_t>(ensemble.members.size()));
    for (const auto& member : ensemble.members) {
        write_pod(out, static_cast<std::uint32_t>(member.fold_id));
        write_pod(out, member.best_val_auc);
        write_pod(out, static_cast<std::int32_t>(member.best_epoch));
        auto params = member.params.all_params();
        write_pod(out, static_cast<std::uint32_t>(params.size()));
        for (const auto& p : params) write_tensor(out, p.name, p.tensor);
    }
}

Ensemble load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw InputError(path + ": not a checkpoint file");

    Ensemble ensemble;
    read_pod(in, ensemble.config_hash);
    std::uint64_t node_dim, model_dim, hidden_dim, layers;
    read_pod(in, node_dim);
    read_pod(in, model_dim);
    read_pod(in, hidden_dim);
    read_pod(in, layers);
    ensemble.dims = {node_dim, model_dim, hidden_dim, layers};

    std::uint32_t n_members = 0;
    read_pod(in, n_members);
    for (std::uint32_t m = 0; m < n_members; ++m) {
        FoldModel member;
        std::uint32_t fold_id = 0;
        read_pod(in, fold_id);
        member.fold_id = static_cast<int>(fold_id);
        read_pod(in, member.best_val_auc);
        std::int32_t best_epoch = 0;
        read_pod(in, best_epoch);
        member.best_epoch = best_epoch;
        member.params = TrajectoryEncoderParams::init(ensemble.dims, 0);

        std::map<std::string, Tensor> by_name;
        for (auto& p : member.params.all_params()) by_name.emplace(p.name, p.tensor);

        std::uint32_t n_tensors = 0;
        read_pod(in, n_tensors);
        for (std::uint32_t t = 0; t < n_tensors; ++t) {
            std::uint32_t name_len = 0;
            read_pod(in, name_len);
            std::string name(name_len, '\0');
            in.read(name.data(), name_len);
            std::uint32_t ndims = 0;
            read_pod(in, ndims);
            std::size_t total = 1;
            std::vector<std::size_t> shape;
            for (std::uint32_t d = 0; d < ndims; ++d) {
                std::uint64_t dim = 0;
                read_pod(in, dim);
                shape.push_back(dim);
                total *= dim;
            }
            std::vector<double> values(total);
            in.read(reinterpret_cast<char*>(values.data()),
                    static_cast<std::streamsize>(total * sizeof(double)));
            if (!in) throw InputError(path + ": truncated checkpoint");
            auto it = by_name.find(name);
            if (it == by_name.end())
                throw InputError(path + ": unknown tensor '" + name + "' in checkpoint");
            if (it->second.shape() != shape)
                throw InputError(path + ": tensor '" + name + "' has mismatched shape");
            it->second.values() = std::move(values);
        }
        ensemble.members.push_back(std::move(member));
    }
    return ensemble;
}

void save_train_log(const std::vector<TrainLogEntry>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write training log " + path);
    for (const auto& e : log) {
        json j{{"fold", e.fold}, {"epoch", e.epoch}, {"train_loss", e.train_loss}};
        if (std::isnan(e.val_auc)) j["val_auc"] = nullptr;
        else j["val_auc"] = e.val_auc;
        out << j.dump() << "\n";
    }
}

}  // namespace trajgraph::model
