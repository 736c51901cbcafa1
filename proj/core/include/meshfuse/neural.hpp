#pragma once
// Inference engine for the learned fusion path: per-field encoder heads over
// a shared backbone, cross-field attention, anchor attention, fusion gate,
// per-field transforms, drift predictors, and a 3-class decision head, plus
// the multi-term training objective evaluated at inference time.
//
// Weights are immutable after load; forward and loss are pure, so shared
// weights support unrestricted concurrent inference. Tensors are stored as
// little-endian float32 in the container and promoted to double at load.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "meshfuse/field.hpp"
#include "meshfuse/vec.hpp"

namespace meshfuse {

struct NeuralConfig {
    std::size_t d = 64;           // field dimension
    std::size_t sent_dim = 384;   // sentence-embedding input width
    std::size_t backbone_hidden = 256;
    std::size_t backbone_out = 128;
    std::size_t heads = 4;
    std::size_t ffn_hidden = 256;       // cross-field FFN width (4 * d)
    std::size_t gate_hidden1 = 256;
    std::size_t gate_hidden2 = 128;
    std::size_t transform_hidden = 64;  // per-field fusion MLP
    std::size_t drift_hidden = 16;      // per-field drift MLP
    std::size_t head_hidden = 32;       // aggregate-drift and decision MLPs
    double margin = 0.1;                // mood-gate coupling margin
    double lambda_drift = 1.0;
    double lambda_gate = 0.5;
    double lambda_coupling = 0.5;
    std::array<double, 3> class_weights = {1.33, 0.50, 4.23};  // aligned/guarded/rejected

    // Width of the fusion-gate input: 7 incoming + 7 anchor vectors + 2.
    std::size_t gate_input() const { return 14 * d + 2; }

    // Small preset used by hand oracles and the descent check.
    static NeuralConfig tiny();
};

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    std::size_t size() const { return data.size(); }
};

struct TensorSpec {
    std::string name;
    std::vector<std::size_t> shape;
};

// Declaration-ordered tensor list for a config; defines container layout.
std::vector<TensorSpec> model_tensor_specs(const NeuralConfig& config);

class ModelWeights {
public:
    ModelWeights() = default;
    ModelWeights(NeuralConfig config, std::map<std::string, Tensor> tensors);

    const NeuralConfig& config() const { return config_; }
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    const std::map<std::string, Tensor>& tensors() const { return tensors_; }

    std::size_t parameter_count() const;

    // Throws ConfigError naming the first missing/misshapen/non-finite tensor.
    void validate() const;

private:
    NeuralConfig config_;
    std::map<std::string, Tensor> tensors_;
};

// Deterministic scaled-uniform fan-in initialization; bit-identical for a
// given (config, seed) on every platform. Biases 0, layer norms identity.
ModelWeights init_weights(const NeuralConfig& config, std::uint64_t seed);

// Container: <path> is a JSON manifest listing name/shape/offset plus the
// relative filename of one float32 blob.
ModelWeights load_weights(const std::string& manifest_path);
void save_weights(const ModelWeights& weights, const std::string& manifest_path,
                  const std::string& blob_filename);

struct NeuralOutput {
    std::array<double, kFieldCount> gates{};        // each in (0, 1)
    FieldMap<Vec> fused;                            // unit norm
    std::array<double, kFieldCount> field_drift{};  // each in (0, 1)
    double total_drift = 0.0;                       // in (0, 1)
    std::array<double, 3> probs{};                  // 3-simplex
};

// incoming: 7 sentence vectors [sent_dim]; anchors: k entries of 7 field
// vectors [d] each; k >= 1. Throws DimensionError / ConfigError.
NeuralOutput forward(const ModelWeights& weights,
                     const std::vector<Vec>& incoming_field_sentvecs,
                     const std::vector<FieldMap<Vec>>& anchor_field_vecs,
                     double tau_fresh, double confidence);

struct LossBreakdown {
    double total = 0.0;
    double decision_ce = 0.0;
    double drift_mse = 0.0;
    double gate_dir = 0.0;
    double coupling = 0.0;
};

// target_class: 0 aligned, 1 guarded, 2 rejected. Drift MSE covers the 7
// per-field predictions plus the aggregate against the target mean.
LossBreakdown compute_loss(const NeuralOutput& output, int target_class,
                           const std::array<double, kFieldCount>& target_field_drifts,
                           const NeuralConfig& config);

}  // namespace meshfuse
