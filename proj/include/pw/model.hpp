#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pw/dataset.hpp"
#include "pw/geometry.hpp"
#include "pw/nn.hpp"
#include "pw/vec3.hpp"

namespace pw {

struct ModelConfig {
    int hidden_dim = 64;
    int propagation_steps = 3;
    double connection_radius = 0.05;  // meters
    int mlp_depth = 2;
    int history_frames = 1;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// Full world state in the particle space: hand and object particle sets.
struct ParticleState {
    PointSet hand;
    PointSet object;
};

// Node/edge tensors for one radius graph over hand+object particles. Node
// features are group one-hot plus the action channel; absolute positions are
// excluded so translation equivariance is architectural. Edges carry relative
// displacement and length, scaled by the connection radius. Edges are sorted
// by (receiver, sender spatial key) so neighbor sums accumulate in an order
// independent of particle numbering.
struct GraphInput {
    int hand_count = 0;
    int object_count = 0;
    std::vector<int> receiver;
    std::vector<int> sender;
    Tensor node_feat;  // n x 5
    Tensor edge_feat;  // e x 14
};

inline constexpr int kNodeFeatureDim = 5;
inline constexpr int kEdgeFeatureDim = 2 * kNodeFeatureDim + 4;

GraphInput build_graph_input(const ModelConfig& config, const ParticleState& state,
                             const DisplacementField& action);

// Weight tensors of the five learned functions.
struct ModelParams {
    Mlp node_encoder;     // 5 -> H
    Mlp edge_encoder;     // 14 -> H
    Mlp edge_propagator;  // 3H -> H
    Mlp node_propagator;  // 3H -> H
    Mlp decoder;          // H -> 3, final layer zero-initialized

    // Stable (name, tensor) enumeration used by the optimizer, checkpoint
    // format, and gradient checks.
    std::vector<std::pair<std::string, Tensor*>> named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
    std::size_t parameter_count() const;
};

ModelParams init_model(const ModelConfig& config, std::uint64_t seed);
ModelParams make_model_grads(const ModelParams& params);

// Forward intermediates sufficient for one reverse pass.
struct GradientTape {
    GraphInput graph;
    MlpCache node_enc_cache, edge_enc_cache;
    Tensor node_encoding, edge_encoding;
    std::vector<Tensor> h_before;  // h^{l-1} per propagation step
    std::vector<MlpCache> edge_prop_caches, node_prop_caches;
    std::vector<Tensor> aggregates;
    MlpCache decoder_cache;
    Tensor predicted_delta;  // object_count x 3, meters
};

// One-step prediction of the object particles. Hand particles are not
// predicted; their next positions are given by the action.
PointSet predict(const ModelParams& params, const ModelConfig& config, const ParticleState& state,
                 const DisplacementField& action);

// As predict, recording the tape for a subsequent backward pass.
PointSet predict_with_tape(const ModelParams& params, const ModelConfig& config,
                           const ParticleState& state, const DisplacementField& action,
                           GradientTape& tape);

// Backpropagates d(loss)/d(predicted object positions) into parameter grads.
void backward(const ModelParams& params, const ModelConfig& config, const GradientTape& tape,
              const std::vector<Vec3>& d_prediction, ModelParams& grads);

enum class LossKind { Mse, Chamfer, Emd };
std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

double loss_value(const PointSet& prediction, const PointSet& target, LossKind kind);
// Also fills the (sub)gradient with respect to the prediction.
double loss_with_gradient(const PointSet& prediction, const PointSet& target, LossKind kind,
                          std::vector<Vec3>& d_prediction);

// Mean batch loss and its exact parameter gradient.
double gradients(const ModelParams& params, const ModelConfig& config, const TransitionBatch& batch,
                 LossKind kind, ModelParams& grads);

struct TrainSettings {
    int steps = 2000;
    AdamSettings adam;
    LossKind loss = LossKind::Mse;
    bool augment_rotation = true;   // random yaw rotation per sample
    bool augment_full_so3 = false;  // optional full 3D rotation augmentation
    int epoch_steps = 100;          // logging granularity
    std::uint64_t seed = 0;
    double divergence_limit = 1e6;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;  // NaN when no validation set was given
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochLog> log;
};

// Single-threaded, deterministic supervised training over a mixture stream.
TrainResult train_model(const ModelConfig& config, MixtureStream& stream,
                        const TrainSettings& settings,
                        const std::vector<Transition>* validation = nullptr);

// Iterated one-step prediction; returns horizon+1 object states. Hand
// particles advance by the given displacement fields.
std::vector<PointSet> rollout(const ModelParams& params, const ModelConfig& config,
                              const ParticleState& initial,
                              const std::vector<DisplacementField>& actions);

double eval_one_step_mse(const ModelParams& params, const ModelConfig& config,
                         const std::vector<Transition>& transitions);
// The trivial predictor that returns the current object state.
double copy_last_mse(const std::vector<Transition>& transitions);

// Applies R about the origin to every particle set in the transition.
Transition rotate_transition(const Transition& t, const Mat3& rot);

struct CheckpointMeta {
    ModelConfig config;
    std::uint64_t training_seed = 0;
    std::vector<std::string> dataset_fingerprints;
    std::string config_hash;
};

// Header JSON line + length-prefixed little-endian float32 blobs, one per
// tensor in named_tensors() order.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta);
struct Checkpoint {
    ModelParams params;
    CheckpointMeta meta;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pw
