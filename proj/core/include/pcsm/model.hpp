#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pcsm/cloud.hpp"
#include "pcsm/tensor.hpp"

namespace pcsm {

// Permutation-invariant classifier: a per-point MLP h (3 -> 32 -> 64 -> F),
// a feature-wise max pool over points, and a head g (F -> 64 -> k logits).
// Immutable after training; concurrent forward/loss calls may share one
// instance.
struct ModelParams {
  Tensor w1, b1;    // 3 -> 32
  Tensor w2, b2;    // 32 -> 64
  Tensor w3, b3;    // 64 -> F
  Tensor wg1, bg1;  // F -> 64
  Tensor wg2, bg2;  // 64 -> k

  int class_count() const { return static_cast<int>(wg2.cols()); }
  int feature_count() const { return static_cast<int>(w3.cols()); }

  // He-initialised weights, zero biases. Deterministic in the seed.
  static ModelParams init(int class_count, std::uint64_t seed);

  // Throws StructuralError unless all layer shapes chain consistently and
  // every weight is finite.
  void validate() const;

  bool operator==(const ModelParams&) const = default;
};

struct Prediction {
  std::vector<double> logits;
  std::vector<double> probabilities;
  int predicted_class = 0;
  // Winning point index per pooled feature dimension (ties to lowest index).
  std::vector<std::size_t> pool_argmax;
};

enum class Optimizer { sgd, momentum };

struct TrainConfig {
  int epochs = 15;
  int batch_size = 16;
  double learning_rate = 0.02;
  Optimizer optimizer = Optimizer::momentum;
  double momentum = 0.9;
  std::uint64_t seed = 1;
};

struct TrainResult {
  ModelParams model;
  std::vector<double> epoch_mean_loss;  // one entry per epoch
  double final_train_accuracy = 0.0;
};

Prediction forward(const ModelParams& model, const Cloud& cloud);

// Cross-entropy of the softmax prediction against the label: -ln p[label].
double loss(const ModelParams& model, const Cloud& cloud, int label);

struct LossGradients {
  double loss_value = 0.0;
  std::vector<Point> input_gradient;  // dL/dx_i, one 3-vector per point
  Prediction prediction;
};

// One forward + one backward pass; gradients w.r.t. the point coordinates.
LossGradients loss_with_input_gradient(const ModelParams& model,
                                       const Cloud& cloud, int label);

// Deterministic minibatch training (fixed shuffling, sequential reduction).
// Throws NumericError naming the epoch if the loss becomes non-finite.
TrainResult train(const Dataset& dataset, const TrainConfig& config);

double accuracy(const ModelParams& model, const Dataset& dataset);

// Checkpoint file: little-endian binary, magic "PCSM", version 1, class and
// feature counts, a layer-shape table, then the raw weight arrays in
// declaration order. Round-trips bitwise.
void save_checkpoint(const ModelParams& model,
                     const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace pcsm
