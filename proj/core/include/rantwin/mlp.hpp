#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rantwin/anomaly.hpp"
#include "rantwin/fault.hpp"

namespace rantwin::mlp {

inline constexpr int kInputDim = static_cast<int>(anomaly::kNumFeatures);
inline constexpr int kOutputDim = kNumClasses;

// Dense layer, weights row-major with shape out x in.
struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  double& w(int row, int col) { return weights[static_cast<std::size_t>(row) * in + col]; }
  double w(int row, int col) const { return weights[static_cast<std::size_t>(row) * in + col]; }
  friend bool operator==(const Layer&, const Layer&) = default;
};

// Fully connected classifier: ReLU hidden layers, softmax output.
struct MlpModel {
  std::vector<int> dims;  // [8, hidden..., 4]
  std::vector<Layer> layers;

  std::size_t parameter_count() const;
  // Throws FormatError on inconsistent shapes or non-finite parameters.
  void validate() const;
  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

// Gradients share the model's layout.
using Gradients = MlpModel;

// A model with every parameter zero and the given dims.
MlpModel zeros_like(std::span<const int> dims);

// He-scaled Gaussian weights (std = sqrt(2 / fan_in)), zero biases.
MlpModel init_model(std::span<const int> hidden_dims, std::uint64_t seed);

struct ForwardResult {
  std::array<double, kOutputDim> logits{};
  std::array<double, kOutputDim> probs{};
};

ForwardResult forward(const MlpModel& model, std::span<const double> x);

// Max-subtracted softmax.
std::array<double, kOutputDim> softmax(const std::array<double, kOutputDim>& logits);

// Lowest index wins ties.
AnomalyClass argmax(const std::array<double, kOutputDim>& probs);

AnomalyClass predict(const MlpModel& model, std::span<const double> x);

struct Example {
  anomaly::FeatureVector x{};
  int label = 0;
};

struct LossAndGrads {
  double loss = 0.0;
  Gradients grads;
};

// Mean cross-entropy over the batch and its gradient by backpropagation.
LossAndGrads loss_and_grads(const MlpModel& model, std::span<const Example> batch);

// Mean cross-entropy only.
double mean_loss(const MlpModel& model, std::span<const Example> batch);
double accuracy(const MlpModel& model, std::span<const Example> data);

struct TrainConfig {
  std::vector<int> hidden = {16, 16};
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 11;

  void validate() const;
};

struct TrainReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;           // full training-set loss after each epoch
  std::vector<double> epoch_test_accuracy;  // empty test set -> 0
  std::string model_hash;
};

struct TrainResult {
  MlpModel model;
  TrainReport report;
};

// Mini-batch Adam with a seeded shuffle per epoch. Throws TrainingError on a
// non-finite loss or when the final loss does not improve on the initial one.
TrainResult train(MlpModel model, std::span<const Example> train_set, std::span<const Example> test_set,
                  const TrainConfig& config);

std::string train_report_csv(const TrainReport& report);

// Text format: magic line, dims line, then per layer its weight rows and one
// bias line. Doubles use shortest round-trip formatting.
std::string serialize(const MlpModel& model);
MlpModel deserialize(std::string_view text);
std::string model_hash(const MlpModel& model);

void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace rantwin::mlp
