#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rantwin/fault.hpp"

namespace rantwin::eval {

// rows = true class, columns = predicted class
struct ConfusionMatrix {
  std::array<std::array<long long, kNumClasses>, kNumClasses> counts{};

  long long total() const;
  long long trace() const;
  double precision(AnomalyClass c) const;  // 0 when the column is empty
  double recall(AnomalyClass c) const;     // 0 when the row is empty
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

double accuracy(std::span<const AnomalyClass> predictions, std::span<const AnomalyClass> labels);
ConfusionMatrix confusion(std::span<const AnomalyClass> predictions, std::span<const AnomalyClass> labels);
std::string confusion_to_csv(const ConfusionMatrix& m);

// Row-major n x d point set.
struct PointSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t k) const { return values[i * d + k]; }
};

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iteration = 250;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  std::uint64_t seed = 3;

  // Throws ConfigError; the perplexity bound depends on n.
  void validate(std::size_t n_points) const;
};

struct JointProbabilities {
  std::size_t n = 0;
  std::vector<double> p;                  // n x n, symmetric, sums to 1
  std::vector<double> point_perplexity;   // achieved per-row perplexity
};

// Per-point Gaussian bandwidths by bisection on the conditional entropy
// (tolerance 1e-5 nats, at most 50 steps), then P = (P_j|i + P_i|j) / 2n.
JointProbabilities joint_probabilities(const PointSet& points, double perplexity);

struct Embedding2D {
  std::vector<std::array<double, 2>> points;
  double initial_kl = 0.0;
  double final_kl = 0.0;
};

// Exact O(n^2) t-SNE with momentum, adaptive gains and early exaggeration.
Embedding2D tsne(const PointSet& points, const TsneConfig& config);

// KL(P || Q) for the Student-t affinities of `embedding`.
double kl_divergence(const JointProbabilities& p, std::span<const std::array<double, 2>> embedding);

// Mean silhouette with Euclidean distance. Singleton clusters contribute 0,
// as does any point with a = b = 0.
double silhouette(std::span<const std::array<double, 2>> embedding, std::span<const int> labels);

}  // namespace rantwin::eval
