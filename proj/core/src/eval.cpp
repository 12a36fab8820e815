#include "rantwin/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "rantwin/errors.hpp"
#include "rantwin/rng.hpp"

namespace rantwin::eval {

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (const auto& row : counts) {
    for (long long v : row) t += v;
  }
  return t;
}

long long ConfusionMatrix::trace() const {
  long long t = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
  return t;
}

double ConfusionMatrix::precision(AnomalyClass c) const {
  const auto k = static_cast<std::size_t>(code(c));
  long long col = 0;
  for (const auto& row : counts) col += row[k];
  return col == 0 ? 0.0 : static_cast<double>(counts[k][k]) / static_cast<double>(col);
}

double ConfusionMatrix::recall(AnomalyClass c) const {
  const auto k = static_cast<std::size_t>(code(c));
  long long row = 0;
  for (long long v : counts[k]) row += v;
  return row == 0 ? 0.0 : static_cast<double>(counts[k][k]) / static_cast<double>(row);
}

namespace {

void check_pairs(std::span<const AnomalyClass> predictions, std::span<const AnomalyClass> labels) {
  if (predictions.size() != labels.size()) throw DomainError("predictions and labels differ in length");
  if (labels.empty()) throw DomainError("no predictions to evaluate");
}

}  // namespace

double accuracy(std::span<const AnomalyClass> predictions, std::span<const AnomalyClass> labels) {
  check_pairs(predictions, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

ConfusionMatrix confusion(std::span<const AnomalyClass> predictions, std::span<const AnomalyClass> labels) {
  check_pairs(predictions, labels);
  ConfusionMatrix m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++m.counts[static_cast<std::size_t>(code(labels[i]))][static_cast<std::size_t>(code(predictions[i]))];
  }
  return m;
}

std::string confusion_to_csv(const ConfusionMatrix& m) {
  std::string out = "true\\predicted";
  for (AnomalyClass c : kAllClasses) out += "," + std::string(class_name(c));
  out += '\n';
  for (AnomalyClass t : kAllClasses) {
    out += class_name(t);
    for (long long v : m.counts[static_cast<std::size_t>(code(t))]) out += "," + std::to_string(v);
    out += '\n';
  }
  return out;
}

void TsneConfig::validate(std::size_t n_points) const {
  if (n_points < 4) throw ConfigError("t-SNE needs at least 4 points", "points");
  if (!(perplexity > 1.0)) throw ConfigError("must be > 1", "perplexity");
  if (!(perplexity < (static_cast<double>(n_points) - 1.0) / 3.0)) {
    throw ConfigError("must be < (n_points - 1) / 3 = " + std::to_string((static_cast<double>(n_points) - 1.0) / 3.0),
                      "perplexity");
  }
  if (iterations < 1) throw ConfigError("must be >= 1", "iterations");
  if (!(learning_rate > 0.0)) throw ConfigError("must be > 0", "learning_rate");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("must be in [0, 1)", "momentum");
  if (!(final_momentum >= 0.0 && final_momentum < 1.0)) throw ConfigError("must be in [0, 1)", "final_momentum");
  if (!(early_exaggeration >= 1.0)) throw ConfigError("must be >= 1", "early_exaggeration");
  if (exaggeration_iterations < 0) throw ConfigError("must be >= 0", "exaggeration_iterations");
  if (momentum_switch_iteration < 0) throw ConfigError("must be >= 0", "momentum_switch_iteration");
}

namespace {

std::vector<double> squared_distances(const PointSet& pts) {
  const std::size_t n = pts.n;
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < pts.d; ++k) {
        const double diff = pts.at(i, k) - pts.at(j, k);
        s += diff * diff;
      }
      d[i * n + j] = s;
      d[j * n + i] = s;
    }
  }
  return d;
}

// Fills row i of the conditional distribution for precision beta and
// returns its Shannon entropy in nats.
double conditional_row(std::span<const double> dist, std::size_t i, double beta, std::span<double> row) {
  double d_min = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < dist.size(); ++j) {
    if (j != i) d_min = std::min(d_min, dist[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    row[j] = j == i ? 0.0 : std::exp(-beta * (dist[j] - d_min));
    sum += row[j];
  }
  double entropy = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    row[j] /= sum;
    if (row[j] > 0.0) entropy -= row[j] * std::log(row[j]);
  }
  return entropy;
}

}  // namespace

JointProbabilities joint_probabilities(const PointSet& points, double perplexity) {
  const std::size_t n = points.n;
  if (n < 2) throw DomainError("need at least 2 points");
  if (points.values.size() != n * points.d) throw DomainError("point set shape mismatch");
  const std::vector<double> dist = squared_distances(points);
  const double target = std::log(perplexity);
  constexpr double kTolerance = 1e-5;
  constexpr int kMaxSteps = 50;

  JointProbabilities out;
  out.n = n;
  std::vector<double> cond(n * n, 0.0);
  out.point_perplexity.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> di(dist.data() + i * n, n);
    const std::span<double> row(cond.data() + i * n, n);
    // Start from the scale of the row so tightly packed points converge.
    double mean_d = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean_d += di[j];
    mean_d /= static_cast<double>(n - 1);
    double beta = mean_d > 0.0 ? 1.0 / mean_d : 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double h = conditional_row(di, i, beta, row);
    for (int step = 0; step < kMaxSteps && std::abs(h - target) > kTolerance; ++step) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      h = conditional_row(di, i, beta, row);
    }
    out.point_perplexity[i] = std::exp(h);
  }

  out.p.assign(n * n, 0.0);
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
  }
  return out;
}

namespace {

// Student-t numerators (1 + |yi - yj|^2)^-1 and their sum over i != j.
double student_t(std::span<const std::array<double, 2>> y, std::vector<double>& num) {
  const std::size_t n = y.size();
  num.assign(n * n, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[i][0] - y[j][0];
      const double dy = y[i][1] - y[j][1];
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num[i * n + j] = v;
      num[j * n + i] = v;
      sum += 2.0 * v;
    }
  }
  return sum;
}

constexpr double kMinProb = 1e-12;

}  // namespace

double kl_divergence(const JointProbabilities& p, std::span<const std::array<double, 2>> embedding) {
  if (embedding.size() != p.n) throw DomainError("embedding size does not match P");
  std::vector<double> num;
  const double sum = student_t(embedding, num);
  double kl = 0.0;
  for (std::size_t k = 0; k < p.p.size(); ++k) {
    const double pk = p.p[k];
    if (pk <= 0.0) continue;
    const double q = std::max(num[k] / sum, kMinProb);
    kl += pk * std::log(pk / q);
  }
  return std::max(kl, 0.0);
}

Embedding2D tsne(const PointSet& points, const TsneConfig& config) {
  config.validate(points.n);
  const std::size_t n = points.n;
  const JointProbabilities joint = joint_probabilities(points, config.perplexity);

  Embedding2D out;
  Rng rng(config.seed);
  std::vector<std::array<double, 2>> y(n);
  for (auto& p : y) p = {rng.normal(0.0, 1e-4), rng.normal(0.0, 1e-4)};
  out.initial_kl = kl_divergence(joint, y);

  std::vector<std::array<double, 2>> velocity(n, {0.0, 0.0});
  std::vector<std::array<double, 2>> gains(n, {1.0, 1.0});
  std::vector<double> num;
  std::vector<std::array<double, 2>> grad(n);

  for (int it = 0; it < config.iterations; ++it) {
    const double exaggeration = it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double momentum = it < config.momentum_switch_iteration ? config.momentum : config.final_momentum;
    const double sum = student_t(y, num);

    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0;
      double gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double q = std::max(num[i * n + j] / sum, kMinProb);
        const double coeff = (exaggeration * joint.p[i * n + j] - q) * num[i * n + j];
        gx += coeff * (y[i][0] - y[j][0]);
        gy += coeff * (y[i][1] - y[j][1]);
      }
      grad[i] = {4.0 * gx, 4.0 * gy};
    }

    std::array<double, 2> mean{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < 2; ++k) {
        double& g = gains[i][k];
        g = (grad[i][k] > 0.0) != (velocity[i][k] > 0.0) ? g + 0.2 : g * 0.8;
        g = std::max(g, 0.01);
        velocity[i][k] = momentum * velocity[i][k] - config.learning_rate * g * grad[i][k];
        y[i][k] += velocity[i][k];
        mean[k] += y[i][k];
      }
    }
    for (auto& p : y) {
      for (std::size_t k = 0; k < 2; ++k) {
        p[k] -= mean[k] / static_cast<double>(n);
        if (!std::isfinite(p[k])) throw NumericError("t-SNE diverged at iteration " + std::to_string(it));
      }
    }
  }

  out.final_kl = kl_divergence(joint, y);
  out.points = std::move(y);
  return out;
}

double silhouette(std::span<const std::array<double, 2>> embedding, std::span<const int> labels) {
  if (embedding.size() != labels.size()) throw DomainError("silhouette: size mismatch");
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw DomainError("silhouette needs at least 2 distinct labels");

  const std::size_t n = embedding.size();
  double total = 0.0;
  std::map<int, double> sum_to;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;
    for (auto& [l, s] : sum_to) s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum_to[labels[j]] += std::hypot(embedding[i][0] - embedding[j][0], embedding[i][1] - embedding[j][1]);
    }
    const double a = sum_to[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, s] : sum_to) {
      if (l != labels[i]) b = std::min(b, s / static_cast<double>(sizes[l]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

}  // namespace rantwin::eval
