#include "rantwin/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rantwin/errors.hpp"
#include "rantwin/io.hpp"
#include "rantwin/rng.hpp"

namespace rantwin::mlp {

namespace {

constexpr std::string_view kMagic = "RANTWIN-MLP v1";

template <typename Fn>
void for_each_param(MlpModel& a, const MlpModel& b, Fn&& fn) {
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    for (std::size_t i = 0; i < a.layers[l].weights.size(); ++i) fn(a.layers[l].weights[i], b.layers[l].weights[i]);
    for (std::size_t i = 0; i < a.layers[l].biases.size(); ++i) fn(a.layers[l].biases[i], b.layers[l].biases[i]);
  }
}

// Activations kept for backprop: inputs to each layer and pre-activations.
struct Trace {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
  std::array<double, kOutputDim> logits{};
};

void run(const MlpModel& model, std::span<const double> x, Trace& trace) {
  if (x.size() != static_cast<std::size_t>(kInputDim)) {
    throw DomainError("input must have " + std::to_string(kInputDim) + " features");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw DomainError("non-finite input feature");
  }
  trace.inputs.resize(model.layers.size());
  trace.pre.resize(model.layers.size());
  trace.inputs[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    auto& z = trace.pre[l];
    z.assign(static_cast<std::size_t>(layer.out), 0.0);
    const auto& a = trace.inputs[l];
    for (int r = 0; r < layer.out; ++r) {
      double acc = layer.biases[static_cast<std::size_t>(r)];
      for (int c = 0; c < layer.in; ++c) acc += layer.w(r, c) * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = acc;
    }
    if (l + 1 < model.layers.size()) {
      auto& next = trace.inputs[l + 1];
      next.resize(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) next[i] = z[i] > 0.0 ? z[i] : 0.0;
    }
  }
  std::copy(trace.pre.back().begin(), trace.pre.back().end(), trace.logits.begin());
}

double log_sum_exp(const std::array<double, kOutputDim>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  return m + std::log(s);
}

void check_label(int label) {
  if (label < 0 || label >= kOutputDim) throw DomainError("label code out of range: " + std::to_string(label));
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.biases.size();
  return n;
}

void MlpModel::validate() const {
  if (dims.size() < 2) throw FormatError("dims: need at least input and output sizes");
  if (dims.front() != kInputDim) throw FormatError("dims: input size must be " + std::to_string(kInputDim));
  if (dims.back() != kOutputDim) throw FormatError("dims: output size must be " + std::to_string(kOutputDim));
  for (int d : dims) {
    if (d < 1) throw FormatError("dims: sizes must be >= 1");
  }
  if (layers.size() != dims.size() - 1) throw FormatError("layers: count does not match dims");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    const std::string where = "layer " + std::to_string(l) + ": ";
    if (layer.in != dims[l] || layer.out != dims[l + 1]) throw FormatError(where + "shape does not match dims");
    if (layer.weights.size() != static_cast<std::size_t>(layer.in) * layer.out) throw FormatError(where + "weight count mismatch");
    if (layer.biases.size() != static_cast<std::size_t>(layer.out)) throw FormatError(where + "bias count mismatch");
    for (double v : layer.weights) {
      if (!std::isfinite(v)) throw FormatError(where + "non-finite weight");
    }
    for (double v : layer.biases) {
      if (!std::isfinite(v)) throw FormatError(where + "non-finite bias");
    }
  }
}

MlpModel zeros_like(std::span<const int> dims) {
  MlpModel m;
  m.dims.assign(dims.begin(), dims.end());
  for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
    Layer layer;
    layer.in = m.dims[l];
    layer.out = m.dims[l + 1];
    layer.weights.assign(static_cast<std::size_t>(layer.in) * layer.out, 0.0);
    layer.biases.assign(static_cast<std::size_t>(layer.out), 0.0);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

MlpModel init_model(std::span<const int> hidden_dims, std::uint64_t seed) {
  std::vector<int> dims{kInputDim};
  for (int h : hidden_dims) {
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1", "hidden");
    dims.push_back(h);
  }
  dims.push_back(kOutputDim);
  MlpModel m = zeros_like(dims);
  Rng rng(seed);
  for (Layer& layer : m.layers) {
    const double stddev = std::sqrt(2.0 / layer.in);
    for (double& w : layer.weights) w = rng.normal(0.0, stddev);
  }
  return m;
}

std::array<double, kOutputDim> softmax(const std::array<double, kOutputDim>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::array<double, kOutputDim> p{};
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

AnomalyClass argmax(const std::array<double, kOutputDim>& probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<AnomalyClass>(best);
}

ForwardResult forward(const MlpModel& model, std::span<const double> x) {
  Trace trace;
  run(model, x, trace);
  ForwardResult r;
  r.logits = trace.logits;
  r.probs = softmax(trace.logits);
  return r;
}

AnomalyClass predict(const MlpModel& model, std::span<const double> x) {
  return argmax(forward(model, x).probs);
}

LossAndGrads loss_and_grads(const MlpModel& model, std::span<const Example> batch) {
  if (batch.empty()) throw DomainError("loss_and_grads: empty batch");
  LossAndGrads out;
  out.grads = zeros_like(model.dims);
  Trace trace;
  std::vector<double> delta;
  std::vector<double> prev;
  for (const Example& ex : batch) {
    check_label(ex.label);
    run(model, ex.x, trace);
    out.loss += log_sum_exp(trace.logits) - trace.logits[static_cast<std::size_t>(ex.label)];

    const auto probs = softmax(trace.logits);
    delta.assign(probs.begin(), probs.end());
    delta[static_cast<std::size_t>(ex.label)] -= 1.0;

    for (std::size_t l = model.layers.size(); l-- > 0;) {
      const Layer& layer = model.layers[l];
      Layer& g = out.grads.layers[l];
      const auto& a = trace.inputs[l];
      for (int r = 0; r < layer.out; ++r) {
        const double d = delta[static_cast<std::size_t>(r)];
        g.biases[static_cast<std::size_t>(r)] += d;
        for (int c = 0; c < layer.in; ++c) g.w(r, c) += d * a[static_cast<std::size_t>(c)];
      }
      if (l == 0) break;
      prev.assign(static_cast<std::size_t>(layer.in), 0.0);
      const auto& z_prev = trace.pre[l - 1];
      for (int c = 0; c < layer.in; ++c) {
        if (z_prev[static_cast<std::size_t>(c)] <= 0.0) continue;  // ReLU mask
        double acc = 0.0;
        for (int r = 0; r < layer.out; ++r) acc += layer.w(r, c) * delta[static_cast<std::size_t>(r)];
        prev[static_cast<std::size_t>(c)] = acc;
      }
      delta.swap(prev);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv_n;
  for_each_param(out.grads, out.grads, [inv_n](double& g, const double&) { g *= inv_n; });
  return out;
}

double mean_loss(const MlpModel& model, std::span<const Example> batch) {
  if (batch.empty()) throw DomainError("mean_loss: empty batch");
  Trace trace;
  double total = 0.0;
  for (const Example& ex : batch) {
    check_label(ex.label);
    run(model, ex.x, trace);
    total += log_sum_exp(trace.logits) - trace.logits[static_cast<std::size_t>(ex.label)];
  }
  return total / static_cast<double>(batch.size());
}

double accuracy(const MlpModel& model, std::span<const Example> data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const Example& ex : data) {
    if (code(predict(model, ex.x)) == ex.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("must be >= 1", "epochs");
  if (batch_size < 1) throw ConfigError("must be >= 1", "batch_size");
  if (!(learning_rate > 0.0)) throw ConfigError("must be > 0", "learning_rate");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw ConfigError("must be in (0, 1)", "adam_beta1");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw ConfigError("must be in (0, 1)", "adam_beta2");
  if (!(adam_epsilon > 0.0)) throw ConfigError("must be > 0", "adam_epsilon");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1", "hidden");
  }
}

TrainResult train(MlpModel model, std::span<const Example> train_set, std::span<const Example> test_set,
                  const TrainConfig& config) {
  config.validate();
  model.validate();
  if (train_set.empty()) throw DomainError("train: empty training set");

  TrainResult result;
  result.report.initial_loss = mean_loss(model, train_set);

  MlpModel m1 = zeros_like(model.dims);
  MlpModel m2 = zeros_like(model.dims);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(train_set[order[k]]);
      const LossAndGrads lg = loss_and_grads(model, batch);
      if (!std::isfinite(lg.loss)) throw TrainingError("non-finite batch loss", epoch);

      beta1_t *= config.adam_beta1;
      beta2_t *= config.adam_beta2;
      const double lr_t = config.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto update = [&](std::vector<double>& p, std::vector<double>& m, std::vector<double>& v,
                          const std::vector<double>& g) {
          for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * g[i];
            v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * g[i] * g[i];
            p[i] -= lr_t * m[i] / (std::sqrt(v[i]) + config.adam_epsilon);
          }
        };
        update(model.layers[l].weights, m1.layers[l].weights, m2.layers[l].weights, lg.grads.layers[l].weights);
        update(model.layers[l].biases, m1.layers[l].biases, m2.layers[l].biases, lg.grads.layers[l].biases);
      }
    }
    const double loss = mean_loss(model, train_set);
    if (!std::isfinite(loss)) throw TrainingError("non-finite training loss", epoch);
    result.report.epoch_loss.push_back(loss);
    result.report.epoch_test_accuracy.push_back(accuracy(model, test_set));
  }

  if (!(result.report.epoch_loss.back() < result.report.initial_loss)) {
    throw TrainingError("training loss did not decrease", config.epochs);
  }
  result.report.model_hash = model_hash(model);
  result.model = std::move(model);
  return result;
}

std::string train_report_csv(const TrainReport& report) {
  std::string out = "epoch,train_loss,test_accuracy\n";
  out += "0," + io::format_double(report.initial_loss) + ",\n";
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    out += std::to_string(e + 1) + ',' + io::format_double(report.epoch_loss[e]) + ',' +
           io::format_double(report.epoch_test_accuracy[e]) + '\n';
  }
  return out;
}

std::string serialize(const MlpModel& model) {
  model.validate();
  std::string out(kMagic);
  out += '\n';
  for (std::size_t i = 0; i < model.dims.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(model.dims[i]);
  }
  out += '\n';
  auto write_row = [&out](auto first, auto last) {
    for (auto it = first; it != last; ++it) {
      if (it != first) out += ' ';
      out += io::format_double(*it);
    }
    out += '\n';
  };
  for (const Layer& layer : model.layers) {
    for (int r = 0; r < layer.out; ++r) {
      const auto row = layer.weights.begin() + static_cast<std::ptrdiff_t>(r) * layer.in;
      write_row(row, row + layer.in);
    }
    write_row(layer.biases.begin(), layer.biases.end());
  }
  return out;
}

namespace {

std::vector<std::string> tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace

MlpModel deserialize(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    lines.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  std::size_t next = 0;
  auto take = [&](const std::string& what) -> std::string_view {
    if (next >= lines.size()) throw FormatError("truncated model file: missing " + what);
    return lines[next++];
  };

  std::string_view magic = take("magic");
  if (!magic.empty() && magic.back() == '\r') magic.remove_suffix(1);
  if (magic != kMagic) throw FormatError("magic: expected '" + std::string(kMagic) + "'");

  std::vector<int> dims;
  for (const auto& t : tokens(take("dims"))) {
    try {
      dims.push_back(static_cast<int>(io::parse_int(t)));
    } catch (const FormatError&) {
      throw FormatError("dims: not an integer: '" + t + "'");
    }
  }
  if (dims.size() < 2 || dims.front() != kInputDim || dims.back() != kOutputDim) {
    throw FormatError("dims: expected [" + std::to_string(kInputDim) + ", ..., " + std::to_string(kOutputDim) + "]");
  }
  for (int d : dims) {
    if (d < 1) throw FormatError("dims: sizes must be >= 1");
  }

  MlpModel m = zeros_like(dims);
  auto read_values = [&](std::size_t expected, const std::string& what, double* dst) {
    const auto toks = tokens(take(what));
    if (toks.size() != expected) {
      throw FormatError("dimension mismatch: " + what + " has " + std::to_string(toks.size()) +
                        " values, expected " + std::to_string(expected));
    }
    for (std::size_t i = 0; i < expected; ++i) {
      try {
        dst[i] = io::parse_double(toks[i]);
      } catch (const FormatError&) {
        throw FormatError(what + ": not a number: '" + toks[i] + "'");
      }
    }
  };
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    Layer& layer = m.layers[l];
    const std::string prefix = "layer " + std::to_string(l);
    for (int r = 0; r < layer.out; ++r) {
      read_values(static_cast<std::size_t>(layer.in), prefix + " weight row " + std::to_string(r),
                  layer.weights.data() + static_cast<std::size_t>(r) * layer.in);
    }
    read_values(static_cast<std::size_t>(layer.out), prefix + " biases", layer.biases.data());
  }
  while (next < lines.size()) {
    if (!tokens(lines[next]).empty()) throw FormatError("dimension mismatch: trailing data after last layer");
    ++next;
  }
  m.validate();
  return m;
}

std::string model_hash(const MlpModel& model) { return io::sha256_hex(serialize(model)); }

void save_model(const MlpModel& model, const std::string& path) { io::write_file(path, serialize(model)); }

MlpModel load_model(const std::string& path) { return deserialize(io::read_file(path)); }

}  // namespace rantwin::mlp
