#include "rantwin/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rantwin/errors.hpp"
#include "rantwin/io.hpp"

namespace rantwin {

AnomalyClass class_from_code(long long c) {
  if (c < 0 || c >= kNumClasses) throw DomainError("class code out of range: " + std::to_string(c));
  return static_cast<AnomalyClass>(c);
}

std::string_view class_name(AnomalyClass c) {
  switch (c) {
    case AnomalyClass::Normal: return "Normal";
    case AnomalyClass::RsrpError: return "RsrpError";
    case AnomalyClass::RsrqError: return "RsrqError";
    case AnomalyClass::SinrError: return "SinrError";
  }
  return "?";
}

std::string_view class_key(AnomalyClass c) {
  switch (c) {
    case AnomalyClass::Normal: return "normal";
    case AnomalyClass::RsrpError: return "rsrp_error";
    case AnomalyClass::RsrqError: return "rsrq_error";
    case AnomalyClass::SinrError: return "sinr_error";
  }
  return "?";
}

std::optional<AnomalyClass> class_from_name(std::string_view name) {
  for (AnomalyClass c : kAllClasses) {
    if (name == class_name(c) || name == class_key(c)) return c;
  }
  return std::nullopt;
}

void FaultSpec::validate() const {
  if (cls == AnomalyClass::Normal) throw DomainError("fault class must not be Normal");
  if (code(cls) < 0 || code(cls) >= kNumClasses) throw DomainError("fault class out of range");
  if (!(jitter_db >= 0.0)) throw DomainError("fault jitter must be >= 0");
  if (!std::isfinite(offset_db)) throw DomainError("fault offset must be finite");
  if (duration_ticks < 1) throw DomainError("fault duration must be >= 1 tick");
}

FaultSpec default_fault(AnomalyClass cls) {
  switch (cls) {
    case AnomalyClass::RsrpError: return {cls, -20.0, 3.0, 50};
    case AnomalyClass::RsrqError: return {cls, -10.0, 2.0, 50};
    case AnomalyClass::SinrError: return {cls, -15.0, 3.0, 50};
    case AnomalyClass::Normal: break;
  }
  throw DomainError("no fault defaults for Normal");
}

namespace anomaly {

sim::MeasurementReport inject_fault(const sim::MeasurementReport& report, const FaultSpec& spec, Rng& rng) {
  spec.validate();
  // Drawn only when jitter is non-zero so a zero fault is value-identical.
  const double delta = spec.offset_db + (spec.jitter_db > 0.0 ? rng.uniform(-spec.jitter_db, spec.jitter_db) : 0.0);
  sim::MeasurementReport out = report;
  switch (spec.cls) {
    case AnomalyClass::RsrpError:
      out.channel.rsrp_dbm += delta;
      break;
    case AnomalyClass::RsrqError:
      out.channel.rsrq_db = std::min(out.channel.rsrq_db + delta, 0.0);
      break;
    case AnomalyClass::SinrError:
      out.channel.sinr_db += delta;
      out.channel.cqi = radio::cqi_from_sinr(out.channel.sinr_db);
      break;
    case AnomalyClass::Normal:
      break;
  }
  return out;
}

FeatureVector extract_features(const sim::MeasurementReport& report, const twin::PredictedKpi& kpi,
                               const twin::AllocationPlan& plan) {
  if (kpi.ue_id != report.ue_id) throw DomainError("extract_features: KPI belongs to another UE");
  if (plan.tick != report.tick) throw DomainError("extract_features: plan is for another tick");
  const auto grant = plan.grants.find(report.ue_id);
  if (grant == plan.grants.end()) throw DomainError("extract_features: UE missing from plan");
  const auto total = plan.cell_totals.find(report.serving_cell);
  if (total == plan.cell_totals.end() || total->second <= 0) {
    throw DomainError("extract_features: serving cell missing from plan");
  }
  const double grant_fraction = static_cast<double>(grant->second) / total->second;
  return {report.channel.rsrp_dbm,
          report.channel.rsrq_db,
          report.channel.sinr_db,
          static_cast<double>(report.channel.cqi),
          report.achieved_mbps,
          kpi.predicted_mbps,
          grant_fraction,
          static_cast<double>(report.priority)};
}

void DatasetConfig::validate() const {
  if (n_samples <= 0) throw ConfigError("n_samples must be positive", "n_samples");
  double sum = 0.0;
  for (double f : class_mix) {
    if (!(f >= 0.0)) throw ConfigError("class fractions must be >= 0", "class_mix");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("class fractions must sum to 1", "class_mix");
  for (std::size_t c = 1; c < faults.size(); ++c) {
    if (faults[c].cls != static_cast<AnomalyClass>(c)) throw ConfigError("fault class mismatch", "faults");
    try {
      faults[c].validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what(), "faults." + std::string(class_key(faults[c].cls)));
    }
  }
  if (!(fault_start_probability > 0.0 && fault_start_probability <= 1.0)) {
    throw ConfigError("must be in (0, 1]", "fault_start_probability");
  }
  if (!(emit_probability > 0.0 && emit_probability <= 1.0)) {
    throw ConfigError("must be in (0, 1]", "emit_probability");
  }
}

std::array<int, kNumClasses> apportion(int total, const std::array<double, kNumClasses>& fractions) {
  std::array<int, kNumClasses> counts{};
  std::array<double, kNumClasses> remainders{};
  int assigned = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double exact = fractions[c] * total;
    counts[c] = static_cast<int>(std::floor(exact));
    remainders[c] = exact - counts[c];
    assigned += counts[c];
  }
  std::array<std::size_t, kNumClasses> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Largest remainder first; lower class code wins ties.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % kNumClasses) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

Dataset generate_dataset(const sim::SimConfig& sim_config, const DatasetConfig& config) {
  config.validate();
  sim::SimState state = sim::init_sim(sim_config);
  Rng rng(config.seed);
  std::array<int, kNumClasses> quota = apportion(config.n_samples, config.class_mix);

  Dataset out;
  out.samples.reserve(static_cast<std::size_t>(config.n_samples));
  int missing = config.n_samples;
  constexpr std::int64_t kMaxTicks = 10'000'000;

  while (missing > 0) {
    if (state.tick >= kMaxTicks) throw Error("dataset generation did not converge");
    const sim::StepOutput step = sim::step(state);
    const twin::TwinTickResult twin = twin::twin_tick(step.reports, state.cells, sim_config.link);

    for (std::size_t i = 0; i < step.reports.size() && missing > 0; ++i) {
      const AnomalyClass label = step.applied_fault[i];
      auto& q = quota[static_cast<std::size_t>(code(label))];
      if (q == 0) continue;
      if (rng.uniform() >= config.emit_probability) continue;
      LabeledSample s;
      s.features = extract_features(step.reports[i], twin.kpis[i], twin.plan);
      s.label = label;
      s.ue_id = step.reports[i].ue_id;
      s.tick = step.reports[i].tick;
      out.samples.push_back(s);
      --q;
      --missing;
    }
    twin::apply_plan(state, twin.plan);

    int error_quota = quota[1] + quota[2] + quota[3];
    if (error_quota == 0) continue;
    for (sim::UeState& u : state.ues) {
      if (u.active_fault) continue;
      if (rng.uniform() >= config.fault_start_probability) continue;
      // Class drawn in proportion to the samples each class still needs.
      auto pick = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(error_quota)));
      std::size_t cls = 1;
      while (pick >= quota[cls]) pick -= quota[cls++];
      sim::start_fault(state, u.ue_id, config.faults[cls]);
      out.fault_starts.push_back({u.ue_id, static_cast<AnomalyClass>(cls), state.tick + 1});
    }
  }
  out.ticks_simulated = state.tick;
  return out;
}

Split split_dataset(std::span<const LabeledSample> data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("must be in (0, 1)", "train_fraction");
  }
  if (data.size() < 2) throw DomainError("stratified split needs at least 2 samples");
  Split split;
  Rng rng(seed);
  std::array<std::vector<std::size_t>, kNumClasses> idx;
  for (std::size_t i = 0; i < data.size(); ++i) idx[static_cast<std::size_t>(code(data[i].label))].push_back(i);

  // Per-class floor, then the classes with the largest fractional remainders
  // take one more sample each until the train size reaches floor(f * n).
  // Classes with no training sample at the floor stay degenerate.
  std::array<std::size_t, kNumClasses> n_train{};
  std::array<double, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double exact = train_fraction * static_cast<double>(idx[c].size());
    n_train[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(n_train[c]);
    assigned += n_train[c];
  }
  const auto target = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(data.size())));
  std::array<std::size_t, kNumClasses> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t c : order) {
    if (assigned >= target) break;
    if (n_train[c] == 0 || n_train[c] + 1 >= idx[c].size() || remainder[c] <= 0.0) continue;
    ++n_train[c];
    ++assigned;
  }

  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& members = idx[c];
    if (members.empty()) continue;
    shuffle(members.begin(), members.end(), rng);
    const std::string name(class_name(static_cast<AnomalyClass>(c)));
    if (n_train[c] == 0) {
      split.warnings.push_back("class " + name + " has no training samples");
    } else if (n_train[c] == members.size()) {
      split.warnings.push_back("class " + name + " has no test samples");
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      (k < n_train[c] ? split.train : split.test).push_back(data[members[k]]);
    }
  }
  return split;
}

FeatureStats compute_stats(std::span<const LabeledSample> samples) {
  if (samples.empty()) throw DomainError("compute_stats: no samples");
  FeatureStats stats;
  const double n = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) stats.mean[f] += s.features[f];
  }
  for (double& m : stats.mean) m /= n;
  for (const auto& s : samples) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      const double d = s.features[f] - stats.mean[f];
      stats.std[f] += d * d;
    }
  }
  for (double& v : stats.std) v = std::sqrt(v / n);
  return stats;
}

FeatureVector standardize(const FeatureVector& features, const FeatureStats& stats,
                          std::vector<std::string>* warnings) {
  FeatureVector out{};
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    double sd = stats.std[f];
    if (sd == 0.0) {
      sd = 1.0;
      if (warnings) warnings->push_back("constant feature " + std::string(kFeatureNames[f]));
    }
    out[f] = (features[f] - stats.mean[f]) / sd;
  }
  return out;
}

namespace {

constexpr std::string_view kDatasetHeader =
    "rsrp_dbm,rsrq_db,sinr_db,cqi,achieved_mbps,predicted_mbps,grant_fraction,priority,label,ue_id,tick";

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    lines.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  while (!lines.empty() && (lines.back().empty() || lines.back() == "\r")) lines.pop_back();
  return lines;
}

}  // namespace

std::string dataset_to_csv(std::span<const LabeledSample> samples) {
  std::string out(kDatasetHeader);
  out += '\n';
  for (const auto& s : samples) {
    for (double v : s.features) {
      out += io::format_double(v);
      out += ',';
    }
    out += std::to_string(code(s.label));
    out += ',';
    out += std::to_string(s.ue_id);
    out += ',';
    out += std::to_string(s.tick);
    out += '\n';
  }
  return out;
}

std::vector<LabeledSample> dataset_from_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw FormatError("line 1: empty dataset file");
  std::string_view header = lines[0];
  if (!header.empty() && header.back() == '\r') header.remove_suffix(1);
  if (header != kDatasetHeader) throw FormatError("line 1: unexpected header");
  std::vector<LabeledSample> samples;
  samples.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    const auto fields = io::split_csv_line(lines[i]);
    if (fields.size() != kNumFeatures + 3) {
      throw FormatError(where + "expected " + std::to_string(kNumFeatures + 3) + " fields, got " +
                        std::to_string(fields.size()));
    }
    try {
      LabeledSample s;
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        s.features[f] = io::parse_double(fields[f]);
        if (!std::isfinite(s.features[f])) throw FormatError("non-finite feature");
      }
      s.label = class_from_code(io::parse_int(fields[kNumFeatures]));
      s.ue_id = static_cast<sim::UeId>(io::parse_int(fields[kNumFeatures + 1]));
      s.tick = io::parse_int(fields[kNumFeatures + 2]);
      samples.push_back(s);
    } catch (const Error& e) {
      throw FormatError(where + e.what());
    }
  }
  return samples;
}

std::string stats_to_csv(const FeatureStats& stats) {
  std::string out = "feature,mean,std\n";
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    out += kFeatureNames[f];
    out += ',';
    out += io::format_double(stats.mean[f]);
    out += ',';
    out += io::format_double(stats.std[f]);
    out += '\n';
  }
  return out;
}

FeatureStats stats_from_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.size() != kNumFeatures + 1) {
    throw FormatError("stats file: expected header plus " + std::to_string(kNumFeatures) + " rows");
  }
  FeatureStats stats;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    const auto fields = io::split_csv_line(lines[f + 1]);
    const std::string where = "stats line " + std::to_string(f + 2) + ": ";
    if (fields.size() != 3 || fields[0] != kFeatureNames[f]) throw FormatError(where + "expected feature " + std::string(kFeatureNames[f]));
    try {
      stats.mean[f] = io::parse_double(fields[1]);
      stats.std[f] = io::parse_double(fields[2]);
    } catch (const Error& e) {
      throw FormatError(where + e.what());
    }
    if (!(stats.std[f] >= 0.0)) throw FormatError(where + "negative std");
  }
  return stats;
}

}  // namespace anomaly
}  // namespace rantwin
