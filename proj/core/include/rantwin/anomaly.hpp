#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rantwin/fault.hpp"
#include "rantwin/ran_sim.hpp"
#include "rantwin/rng.hpp"
#include "rantwin/twin_engine.hpp"

namespace rantwin::anomaly {

inline constexpr std::size_t kNumFeatures = 8;

// [rsrp_dbm, rsrq_db, sinr_db, cqi, achieved_mbps, predicted_mbps,
//  grant_fraction, priority]. The order is a file-format contract.
using FeatureVector = std::array<double, kNumFeatures>;

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "rsrp_dbm", "rsrq_db", "sinr_db", "cqi", "achieved_mbps", "predicted_mbps", "grant_fraction", "priority"};

struct LabeledSample {
  FeatureVector features{};
  AnomalyClass label = AnomalyClass::Normal;
  sim::UeId ue_id = 0;
  std::int64_t tick = 0;
  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct FeatureStats {
  FeatureVector mean{};
  FeatureVector std{};
  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

// Copy of `report` with one field family corrupted by offset + U(-jitter, jitter):
// RSRP, RSRQ (clamped to <= 0 dB) or SINR (CQI re-derived from the corrupted SINR).
sim::MeasurementReport inject_fault(const sim::MeasurementReport& report, const FaultSpec& spec, Rng& rng);

FeatureVector extract_features(const sim::MeasurementReport& report, const twin::PredictedKpi& kpi,
                               const twin::AllocationPlan& plan);

struct DatasetConfig {
  int n_samples = 2505;
  std::array<double, kNumClasses> class_mix = {0.25, 0.25, 0.25, 0.25};
  std::array<FaultSpec, kNumClasses> faults = {FaultSpec{}, default_fault(AnomalyClass::RsrpError),
                                               default_fault(AnomalyClass::RsrqError),
                                               default_fault(AnomalyClass::SinrError)};
  // Per-tick probability that an un-faulted UE starts a fault.
  double fault_start_probability = 0.02;
  // Per-tick probability that an eligible report becomes a sample; spreads
  // samples over time instead of taking consecutive ticks of one UE.
  double emit_probability = 0.05;
  std::uint64_t seed = 7;

  void validate() const;
};

// Largest-remainder apportionment of `total` over `fractions`.
std::array<int, kNumClasses> apportion(int total, const std::array<double, kNumClasses>& fractions);

struct FaultEvent {
  sim::UeId ue_id = 0;
  AnomalyClass cls = AnomalyClass::Normal;
  std::int64_t onset_tick = 0;
  friend bool operator==(const FaultEvent&, const FaultEvent&) = default;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::vector<FaultEvent> fault_starts;  // generation trace
  std::int64_t ticks_simulated = 0;
};

// Drives the simulator with the twin in the loop and collects exactly
// config.n_samples samples with class counts apportioned from the mix.
Dataset generate_dataset(const sim::SimConfig& sim_config, const DatasetConfig& config);

struct Split {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
  std::vector<std::string> warnings;
};

// Stratified: per class, shuffle then floor(fraction * count) to train; the
// train total is then topped up to floor(fraction * n) by largest per-class
// remainder. A class whose floor is 0 keeps all its samples in test.
Split split_dataset(std::span<const LabeledSample> data, double train_fraction, std::uint64_t seed);

// Population moments over the given samples. Zero spreads are kept as 0 and
// handled by standardize.
FeatureStats compute_stats(std::span<const LabeledSample> samples);

// (x - mean) / std per feature; a zero std is treated as 1 and noted in
// `warnings` when provided.
FeatureVector standardize(const FeatureVector& features, const FeatureStats& stats,
                          std::vector<std::string>* warnings = nullptr);

std::string dataset_to_csv(std::span<const LabeledSample> samples);
// Throws FormatError naming the 1-based line number on malformed input.
std::vector<LabeledSample> dataset_from_csv(std::string_view text);

std::string stats_to_csv(const FeatureStats& stats);
FeatureStats stats_from_csv(std::string_view text);

}  // namespace rantwin::anomaly
