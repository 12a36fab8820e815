#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rantwin/radio_model.hpp"
#include "rantwin/ran_sim.hpp"

namespace rantwin::twin {

using sim::CellId;
using sim::UeId;

struct AllocationPlan {
  std::int64_t tick = 0;
  std::map<UeId, int> grants;
  std::map<CellId, int> cell_totals;
  friend bool operator==(const AllocationPlan&, const AllocationPlan&) = default;
};

struct PredictedKpi {
  UeId ue_id = 0;
  double predicted_mbps = 0.0;
  double spectral_efficiency = 0.0;  // bits/s/Hz per granted PRB
  friend bool operator==(const PredictedKpi&, const PredictedKpi&) = default;
};

// Per-CQI spectral-efficiency ceiling (bits/s/Hz), the 4-bit CQI ladder.
const std::array<double, radio::kMaxCqi + 1>& cqi_efficiency_table();
double efficiency_cap(int cqi);

// Rate one PRB delivers at the reported CQI, in Mbps.
double prb_rate_mbps(int cqi, const radio::LinkBudgetParams& params);

// Multipliers on the priority weight, keyed by UE. Missing UEs use 1.
using WeightBoosts = std::map<UeId, double>;

// Greedy per-PRB allocation: each PRB of a cell goes to the UE with the
// largest weight * min(prb_rate, remaining demand). Ties go to the earlier
// report. UEs with nothing left to serve receive nothing.
AllocationPlan allocate_prbs(std::span<const sim::MeasurementReport> reports,
                             std::span<const sim::CellState> cells,
                             const radio::LinkBudgetParams& params,
                             const WeightBoosts& boosts = {});

double predict_throughput(int grant, double sinr_db, int cqi, const radio::LinkBudgetParams& params);

// Sum over UEs of weight * min(grant * prb_rate, demand): the quantity the
// greedy allocator maximizes.
double weighted_utility(std::span<const sim::MeasurementReport> reports, const AllocationPlan& plan,
                        const radio::LinkBudgetParams& params, const WeightBoosts& boosts = {});

struct TwinTickResult {
  AllocationPlan plan;
  std::vector<PredictedKpi> kpis;  // one per report, same order
  double elapsed_ms = 0.0;
};

TwinTickResult twin_tick(std::span<const sim::MeasurementReport> reports,
                         std::span<const sim::CellState> cells, const radio::LinkBudgetParams& params,
                         const WeightBoosts& boosts = {});

// Hands the plan to the simulated RAN; grants drive next tick's achieved rate.
void apply_plan(sim::SimState& state, const AllocationPlan& plan);

// One JSONL line per granted UE: tick, ue_id, prbs, predicted_mbps.
std::string plan_to_jsonl(const AllocationPlan& plan, std::span<const PredictedKpi> kpis);

}  // namespace rantwin::twin
