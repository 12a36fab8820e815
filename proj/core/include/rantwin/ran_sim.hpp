#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rantwin/fault.hpp"
#include "rantwin/radio_model.hpp"
#include "rantwin/rng.hpp"

namespace rantwin::sim {

using CellId = int;
using UeId = int;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// One radio unit. DU/CU functions are folded into the simulator.
struct CellState {
  CellId cell_id = 0;
  Vec2 position;
  double tx_power_per_re_dbm = 15.0;
  int total_prbs = 50;
  friend bool operator==(const CellState&, const CellState&) = default;
};

// A fault is bound to the serving link it started on; re-association to a
// different cell clears it.
struct ActiveFault {
  FaultSpec spec;
  int remaining_ticks = 0;
  CellId bound_cell = 0;
  friend bool operator==(const ActiveFault&, const ActiveFault&) = default;
};

struct UeState {
  UeId ue_id = 0;
  Vec2 position;
  Vec2 velocity;
  CellId serving_cell = 0;
  int traffic_priority = 1;  // 1..4, 4 highest
  double demand_mbps = 0.0;
  std::vector<double> shadowing_db;  // indexed by cell position in SimState::cells
  std::optional<ActiveFault> active_fault;
  int granted_prbs = 0;               // from the last applied allocation plan
  double boost_factor = 1.0;          // PRB boost weight multiplier
  std::int64_t boost_until_tick = 0;  // boost active while tick <= this
  friend bool operator==(const UeState&, const UeState&) = default;
};

struct MeasurementReport {
  std::int64_t tick = 0;
  UeId ue_id = 0;
  CellId serving_cell = 0;
  radio::ChannelSample channel;
  std::map<CellId, double> neighbor_rsrp_dbm;
  double demand_mbps = 0.0;
  int priority = 1;
  double achieved_mbps = 0.0;
  friend bool operator==(const MeasurementReport&, const MeasurementReport&) = default;
};

struct SimConfig {
  int n_cells = 3;
  int n_ues = 50;
  double area_m = 500.0;
  double tick_ms = 10.0;
  int n_ticks = 2000;
  std::uint64_t seed = 1;
  radio::LinkBudgetParams link;
  double tx_power_per_re_dbm = 15.0;
  int total_prbs = 50;
  double hysteresis_db = 3.0;
  double shadowing_correlation = 0.995;
  double min_speed_mps = 0.5;
  double max_speed_mps = 3.0;
  std::array<double, 4> mean_demand_mbps = {0.5, 1.0, 1.5, 2.0};  // by priority 1..4

  // Throws ConfigError naming the field.
  void validate() const;
  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct SimState {
  SimConfig config;
  std::vector<CellState> cells;
  std::vector<UeState> ues;
  std::int64_t tick = 0;
  Rng rng;
  friend bool operator==(const SimState&, const SimState&) = default;
};

struct TickKpis {
  std::int64_t tick = 0;
  double demand_mbps = 0.0;
  double achieved_mbps = 0.0;
  int handovers = 0;
  int faulted_ues = 0;
  friend bool operator==(const TickKpis&, const TickKpis&) = default;
};

struct StepOutput {
  std::vector<MeasurementReport> reports;
  TickKpis kpis;
  // Ground truth: class of the corruption applied to reports[i].
  std::vector<AnomalyClass> applied_fault;
  friend bool operator==(const StepOutput&, const StepOutput&) = default;
};

SimState init_sim(const SimConfig& config);

// Advances one tick: mobility, shadowing, reselection, channel sampling,
// fault corruption, demand resampling, report emission.
StepOutput step(SimState& state);

// Stays on `serving_cell` unless another cell beats it by strictly more than
// `hysteresis_db`; the strongest such cell wins, lowest id on ties.
CellId select_serving_cell(CellId serving_cell, const std::map<CellId, double>& rsrp_by_cell,
                           double hysteresis_db);

// True (uncorrupted) per-cell RSRP at the UE's current position and shadowing.
std::map<CellId, double> rsrp_by_cell(const SimState& state, const UeState& ue);

// Uncorrupted channel for `ue` on its current serving cell.
radio::ChannelSample true_channel(const SimState& state, const UeState& ue);

const CellState& cell(const SimState& state, CellId id);
UeState& ue(SimState& state, UeId id);
const UeState& ue(const SimState& state, UeId id);

// Starts `spec` on the UE's current serving link. Replaces any active fault.
void start_fault(SimState& state, UeId ue_id, const FaultSpec& spec);

// Re-associates the UE; a fault bound to the old cell is cleared.
void set_serving_cell(SimState& state, UeId ue_id, CellId cell_id);

// Multiplies the UE's scheduling weight for ticks (tick, tick + duration].
void set_boost(SimState& state, UeId ue_id, double factor, int duration_ticks);

// Effective weight multipliers for the current tick; UEs without an active
// boost are absent.
std::map<UeId, double> active_boosts(const SimState& state);

std::string report_to_json(const MeasurementReport& report);
std::string reports_to_jsonl(const std::vector<MeasurementReport>& reports);

}  // namespace rantwin::sim
