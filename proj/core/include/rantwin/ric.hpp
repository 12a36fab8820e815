#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rantwin/anomaly.hpp"
#include "rantwin/fault.hpp"
#include "rantwin/mlp.hpp"
#include "rantwin/ran_sim.hpp"
#include "rantwin/twin_engine.hpp"

namespace rantwin::ric {

using sim::CellId;
using sim::UeId;

// RAN -> controller message for one tick.
struct Indication {
  std::int64_t tick = 0;
  std::vector<sim::MeasurementReport> reports;
  // Scheduling-weight multipliers currently enforced by the RAN.
  twin::WeightBoosts boosts;
  friend bool operator==(const Indication&, const Indication&) = default;
};

struct PrbBoost {
  double factor = 2.0;
  int duration_ticks = 100;
  friend bool operator==(const PrbBoost&, const PrbBoost&) = default;
};

struct ForceHandover {
  CellId target_cell = 0;
  friend bool operator==(const ForceHandover&, const ForceHandover&) = default;
};

struct ControlAction {
  std::int64_t tick = 0;
  UeId ue_id = 0;
  std::variant<PrbBoost, ForceHandover> kind;
  AnomalyClass cause = AnomalyClass::Normal;
  friend bool operator==(const ControlAction&, const ControlAction&) = default;
};

std::string indication_to_json(const Indication& ind);
std::string control_to_json(const ControlAction& action);

class MessageBus;

// Receiving end of a bus subscription. Messages are shared immutable values.
class Subscription {
 public:
  std::optional<std::shared_ptr<const Indication>> poll();
  std::size_t pending() const;

 private:
  friend class MessageBus;
  mutable std::mutex mutex_;
  std::deque<std::shared_ptr<const Indication>> queue_;
};

// Ordered, lossless in-process fan-out of indications.
class MessageBus {
 public:
  std::shared_ptr<Subscription> subscribe();
  // Throws ProtocolError unless ticks strictly increase.
  void publish(Indication indication);
  std::int64_t last_tick() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::shared_ptr<Subscription>> subscribers_;
  std::optional<std::int64_t> last_tick_;
};

enum class Remedy { Handover, Boost };

struct RemediationPolicy {
  int confirm_ticks = 3;
  int clear_ticks = 10;
  double boost_factor = 2.0;
  int boost_duration_ticks = 100;
  // Indexed by class code; entry 0 unused.
  std::array<Remedy, kNumClasses> remedy = {Remedy::Boost, Remedy::Handover, Remedy::Handover, Remedy::Boost};

  void validate() const;
};

struct Detection {
  UeId ue_id = 0;
  AnomalyClass predicted = AnomalyClass::Normal;
  std::array<double, kNumClasses> probs{};
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct XappResponse {
  twin::AllocationPlan plan;
  std::vector<twin::PredictedKpi> kpis;
  std::vector<ControlAction> actions;
  std::vector<Detection> detections;  // one per report
  double twin_elapsed_ms = 0.0;
};

// The digital-twin xApp: twin allocation, per-UE anomaly inference and
// debounced remediation.
class DtXapp {
 public:
  DtXapp(std::shared_ptr<const mlp::MlpModel> model, std::shared_ptr<const anomaly::FeatureStats> stats,
         std::vector<sim::CellState> cells, radio::LinkBudgetParams link, RemediationPolicy policy);

  XappResponse on_indication(const Indication& indication);

  // Replaces the model between ticks; the old model stays valid for holders.
  void swap_model(std::shared_ptr<const mlp::MlpModel> model);

 private:
  struct UeTracker {
    int streak = 0;
    int normal_streak = 0;
    bool armed = true;
    std::vector<AnomalyClass> window;
  };

  std::optional<ControlAction> track(const sim::MeasurementReport& report, AnomalyClass predicted);

  std::shared_ptr<const mlp::MlpModel> model_;
  std::shared_ptr<const anomaly::FeatureStats> stats_;
  std::vector<sim::CellState> cells_;
  radio::LinkBudgetParams link_;
  RemediationPolicy policy_;
  std::map<UeId, UeTracker> trackers_;
};

// Applies a remediation to the simulated RAN. Throws DomainError for unknown
// UE or cell.
void apply_control(sim::SimState& state, const ControlAction& action);

struct ScheduledFault {
  std::int64_t tick = 0;  // first tick whose report carries the corruption
  UeId ue_id = 0;
  FaultSpec spec;
  friend bool operator==(const ScheduledFault&, const ScheduledFault&) = default;
};

// One fault per error class on three different UEs.
std::vector<ScheduledFault> demo_schedule();
std::string schedule_to_json(const std::vector<ScheduledFault>& schedule);
std::vector<ScheduledFault> schedule_from_json(std::string_view text);

struct ClosedLoopOptions {
  RemediationPolicy policy;
  double restore_fraction = 0.8;
  int baseline_ticks = 20;
  bool record_trajectory = false;
};

struct FaultRecord {
  int fault_id = 0;
  UeId ue_id = 0;
  AnomalyClass cls = AnomalyClass::Normal;
  std::int64_t onset_tick = 0;
  std::optional<std::int64_t> detect_tick;   // first confirmed detection of the right class
  std::optional<std::int64_t> action_tick;   // first action of any class for this fault
  std::optional<std::int64_t> restore_tick;
  double baseline_mbps = 0.0;

  std::optional<std::int64_t> detection_latency() const;
  std::optional<std::int64_t> restoration_latency() const;
  friend bool operator==(const FaultRecord&, const FaultRecord&) = default;
};

struct TickRecord {
  std::int64_t tick = 0;
  std::vector<Detection> detections;  // non-Normal predictions only
  std::vector<ControlAction> actions;
  friend bool operator==(const TickRecord&, const TickRecord&) = default;
};

struct TrajectoryTick {
  std::vector<sim::MeasurementReport> reports;
  twin::AllocationPlan plan;
  friend bool operator==(const TrajectoryTick&, const TrajectoryTick&) = default;
};

struct EpisodeLog {
  std::vector<TickRecord> ticks;
  std::vector<FaultRecord> faults;
  std::vector<TrajectoryTick> trajectory;  // filled when requested
  std::vector<double> twin_elapsed_ms;
  std::size_t action_count() const;
  friend bool operator==(const EpisodeLog& a, const EpisodeLog& b) {
    // Wall-clock timings are excluded from equality.
    return a.ticks == b.ticks && a.faults == b.faults && a.trajectory == b.trajectory;
  }
};

// Steps the simulator for config.n_ticks in lockstep with the xApp over the bus.
EpisodeLog closed_loop_run(const sim::SimConfig& config, std::shared_ptr<const mlp::MlpModel> model,
                           std::shared_ptr<const anomaly::FeatureStats> stats,
                           const std::vector<ScheduledFault>& schedule, const ClosedLoopOptions& options = {});

// Simulator and twin only, no xApp: the reference trajectory for loop safety.
std::vector<TrajectoryTick> twin_only_run(const sim::SimConfig& config, const std::vector<ScheduledFault>& schedule);

std::string episode_to_jsonl(const EpisodeLog& log);
std::string fault_summary_csv(const EpisodeLog& log);

}  // namespace rantwin::ric
