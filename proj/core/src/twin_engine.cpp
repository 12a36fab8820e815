#include "rantwin/twin_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <json.hpp>

#include "rantwin/errors.hpp"

namespace rantwin::twin {

const std::array<double, radio::kMaxCqi + 1>& cqi_efficiency_table() {
  static constexpr std::array<double, radio::kMaxCqi + 1> table = {
      0.0,    0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766,
      1.9141, 2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547};
  return table;
}

double efficiency_cap(int cqi) {
  if (cqi < 0 || cqi > radio::kMaxCqi) throw DomainError("cqi out of range: " + std::to_string(cqi));
  return cqi_efficiency_table()[static_cast<std::size_t>(cqi)];
}

double prb_rate_mbps(int cqi, const radio::LinkBudgetParams& params) {
  return params.prb_bandwidth_hz * efficiency_cap(cqi) / 1e6;
}

namespace {

double weight_of(const sim::MeasurementReport& r, const WeightBoosts& boosts) {
  const auto it = boosts.find(r.ue_id);
  return static_cast<double>(r.priority) * (it == boosts.end() ? 1.0 : it->second);
}

}  // namespace

AllocationPlan allocate_prbs(std::span<const sim::MeasurementReport> reports,
                             std::span<const sim::CellState> cells,
                             const radio::LinkBudgetParams& params, const WeightBoosts& boosts) {
  AllocationPlan plan;
  if (!reports.empty()) plan.tick = reports.front().tick;
  for (const auto& c : cells) plan.cell_totals[c.cell_id] = c.total_prbs;

  std::map<CellId, std::vector<std::size_t>> by_cell;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (!plan.cell_totals.contains(r.serving_cell)) {
      throw DomainError("report for UE " + std::to_string(r.ue_id) + " references unknown cell " +
                        std::to_string(r.serving_cell));
    }
    by_cell[r.serving_cell].push_back(i);
    plan.grants[r.ue_id] = 0;
  }

  for (const auto& [cell_id, members] : by_cell) {
    const int capacity = plan.cell_totals.at(cell_id);
    std::vector<double> rate(members.size());
    std::vector<double> weight(members.size());
    std::vector<int> grant(members.size(), 0);
    for (std::size_t k = 0; k < members.size(); ++k) {
      const auto& r = reports[members[k]];
      rate[k] = prb_rate_mbps(r.channel.cqi, params);
      weight[k] = weight_of(r, boosts);
    }
    for (int prb = 0; prb < capacity; ++prb) {
      std::size_t best = members.size();
      double best_utility = 0.0;
      for (std::size_t k = 0; k < members.size(); ++k) {
        const double remaining = reports[members[k]].demand_mbps - grant[k] * rate[k];
        if (remaining <= 0.0) continue;
        const double utility = weight[k] * std::min(rate[k], remaining);
        if (utility > best_utility) {
          best_utility = utility;
          best = k;
        }
      }
      if (best == members.size()) break;
      ++grant[best];
    }
    for (std::size_t k = 0; k < members.size(); ++k) plan.grants[reports[members[k]].ue_id] = grant[k];
  }
  return plan;
}

double predict_throughput(int grant, double sinr_db, int cqi, const radio::LinkBudgetParams& params) {
  if (grant < 0) throw DomainError("grant must be >= 0");
  if (grant == 0) return 0.0;
  const double shannon = std::log2(1.0 + radio::db_to_linear(sinr_db));
  return grant * params.prb_bandwidth_hz * std::min(shannon, efficiency_cap(cqi)) / 1e6;
}

double weighted_utility(std::span<const sim::MeasurementReport> reports, const AllocationPlan& plan,
                        const radio::LinkBudgetParams& params, const WeightBoosts& boosts) {
  double total = 0.0;
  for (const auto& r : reports) {
    const auto it = plan.grants.find(r.ue_id);
    const int g = it == plan.grants.end() ? 0 : it->second;
    total += weight_of(r, boosts) * std::min(g * prb_rate_mbps(r.channel.cqi, params), r.demand_mbps);
  }
  return total;
}

TwinTickResult twin_tick(std::span<const sim::MeasurementReport> reports,
                         std::span<const sim::CellState> cells, const radio::LinkBudgetParams& params,
                         const WeightBoosts& boosts) {
  const auto start = std::chrono::steady_clock::now();
  TwinTickResult result;
  result.plan = allocate_prbs(reports, cells, params, boosts);
  result.kpis.reserve(reports.size());
  for (const auto& r : reports) {
    const int g = result.plan.grants.at(r.ue_id);
    PredictedKpi kpi;
    kpi.ue_id = r.ue_id;
    kpi.predicted_mbps = predict_throughput(g, r.channel.sinr_db, r.channel.cqi, params);
    kpi.spectral_efficiency =
        std::min(std::log2(1.0 + radio::db_to_linear(r.channel.sinr_db)), efficiency_cap(r.channel.cqi));
    result.kpis.push_back(kpi);
  }
  const auto stop = std::chrono::steady_clock::now();
  result.elapsed_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  return result;
}

void apply_plan(sim::SimState& state, const AllocationPlan& plan) {
  for (sim::UeState& u : state.ues) {
    const auto it = plan.grants.find(u.ue_id);
    u.granted_prbs = it == plan.grants.end() ? 0 : it->second;
  }
}

std::string plan_to_jsonl(const AllocationPlan& plan, std::span<const PredictedKpi> kpis) {
  std::map<UeId, double> predicted;
  for (const auto& k : kpis) predicted[k.ue_id] = k.predicted_mbps;
  std::string out;
  for (const auto& [ue_id, prbs] : plan.grants) {
    nlohmann::ordered_json j;
    j["tick"] = plan.tick;
    j["ue_id"] = ue_id;
    j["prbs"] = prbs;
    const auto it = predicted.find(ue_id);
    j["predicted_mbps"] = it == predicted.end() ? 0.0 : it->second;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace rantwin::twin
