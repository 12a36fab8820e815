#include "rantwin/ran_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "rantwin/anomaly.hpp"
#include "rantwin/errors.hpp"
#include "rantwin/twin_engine.hpp"

namespace rantwin::sim {

void SimConfig::validate() const {
  if (n_cells < 1) throw ConfigError("must be >= 1", "n_cells");
  if (n_ues < 1) throw ConfigError("must be >= 1", "n_ues");
  if (!(area_m > 0.0)) throw ConfigError("must be > 0", "area_m");
  if (!(tick_ms > 0.0)) throw ConfigError("must be > 0", "tick_ms");
  if (n_ticks < 0) throw ConfigError("must be >= 0", "n_ticks");
  if (!std::isfinite(tx_power_per_re_dbm)) throw ConfigError("must be finite", "tx_power_per_re_dbm");
  if (total_prbs < 1) throw ConfigError("must be >= 1", "total_prbs");
  if (!(hysteresis_db >= 0.0)) throw ConfigError("must be >= 0", "hysteresis_db");
  if (!(shadowing_correlation >= 0.0 && shadowing_correlation <= 1.0)) {
    throw ConfigError("must be in [0, 1]", "shadowing_correlation");
  }
  if (!(min_speed_mps >= 0.0)) throw ConfigError("must be >= 0", "min_speed_mps");
  if (!(max_speed_mps >= min_speed_mps)) throw ConfigError("must be >= min_speed_mps", "max_speed_mps");
  for (double m : mean_demand_mbps) {
    if (!(m >= 0.0)) throw ConfigError("entries must be >= 0", "mean_demand_mbps");
  }
  link.validate();
}

namespace {

double distance(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::size_t cell_index(const SimState& state, CellId id) {
  for (std::size_t i = 0; i < state.cells.size(); ++i) {
    if (state.cells[i].cell_id == id) return i;
  }
  throw DomainError("unknown cell " + std::to_string(id));
}

double received_dbm(const SimState& state, const UeState& ue, std::size_t cell_idx) {
  const CellState& c = state.cells[cell_idx];
  // Co-located UE and cell: clamp to the reference distance.
  const double d = std::max(distance(ue.position, c.position), state.config.link.ref_distance_m);
  return radio::rsrp_dbm(c.tx_power_per_re_dbm, radio::path_loss_db(d, state.config.link),
                         ue.shadowing_db[cell_idx]);
}

void reflect(double& pos, double& vel, double limit) {
  // A single reflection suffices while per-tick displacement < area.
  if (pos < 0.0) {
    pos = -pos;
    vel = -vel;
  } else if (pos > limit) {
    pos = 2.0 * limit - pos;
    vel = -vel;
  }
  pos = std::clamp(pos, 0.0, limit);
}

double mean_demand(const SimConfig& config, int priority) {
  return config.mean_demand_mbps[static_cast<std::size_t>(priority - 1)];
}

}  // namespace

SimState init_sim(const SimConfig& config) {
  config.validate();
  SimState state;
  state.config = config;
  state.rng = Rng(config.seed);

  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(config.n_cells))));
  const int rows = (config.n_cells + cols - 1) / cols;
  for (int i = 0; i < config.n_cells; ++i) {
    CellState c;
    c.cell_id = i;
    c.position = {(i % cols + 0.5) * config.area_m / cols, (i / cols + 0.5) * config.area_m / rows};
    c.tx_power_per_re_dbm = config.tx_power_per_re_dbm;
    c.total_prbs = config.total_prbs;
    state.cells.push_back(c);
  }

  Rng& rng = state.rng;
  for (int u = 0; u < config.n_ues; ++u) {
    UeState ue;
    ue.ue_id = u;
    ue.position = {rng.uniform(0.0, config.area_m), rng.uniform(0.0, config.area_m)};
    const double speed = rng.uniform(config.min_speed_mps, config.max_speed_mps);
    const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    ue.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
    ue.traffic_priority = 1 + static_cast<int>(rng.uniform_index(4));
    ue.shadowing_db.resize(state.cells.size());
    for (double& s : ue.shadowing_db) s = rng.normal(0.0, config.link.shadowing_sigma_db);
    ue.demand_mbps = rng.exponential(mean_demand(config, ue.traffic_priority));

    CellId best = state.cells.front().cell_id;
    double best_rsrp = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < state.cells.size(); ++c) {
      const double p = received_dbm(state, ue, c);
      if (p > best_rsrp) {
        best_rsrp = p;
        best = state.cells[c].cell_id;
      }
    }
    ue.serving_cell = best;
    state.ues.push_back(std::move(ue));
  }
  return state;
}

CellId select_serving_cell(CellId serving_cell, const std::map<CellId, double>& rsrp_by_cell,
                           double hysteresis_db) {
  const auto it = rsrp_by_cell.find(serving_cell);
  if (it == rsrp_by_cell.end()) throw DomainError("serving cell missing from RSRP map");
  // std::map iterates in ascending id order, so strict > keeps the lowest id on ties.
  CellId best = serving_cell;
  double best_rsrp = it->second + hysteresis_db;
  for (const auto& [id, rsrp] : rsrp_by_cell) {
    if (id != serving_cell && rsrp > best_rsrp) {
      best = id;
      best_rsrp = rsrp;
    }
  }
  return best;
}

std::map<CellId, double> rsrp_by_cell(const SimState& state, const UeState& ue) {
  std::map<CellId, double> out;
  for (std::size_t c = 0; c < state.cells.size(); ++c) {
    out[state.cells[c].cell_id] = received_dbm(state, ue, c);
  }
  return out;
}

radio::ChannelSample true_channel(const SimState& state, const UeState& ue) {
  const std::size_t serving = cell_index(state, ue.serving_cell);
  std::vector<double> interferers;
  interferers.reserve(state.cells.size());
  double serving_mw = 0.0;
  for (std::size_t c = 0; c < state.cells.size(); ++c) {
    const double mw = radio::dbm_to_mw(received_dbm(state, ue, c));
    if (c == serving) serving_mw = mw;
    else interferers.push_back(mw);
  }
  return radio::make_channel_sample(serving_mw, interferers, radio::noise_per_re_mw(state.config.link));
}

const CellState& cell(const SimState& state, CellId id) { return state.cells[cell_index(state, id)]; }

UeState& ue(SimState& state, UeId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= state.ues.size()) {
    throw DomainError("unknown UE " + std::to_string(id));
  }
  return state.ues[static_cast<std::size_t>(id)];
}

const UeState& ue(const SimState& state, UeId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= state.ues.size()) {
    throw DomainError("unknown UE " + std::to_string(id));
  }
  return state.ues[static_cast<std::size_t>(id)];
}

void start_fault(SimState& state, UeId ue_id, const FaultSpec& spec) {
  spec.validate();
  UeState& u = ue(state, ue_id);
  u.active_fault = ActiveFault{spec, spec.duration_ticks, u.serving_cell};
}

void set_serving_cell(SimState& state, UeId ue_id, CellId cell_id) {
  cell_index(state, cell_id);
  UeState& u = ue(state, ue_id);
  if (u.serving_cell == cell_id) return;
  u.serving_cell = cell_id;
  if (u.active_fault && u.active_fault->bound_cell != cell_id) u.active_fault.reset();
}

void set_boost(SimState& state, UeId ue_id, double factor, int duration_ticks) {
  if (!(factor > 1.0)) throw DomainError("boost factor must be > 1");
  if (duration_ticks < 1) throw DomainError("boost duration must be >= 1");
  UeState& u = ue(state, ue_id);
  u.boost_factor = factor;
  u.boost_until_tick = state.tick + duration_ticks;
}

std::map<UeId, double> active_boosts(const SimState& state) {
  std::map<UeId, double> out;
  for (const UeState& u : state.ues) {
    if (u.boost_factor > 1.0 && state.tick <= u.boost_until_tick) out[u.ue_id] = u.boost_factor;
  }
  return out;
}

StepOutput step(SimState& state) {
  const SimConfig& cfg = state.config;
  const double dt_s = cfg.tick_ms / 1000.0;
  ++state.tick;

  // (1) mobility
  for (UeState& u : state.ues) {
    u.position.x += u.velocity.x * dt_s;
    u.position.y += u.velocity.y * dt_s;
    reflect(u.position.x, u.velocity.x, cfg.area_m);
    reflect(u.position.y, u.velocity.y, cfg.area_m);
  }

  // (2) shadowing
  for (UeState& u : state.ues) {
    for (double& s : u.shadowing_db) {
      s = radio::evolve_shadowing(s, cfg.shadowing_correlation, cfg.link.shadowing_sigma_db, state.rng);
    }
  }

  StepOutput out;
  out.kpis.tick = state.tick;

  // (3) reselection
  for (UeState& u : state.ues) {
    const CellId target = select_serving_cell(u.serving_cell, rsrp_by_cell(state, u), cfg.hysteresis_db);
    if (target != u.serving_cell) {
      set_serving_cell(state, u.ue_id, target);
      ++out.kpis.handovers;
    }
  }

  out.reports.reserve(state.ues.size());
  out.applied_fault.reserve(state.ues.size());
  const double noise_mw = radio::noise_per_re_mw(cfg.link);
  for (UeState& u : state.ues) {
    // (4) channel sampling; interference from every other cell at full power
    MeasurementReport r;
    r.tick = state.tick;
    r.ue_id = u.ue_id;
    r.serving_cell = u.serving_cell;
    std::vector<double> interferers;
    double serving_mw = 0.0;
    for (std::size_t c = 0; c < state.cells.size(); ++c) {
      const double dbm = received_dbm(state, u, c);
      if (state.cells[c].cell_id == u.serving_cell) {
        serving_mw = radio::dbm_to_mw(dbm);
      } else {
        interferers.push_back(radio::dbm_to_mw(dbm));
        r.neighbor_rsrp_dbm[state.cells[c].cell_id] = dbm;
      }
    }
    r.channel = radio::make_channel_sample(serving_mw, interferers, noise_mw);

    // Rate delivered by last tick's grant on the true channel, capped by the
    // demand that grant was sized for.
    r.achieved_mbps = std::min(
        twin::predict_throughput(u.granted_prbs, r.channel.sinr_db, r.channel.cqi, cfg.link), u.demand_mbps);

    // (5) fault corruption
    AnomalyClass applied = AnomalyClass::Normal;
    if (u.active_fault) {
      r = anomaly::inject_fault(r, u.active_fault->spec, state.rng);
      applied = u.active_fault->spec.cls;
      ++out.kpis.faulted_ues;
      if (--u.active_fault->remaining_ticks <= 0) u.active_fault.reset();
    }

    // (6) demand resampling
    u.demand_mbps = state.rng.exponential(mean_demand(cfg, u.traffic_priority));
    r.demand_mbps = u.demand_mbps;
    r.priority = u.traffic_priority;

    out.kpis.demand_mbps += r.demand_mbps;
    out.kpis.achieved_mbps += r.achieved_mbps;

    // (7) emission
    out.reports.push_back(std::move(r));
    out.applied_fault.push_back(applied);
  }
  return out;
}

std::string report_to_json(const MeasurementReport& r) {
  nlohmann::ordered_json j;
  j["tick"] = r.tick;
  j["ue_id"] = r.ue_id;
  j["serving_cell"] = r.serving_cell;
  j["channel"] = {{"rsrp_dbm", r.channel.rsrp_dbm},
                  {"rssi_dbm", r.channel.rssi_dbm},
                  {"rsrq_db", r.channel.rsrq_db},
                  {"sinr_db", r.channel.sinr_db},
                  {"cqi", r.channel.cqi}};
  nlohmann::ordered_json neighbors = nlohmann::ordered_json::object();
  for (const auto& [id, dbm] : r.neighbor_rsrp_dbm) neighbors[std::to_string(id)] = dbm;
  j["neighbor_rsrp_dbm"] = std::move(neighbors);
  j["demand_mbps"] = r.demand_mbps;
  j["priority"] = r.priority;
  j["achieved_mbps"] = r.achieved_mbps;
  return j.dump();
}

std::string reports_to_jsonl(const std::vector<MeasurementReport>& reports) {
  std::string out;
  for (const auto& r : reports) {
    out += report_to_json(r);
    out += '\n';
  }
  return out;
}

}  // namespace rantwin::sim
