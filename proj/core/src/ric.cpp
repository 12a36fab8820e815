#include "rantwin/ric.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <set>

#include <json.hpp>

#include "rantwin/errors.hpp"
#include "rantwin/io.hpp"

namespace rantwin::ric {

using json = nlohmann::ordered_json;

namespace {

json control_json(const ControlAction& a) {
  json j;
  j["type"] = "control";
  j["tick"] = a.tick;
  j["ue_id"] = a.ue_id;
  if (const auto* b = std::get_if<PrbBoost>(&a.kind)) {
    j["kind"] = "PrbBoost";
    j["factor"] = b->factor;
    j["duration_ticks"] = b->duration_ticks;
  } else {
    j["kind"] = "ForceHandover";
    j["target_cell"] = std::get<ForceHandover>(a.kind).target_cell;
  }
  j["cause"] = std::string(class_name(a.cause));
  return j;
}

json detection_json(const Detection& d) {
  return json{{"ue_id", d.ue_id},
              {"predicted", std::string(class_name(d.predicted))},
              {"probs", json(std::vector<double>(d.probs.begin(), d.probs.end()))}};
}

}  // namespace

std::string indication_to_json(const Indication& ind) {
  std::string out = R"({"type":"indication","tick":)" + std::to_string(ind.tick) + R"(,"reports":[)";
  for (std::size_t i = 0; i < ind.reports.size(); ++i) {
    if (i) out += ',';
    out += sim::report_to_json(ind.reports[i]);
  }
  json boosts = json::object();
  for (const auto& [ue, f] : ind.boosts) boosts[std::to_string(ue)] = f;
  out += R"(],"boosts":)" + boosts.dump() + "}";
  return out;
}

std::string control_to_json(const ControlAction& action) { return control_json(action).dump(); }

std::optional<std::shared_ptr<const Indication>> Subscription::poll() {
  std::lock_guard lock(mutex_);
  if (queue_.empty()) return std::nullopt;
  auto msg = std::move(queue_.front());
  queue_.pop_front();
  return msg;
}

std::size_t Subscription::pending() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

std::shared_ptr<Subscription> MessageBus::subscribe() {
  std::lock_guard lock(mutex_);
  auto sub = std::make_shared<Subscription>();
  subscribers_.push_back(sub);
  return sub;
}

void MessageBus::publish(Indication indication) {
  std::lock_guard lock(mutex_);
  if (last_tick_ && indication.tick <= *last_tick_) {
    throw ProtocolError("out-of-order publish: tick " + std::to_string(indication.tick) + " after " +
                        std::to_string(*last_tick_));
  }
  last_tick_ = indication.tick;
  auto msg = std::make_shared<const Indication>(std::move(indication));
  for (const auto& sub : subscribers_) {
    std::lock_guard sub_lock(sub->mutex_);
    sub->queue_.push_back(msg);
  }
}

std::int64_t MessageBus::last_tick() const {
  std::lock_guard lock(mutex_);
  return last_tick_.value_or(0);
}

void RemediationPolicy::validate() const {
  if (confirm_ticks < 1) throw ConfigError("must be >= 1", "confirm_ticks");
  if (clear_ticks < 0) throw ConfigError("must be >= 0", "clear_ticks");
  if (!(boost_factor > 1.0)) throw ConfigError("must be > 1", "boost_factor");
  if (boost_duration_ticks < 1) throw ConfigError("must be >= 1", "boost_duration_ticks");
}

DtXapp::DtXapp(std::shared_ptr<const mlp::MlpModel> model, std::shared_ptr<const anomaly::FeatureStats> stats,
               std::vector<sim::CellState> cells, radio::LinkBudgetParams link, RemediationPolicy policy)
    : model_(std::move(model)),
      stats_(std::move(stats)),
      cells_(std::move(cells)),
      link_(link),
      policy_(policy) {
  if (!model_) throw ConfigError("xApp requires a trained model", "model");
  if (!stats_) throw ConfigError("xApp requires feature statistics", "stats");
  model_->validate();
  policy_.validate();
}

void DtXapp::swap_model(std::shared_ptr<const mlp::MlpModel> model) {
  if (!model) throw ConfigError("xApp requires a trained model", "model");
  model->validate();
  model_ = std::move(model);
}

XappResponse DtXapp::on_indication(const Indication& indication) {
  XappResponse resp;
  twin::TwinTickResult twin = twin::twin_tick(indication.reports, cells_, link_, indication.boosts);
  resp.plan = std::move(twin.plan);
  resp.kpis = std::move(twin.kpis);
  resp.twin_elapsed_ms = twin.elapsed_ms;
  resp.detections.reserve(indication.reports.size());
  for (std::size_t i = 0; i < indication.reports.size(); ++i) {
    const auto& report = indication.reports[i];
    const auto features = anomaly::standardize(anomaly::extract_features(report, resp.kpis[i], resp.plan), *stats_);
    const auto out = mlp::forward(*model_, features);
    Detection d{report.ue_id, mlp::argmax(out.probs), out.probs};
    resp.detections.push_back(d);
    if (auto action = track(report, d.predicted)) resp.actions.push_back(*action);
  }
  return resp;
}

std::optional<ControlAction> DtXapp::track(const sim::MeasurementReport& report, AnomalyClass predicted) {
  UeTracker& t = trackers_[report.ue_id];
  if (predicted == AnomalyClass::Normal) {
    t.streak = 0;
    t.window.clear();
    ++t.normal_streak;
    if (!t.armed && t.normal_streak >= policy_.clear_ticks) t.armed = true;
    return std::nullopt;
  }
  t.normal_streak = 0;
  if (!t.armed) return std::nullopt;
  ++t.streak;
  t.window.push_back(predicted);
  if (t.streak < policy_.confirm_ticks) return std::nullopt;

  // Majority over the confirmation window; the most recent class wins ties.
  std::array<int, kNumClasses> votes{};
  for (AnomalyClass c : t.window) ++votes[static_cast<std::size_t>(code(c))];
  AnomalyClass cause = t.window.back();
  for (AnomalyClass c : kAllClasses) {
    if (votes[static_cast<std::size_t>(code(c))] > votes[static_cast<std::size_t>(code(cause))]) cause = c;
  }

  ControlAction action;
  action.tick = report.tick;
  action.ue_id = report.ue_id;
  action.cause = cause;
  action.kind = PrbBoost{policy_.boost_factor, policy_.boost_duration_ticks};
  if (policy_.remedy[static_cast<std::size_t>(code(cause))] == Remedy::Handover && !report.neighbor_rsrp_dbm.empty()) {
    // Strongest neighbor, lowest id on ties. With no neighbor the boost stands in.
    auto best = report.neighbor_rsrp_dbm.begin();
    for (auto it = report.neighbor_rsrp_dbm.begin(); it != report.neighbor_rsrp_dbm.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    action.kind = ForceHandover{best->first};
  }
  t.armed = false;
  t.streak = 0;
  t.window.clear();
  return action;
}

void apply_control(sim::SimState& state, const ControlAction& action) {
  sim::ue(state, action.ue_id);
  if (const auto* h = std::get_if<ForceHandover>(&action.kind)) {
    sim::cell(state, h->target_cell);
    sim::set_serving_cell(state, action.ue_id, h->target_cell);
  } else {
    const auto& b = std::get<PrbBoost>(action.kind);
    sim::set_boost(state, action.ue_id, b.factor, b.duration_ticks);
  }
}

std::vector<ScheduledFault> demo_schedule() {
  return {
      {200, 7, default_fault(AnomalyClass::RsrpError)},
      {600, 21, default_fault(AnomalyClass::RsrqError)},
      {1000, 38, default_fault(AnomalyClass::SinrError)},
  };
}

std::string schedule_to_json(const std::vector<ScheduledFault>& schedule) {
  json arr = json::array();
  for (const auto& f : schedule) {
    arr.push_back(json{{"tick", f.tick},
                       {"ue_id", f.ue_id},
                       {"class", std::string(class_key(f.spec.cls))},
                       {"offset_db", f.spec.offset_db},
                       {"jitter_db", f.spec.jitter_db},
                       {"duration_ticks", f.spec.duration_ticks}});
  }
  return arr.dump(2) + "\n";
}

std::vector<ScheduledFault> schedule_from_json(std::string_view text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("schedule: ") + e.what());
  }
  if (!arr.is_array()) throw FormatError("schedule: expected a JSON array");
  static const std::set<std::string> kKeys = {"tick", "ue_id", "class", "offset_db", "jitter_db", "duration_ticks"};
  std::vector<ScheduledFault> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& e = arr[i];
    const std::string where = "schedule[" + std::to_string(i) + "]: ";
    if (!e.is_object()) throw FormatError(where + "expected an object");
    for (const auto& [k, v] : e.items()) {
      if (!kKeys.contains(k)) throw FormatError(where + "unknown key '" + k + "'");
    }
    try {
      if (!e.contains("class") || !e.contains("tick") || !e.contains("ue_id")) {
        throw FormatError("tick, ue_id and class are required");
      }
      const auto cls = class_from_name(e.at("class").get<std::string>());
      if (!cls || *cls == AnomalyClass::Normal) throw FormatError("class must be an error class");
      ScheduledFault f;
      f.tick = e.at("tick").get<std::int64_t>();
      f.ue_id = e.at("ue_id").get<int>();
      f.spec = default_fault(*cls);
      if (e.contains("offset_db")) f.spec.offset_db = e.at("offset_db").get<double>();
      if (e.contains("jitter_db")) f.spec.jitter_db = e.at("jitter_db").get<double>();
      if (e.contains("duration_ticks")) f.spec.duration_ticks = e.at("duration_ticks").get<int>();
      f.spec.validate();
      if (f.tick < 1) throw FormatError("tick must be >= 1");
      out.push_back(f);
    } catch (const json::exception& ex) {
      throw FormatError(where + ex.what());
    } catch (const Error& ex) {
      throw FormatError(where + ex.what());
    }
  }
  return out;
}

std::optional<std::int64_t> FaultRecord::detection_latency() const {
  if (!detect_tick) return std::nullopt;
  return *detect_tick - onset_tick;
}

std::optional<std::int64_t> FaultRecord::restoration_latency() const {
  if (!detect_tick || !restore_tick) return std::nullopt;
  return *restore_tick - *detect_tick;
}

std::size_t EpisodeLog::action_count() const {
  std::size_t n = 0;
  for (const auto& t : ticks) n += t.actions.size();
  return n;
}

namespace {

std::vector<ScheduledFault> sorted_schedule(const std::vector<ScheduledFault>& schedule, const sim::SimState& state) {
  std::vector<ScheduledFault> s = schedule;
  for (const auto& f : s) {
    sim::ue(state, f.ue_id);
    f.spec.validate();
  }
  std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.tick < b.tick; });
  return s;
}

}  // namespace

EpisodeLog closed_loop_run(const sim::SimConfig& config, std::shared_ptr<const mlp::MlpModel> model,
                           std::shared_ptr<const anomaly::FeatureStats> stats,
                           const std::vector<ScheduledFault>& schedule, const ClosedLoopOptions& options) {
  sim::SimState state = sim::init_sim(config);
  const auto faults = sorted_schedule(schedule, state);
  MessageBus bus;
  auto inbox = bus.subscribe();
  DtXapp xapp(std::move(model), std::move(stats), state.cells, config.link, options.policy);

  EpisodeLog log;
  std::vector<std::deque<double>> history(state.ues.size());
  std::size_t next_fault = 0;

  for (int t = 0; t < config.n_ticks; ++t) {
    const std::int64_t tick = state.tick + 1;
    while (next_fault < faults.size() && faults[next_fault].tick <= tick) {
      const auto& f = faults[next_fault];
      sim::start_fault(state, f.ue_id, f.spec);
      FaultRecord rec;
      rec.fault_id = static_cast<int>(next_fault);
      rec.ue_id = f.ue_id;
      rec.cls = f.spec.cls;
      rec.onset_tick = tick;
      const auto& h = history[static_cast<std::size_t>(f.ue_id)];
      rec.baseline_mbps = h.empty() ? 0.0 : std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(h.size());
      log.faults.push_back(rec);
      ++next_fault;
    }

    sim::StepOutput out = sim::step(state);
    bus.publish(Indication{state.tick, out.reports, sim::active_boosts(state)});
    const auto msg = inbox->poll();
    if (!msg) throw ProtocolError("indication lost on the bus");
    XappResponse resp = xapp.on_indication(**msg);

    twin::apply_plan(state, resp.plan);
    for (const auto& a : resp.actions) apply_control(state, a);

    TickRecord rec;
    rec.tick = state.tick;
    for (const auto& d : resp.detections) {
      if (d.predicted != AnomalyClass::Normal) rec.detections.push_back(d);
    }
    rec.actions = resp.actions;

    for (const auto& a : resp.actions) {
      // Attribute to the most recent fault on this UE whose window covers the action.
      for (auto it = log.faults.rbegin(); it != log.faults.rend(); ++it) {
        const auto& spec = faults[static_cast<std::size_t>(it->fault_id)].spec;
        if (it->ue_id != a.ue_id || a.tick < it->onset_tick ||
            a.tick > it->onset_tick + spec.duration_ticks + options.policy.confirm_ticks) {
          continue;
        }
        if (!it->action_tick) it->action_tick = a.tick;
        if (!it->detect_tick && a.cause == it->cls) it->detect_tick = a.tick;
        break;
      }
    }

    for (const auto& r : out.reports) {
      for (auto& f : log.faults) {
        if (f.ue_id == r.ue_id && f.detect_tick && !f.restore_tick && r.tick > *f.detect_tick &&
            r.achieved_mbps >= options.restore_fraction * f.baseline_mbps) {
          f.restore_tick = r.tick;
        }
      }
      auto& h = history[static_cast<std::size_t>(r.ue_id)];
      h.push_back(r.achieved_mbps);
      if (static_cast<int>(h.size()) > options.baseline_ticks) h.pop_front();
    }

    log.twin_elapsed_ms.push_back(resp.twin_elapsed_ms);
    if (options.record_trajectory) log.trajectory.push_back({std::move(out.reports), resp.plan});
    log.ticks.push_back(std::move(rec));
  }
  return log;
}

std::vector<TrajectoryTick> twin_only_run(const sim::SimConfig& config, const std::vector<ScheduledFault>& schedule) {
  sim::SimState state = sim::init_sim(config);
  const auto faults = sorted_schedule(schedule, state);
  std::vector<TrajectoryTick> out;
  std::size_t next_fault = 0;
  for (int t = 0; t < config.n_ticks; ++t) {
    while (next_fault < faults.size() && faults[next_fault].tick <= state.tick + 1) {
      sim::start_fault(state, faults[next_fault].ue_id, faults[next_fault].spec);
      ++next_fault;
    }
    sim::StepOutput step = sim::step(state);
    auto twin = twin::twin_tick(step.reports, state.cells, config.link, sim::active_boosts(state));
    twin::apply_plan(state, twin.plan);
    out.push_back({std::move(step.reports), std::move(twin.plan)});
  }
  return out;
}

std::string episode_to_jsonl(const EpisodeLog& log) {
  std::string out;
  for (const auto& t : log.ticks) {
    if (t.detections.empty() && t.actions.empty()) continue;
    json j;
    j["type"] = "tick";
    j["tick"] = t.tick;
    j["detections"] = json::array();
    for (const auto& d : t.detections) j["detections"].push_back(detection_json(d));
    j["actions"] = json::array();
    for (const auto& a : t.actions) j["actions"].push_back(control_json(a));
    out += j.dump();
    out += '\n';
  }
  for (const auto& f : log.faults) {
    json j;
    j["type"] = "fault";
    j["fault_id"] = f.fault_id;
    j["ue_id"] = f.ue_id;
    j["class"] = std::string(class_name(f.cls));
    j["onset_tick"] = f.onset_tick;
    j["detect_tick"] = f.detect_tick ? json(*f.detect_tick) : json(nullptr);
    j["action_tick"] = f.action_tick ? json(*f.action_tick) : json(nullptr);
    j["restore_tick"] = f.restore_tick ? json(*f.restore_tick) : json(nullptr);
    j["baseline_mbps"] = f.baseline_mbps;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string fault_summary_csv(const EpisodeLog& log) {
  auto opt = [](const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : std::string(); };
  std::string out = "fault_id,ue_id,class,onset_tick,detect_tick,action_tick,restore_tick\n";
  for (const auto& f : log.faults) {
    out += std::to_string(f.fault_id) + ',' + std::to_string(f.ue_id) + ',' + std::string(class_name(f.cls)) + ',' +
           std::to_string(f.onset_tick) + ',' + opt(f.detect_tick) + ',' + opt(f.action_tick) + ',' +
           opt(f.restore_tick) + '\n';
  }
  return out;
}

}  // namespace rantwin::ric
