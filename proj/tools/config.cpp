#include "config.hpp"

#include <set>

#include <json.hpp>

#include "rantwin/errors.hpp"
#include "rantwin/io.hpp"

namespace rantwin::cli {

using json = nlohmann::ordered_json;

namespace {

// Field visitors shared by dump and parse, so the two can't drift apart.
template <typename F>
void visit(radio::LinkBudgetParams& c, F&& f) {
  f("ref_path_loss_db", c.ref_path_loss_db);
  f("ref_distance_m", c.ref_distance_m);
  f("path_loss_exponent", c.path_loss_exponent);
  f("shadowing_sigma_db", c.shadowing_sigma_db);
  f("noise_density_dbm_hz", c.noise_density_dbm_hz);
  f("prb_bandwidth_hz", c.prb_bandwidth_hz);
  f("noise_figure_db", c.noise_figure_db);
}

template <typename F>
void visit(sim::SimConfig& c, F&& f) {
  f("n_cells", c.n_cells);
  f("n_ues", c.n_ues);
  f("area_m", c.area_m);
  f("tick_ms", c.tick_ms);
  f("n_ticks", c.n_ticks);
  f("seed", c.seed);
  f("tx_power_per_re_dbm", c.tx_power_per_re_dbm);
  f("total_prbs", c.total_prbs);
  f("hysteresis_db", c.hysteresis_db);
  f("shadowing_correlation", c.shadowing_correlation);
  f("min_speed_mps", c.min_speed_mps);
  f("max_speed_mps", c.max_speed_mps);
  f("mean_demand_mbps", c.mean_demand_mbps);
}

template <typename F>
void visit(anomaly::DatasetConfig& c, F&& f) {
  f("n_samples", c.n_samples);
  f("class_mix", c.class_mix);
  f("fault_start_probability", c.fault_start_probability);
  f("emit_probability", c.emit_probability);
  f("seed", c.seed);
}

template <typename F>
void visit(FaultSpec& c, F&& f) {
  f("offset_db", c.offset_db);
  f("jitter_db", c.jitter_db);
  f("duration_ticks", c.duration_ticks);
}

template <typename F>
void visit(TrainSection& c, F&& f) {
  f("hidden", c.model.hidden);
  f("epochs", c.model.epochs);
  f("batch_size", c.model.batch_size);
  f("learning_rate", c.model.learning_rate);
  f("adam_beta1", c.model.adam_beta1);
  f("adam_beta2", c.model.adam_beta2);
  f("adam_epsilon", c.model.adam_epsilon);
  f("seed", c.model.seed);
  f("train_fraction", c.train_fraction);
  f("split_seed", c.split_seed);
}

template <typename F>
void visit(eval::TsneConfig& c, F&& f) {
  f("perplexity", c.perplexity);
  f("iterations", c.iterations);
  f("learning_rate", c.learning_rate);
  f("momentum", c.momentum);
  f("final_momentum", c.final_momentum);
  f("momentum_switch_iteration", c.momentum_switch_iteration);
  f("early_exaggeration", c.early_exaggeration);
  f("exaggeration_iterations", c.exaggeration_iterations);
  f("seed", c.seed);
}

template <typename F>
void visit(RicSection& c, F&& f) {
  f("confirm_ticks", c.policy.confirm_ticks);
  f("clear_ticks", c.policy.clear_ticks);
  f("boost_factor", c.policy.boost_factor);
  f("boost_duration_ticks", c.policy.boost_duration_ticks);
  f("restore_fraction", c.restore_fraction);
  f("baseline_ticks", c.baseline_ticks);
}

template <typename T>
json dump_section(T& section) {
  json j = json::object();
  visit(section, [&j](const char* key, auto& value) { j[key] = value; });
  return j;
}

std::string_view remedy_name(ric::Remedy r) { return r == ric::Remedy::Handover ? "handover" : "boost"; }

// Reads the keys of one JSON object, remembering which were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("expected an object", path_);
  }

  template <typename T>
  void read(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("invalid value: ") + e.what(), child(key));
    }
  }

  template <typename T>
  void read_section(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    Section sub(j_.at(key), child(key));
    visit(out, [&sub](const char* k, auto& v) { sub.read(k, v); });
    sub.finish();
  }

  const json* object(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown key", child(key));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

std::string dump_config(const AppConfig& config) {
  AppConfig c = config;
  json j;
  json sim = dump_section(c.sim);
  sim["link"] = dump_section(c.sim.link);
  j["sim"] = std::move(sim);

  json dataset = dump_section(c.dataset);
  json faults = json::object();
  for (AnomalyClass cls : {AnomalyClass::RsrpError, AnomalyClass::RsrqError, AnomalyClass::SinrError}) {
    faults[std::string(class_key(cls))] = dump_section(c.dataset.faults[static_cast<std::size_t>(code(cls))]);
  }
  dataset["faults"] = std::move(faults);
  j["dataset"] = std::move(dataset);
  j["train"] = dump_section(c.train);
  j["tsne"] = dump_section(c.tsne);

  json ric = dump_section(c.ric);
  json policy = json::object();
  for (AnomalyClass cls : {AnomalyClass::RsrpError, AnomalyClass::RsrqError, AnomalyClass::SinrError}) {
    policy[std::string(class_key(cls))] = std::string(remedy_name(c.ric.policy.remedy[static_cast<std::size_t>(code(cls))]));
  }
  ric["policy"] = std::move(policy);
  j["ric"] = std::move(ric);
  return j.dump(2) + "\n";
}

AppConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(), "config");
  }
  AppConfig c;
  Section root(j, "");

  if (const json* sim = root.object("sim")) {
    Section s(*sim, "sim");
    visit(c.sim, [&s](const char* k, auto& v) { s.read(k, v); });
    s.read_section("link", c.sim.link);
    s.finish();
  }
  if (const json* dataset = root.object("dataset")) {
    Section s(*dataset, "dataset");
    visit(c.dataset, [&s](const char* k, auto& v) { s.read(k, v); });
    if (const json* faults = s.object("faults")) {
      Section f(*faults, "dataset.faults");
      for (AnomalyClass cls : {AnomalyClass::RsrpError, AnomalyClass::RsrqError, AnomalyClass::SinrError}) {
        f.read_section(std::string(class_key(cls)).c_str(), c.dataset.faults[static_cast<std::size_t>(code(cls))]);
      }
      f.finish();
    }
    s.finish();
  }
  root.read_section("train", c.train);
  root.read_section("tsne", c.tsne);
  if (const json* ric = root.object("ric")) {
    Section s(*ric, "ric");
    visit(c.ric, [&s](const char* k, auto& v) { s.read(k, v); });
    if (const json* policy = s.object("policy")) {
      Section p(*policy, "ric.policy");
      for (AnomalyClass cls : {AnomalyClass::RsrpError, AnomalyClass::RsrqError, AnomalyClass::SinrError}) {
        std::string name(remedy_name(c.ric.policy.remedy[static_cast<std::size_t>(code(cls))]));
        const std::string key(class_key(cls));
        p.read(key.c_str(), name);
        if (name == "handover") c.ric.policy.remedy[static_cast<std::size_t>(code(cls))] = ric::Remedy::Handover;
        else if (name == "boost") c.ric.policy.remedy[static_cast<std::size_t>(code(cls))] = ric::Remedy::Boost;
        else throw ConfigError("expected \"handover\" or \"boost\"", "ric.policy." + key);
      }
      p.finish();
    }
    s.finish();
  }
  root.finish();

  c.sim.validate();
  c.dataset.validate();
  c.train.model.validate();
  if (!(c.train.train_fraction > 0.0 && c.train.train_fraction < 1.0)) {
    throw ConfigError("must be in (0, 1)", "train.train_fraction");
  }
  c.ric.policy.validate();
  if (!(c.ric.restore_fraction > 0.0)) throw ConfigError("must be > 0", "ric.restore_fraction");
  if (c.ric.baseline_ticks < 1) throw ConfigError("must be >= 1", "ric.baseline_ticks");
  return c;
}

AppConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what(), "config");
  }
  return parse_config(text);
}

}  // namespace rantwin::cli
