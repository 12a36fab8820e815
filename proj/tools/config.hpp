#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "rantwin/anomaly.hpp"
#include "rantwin/eval.hpp"
#include "rantwin/mlp.hpp"
#include "rantwin/ran_sim.hpp"
#include "rantwin/ric.hpp"

namespace rantwin::cli {

struct TrainSection {
  mlp::TrainConfig model;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 5;
};

struct RicSection {
  ric::RemediationPolicy policy;
  double restore_fraction = 0.8;
  int baseline_ticks = 20;
};

// Everything a pipeline run needs. Every field has a default; a config file
// only overrides what it names.
struct AppConfig {
  sim::SimConfig sim;
  anomaly::DatasetConfig dataset;
  TrainSection train;
  eval::TsneConfig tsne;
  RicSection ric;
};

// Overlays `text` (JSON) on the defaults. Unknown keys and type mismatches
// raise ConfigError naming the dotted key path.
AppConfig parse_config(std::string_view text);
AppConfig load_config(const std::string& path);

// Fully expanded config, pretty-printed JSON.
std::string dump_config(const AppConfig& config);

}  // namespace rantwin::cli
