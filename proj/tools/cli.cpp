#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "rantwin/anomaly.hpp"
#include "rantwin/errors.hpp"
#include "rantwin/eval.hpp"
#include "rantwin/io.hpp"
#include "rantwin/mlp.hpp"
#include "rantwin/ric.hpp"

namespace rantwin::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Record of one command invocation, written next to its primary output even
// when the command fails.
class Manifest {
 public:
  Manifest(std::string command, fs::path path) : command_(std::move(command)), path_(std::move(path)) {}

  void set_config(const AppConfig& config) { config_ = json::parse(dump_config(config)); }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void timing(const std::string& name, double ms) { timings_[name] = ms; }
  void fail(int exit_code, const std::string& message) {
    exit_code_ = exit_code;
    error_ = message;
  }

  void write() const {
    json j;
    j["command"] = command_;
    j["exit_code"] = exit_code_;
    j["error"] = error_ ? json(*error_) : json(nullptr);
    j["config"] = config_;
    j["seeds"] = seeds_;
    j["inputs"] = files(inputs_);
    j["outputs"] = files(outputs_);
    j["timings_ms"] = timings_;
    try {
      io::write_file(path_, j.dump(2) + "\n");
    } catch (const Error&) {
      // Nowhere left to report; the command's own exit code stands.
    }
  }

 private:
  static json files(const std::vector<fs::path>& paths) {
    json arr = json::array();
    for (const auto& p : paths) {
      json e;
      e["path"] = p.string();
      std::error_code ec;
      e["sha256"] = fs::exists(p, ec) ? json(io::sha256_file(p)) : json(nullptr);
      arr.push_back(std::move(e));
    }
    return arr;
  }

  std::string command_;
  fs::path path_;
  json config_ = nullptr;
  json seeds_ = json::object();
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
  json timings_ = json::object();
  int exit_code_ = kOk;
  std::optional<std::string> error_;
};

class Stopwatch {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const DomainError*>(&e)) {
    return kConfig;
  }
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  if (dynamic_cast<const NumericError*>(&e)) return kNumeric;
  return kPipeline;
}

// Runs `body`, maps exceptions onto exit codes and always writes the manifest.
int guarded(Manifest& manifest, std::ostream& err, const std::function<void()>& body) {
  int code = kOk;
  try {
    body();
  } catch (const std::exception& e) {
    code = exit_code_for(e);
    err << "error: " << e.what() << "\n";
    manifest.fail(code, e.what());
  }
  manifest.write();
  return code;
}

void require_file(const std::string& path, const std::string& what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw ConfigError("file not found: " + path, what);
}

std::vector<mlp::Example> to_examples(std::span<const anomaly::LabeledSample> samples,
                                      const anomaly::FeatureStats& stats) {
  std::vector<mlp::Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({anomaly::standardize(s.features, stats), code(s.label)});
  return out;
}

std::vector<anomaly::LabeledSample> read_dataset(const std::string& path) {
  return anomaly::dataset_from_csv(io::read_file(path));
}

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

AppConfig resolve_config(const Options& opts) {
  return opts.config_path.empty() ? AppConfig{} : load_config(opts.config_path);
}

// --- gen-dataset -----------------------------------------------------------

struct GenDatasetArgs {
  std::string out;
  std::optional<int> n_samples;
};

int cmd_gen_dataset(const Options& opts, const GenDatasetArgs& args, std::ostream& out, std::ostream& err) {
  Manifest manifest("gen-dataset", args.out + ".manifest.json");
  return guarded(manifest, err, [&] {
    Stopwatch sw;
    if (!opts.config_path.empty()) manifest.input(opts.config_path);
    AppConfig config = resolve_config(opts);
    if (args.n_samples) config.dataset.n_samples = *args.n_samples;
    if (opts.seed) config.dataset.seed = *opts.seed;
    manifest.set_config(config);
    manifest.seed("sim", config.sim.seed);
    manifest.seed("dataset", config.dataset.seed);
    if (config.dataset.n_samples <= 0) throw ConfigError("n_samples must be positive");

    const anomaly::Dataset ds = anomaly::generate_dataset(config.sim, config.dataset);
    io::write_file(args.out, anomaly::dataset_to_csv(ds.samples));
    manifest.output(args.out);

    std::array<int, kNumClasses> counts{};
    for (const auto& s : ds.samples) ++counts[static_cast<std::size_t>(code(s.label))];
    out << "wrote " << ds.samples.size() << " samples to " << args.out << " (" << ds.ticks_simulated
        << " ticks simulated)\n";
    for (AnomalyClass c : kAllClasses) out << "  " << class_name(c) << ": " << counts[static_cast<std::size_t>(code(c))] << "\n";
    manifest.timing("total", sw.ms());
  });
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  std::string model_out;
  std::string stats_out;
  std::string report_out;
  std::optional<int> epochs;
};

int cmd_train(const Options& opts, const TrainArgs& args, std::ostream& out, std::ostream& err) {
  Manifest manifest("train", args.model_out + ".manifest.json");
  return guarded(manifest, err, [&] {
    Stopwatch sw;
    if (!opts.config_path.empty()) manifest.input(opts.config_path);
    AppConfig config = resolve_config(opts);
    if (args.epochs) config.train.model.epochs = *args.epochs;
    if (opts.seed) config.train.model.seed = *opts.seed;
    config.train.model.validate();
    manifest.set_config(config);
    manifest.seed("train", config.train.model.seed);
    manifest.seed("split", config.train.split_seed);
    manifest.input(args.dataset);

    const auto samples = read_dataset(args.dataset);
    const auto split = anomaly::split_dataset(samples, config.train.train_fraction, config.train.split_seed);
    for (const auto& w : split.warnings) err << "warning: " << w << "\n";
    const auto stats = anomaly::compute_stats(split.train);
    std::vector<std::string> warnings;
    for (std::size_t f = 0; f < anomaly::kNumFeatures; ++f) {
      if (stats.std[f] == 0.0) err << "warning: constant feature " << anomaly::kFeatureNames[f] << "\n";
    }
    const auto train_set = to_examples(split.train, stats);
    const auto test_set = to_examples(split.test, stats);
    out << "split: train " << split.train.size() << ", test " << split.test.size() << "\n";

    const auto init = mlp::init_model(config.train.model.hidden, config.train.model.seed);
    const Stopwatch train_sw;
    const auto result = mlp::train(init, train_set, test_set, config.train.model);
    manifest.timing("train", train_sw.ms());

    mlp::save_model(result.model, args.model_out);
    io::write_file(args.stats_out, anomaly::stats_to_csv(stats));
    const std::string report_path = args.report_out.empty() ? args.model_out + ".report.csv" : args.report_out;
    io::write_file(report_path, mlp::train_report_csv(result.report));
    manifest.output(args.model_out);
    manifest.output(args.stats_out);
    manifest.output(report_path);

    const double acc = result.report.epoch_test_accuracy.empty() ? 0.0 : result.report.epoch_test_accuracy.back();
    out << "final training loss: " << result.report.epoch_loss.back() << " (initial " << result.report.initial_loss
        << ")\n";
    out << "test accuracy: " << std::fixed << std::setprecision(4) << acc << std::defaultfloat << "\n";
    out << "model sha256: " << result.report.model_hash << "\n";
    manifest.timing("total", sw.ms());
  });
}

// --- eval ----------------------------------------------------------------

struct ModelInputs {
  std::string model;
  std::string stats;
  std::string dataset;
};

struct LoadedInputs {
  mlp::MlpModel model;
  anomaly::FeatureStats stats;
  anomaly::Split split;
};

LoadedInputs load_inputs(const ModelInputs& in, const AppConfig& config, Manifest& manifest) {
  require_file(in.model, "model");
  require_file(in.stats, "stats");
  manifest.input(in.model);
  manifest.input(in.stats);
  manifest.input(in.dataset);
  LoadedInputs loaded;
  loaded.model = mlp::load_model(in.model);
  loaded.stats = anomaly::stats_from_csv(io::read_file(in.stats));
  const auto samples = read_dataset(in.dataset);
  loaded.split = anomaly::split_dataset(samples, config.train.train_fraction, config.train.split_seed);
  return loaded;
}

struct EvalArgs {
  ModelInputs in;
  std::string out_dir;
  std::string split = "test";
};

int cmd_eval(const Options& opts, const EvalArgs& args, std::ostream& out, std::ostream& err) {
  Manifest manifest("eval", fs::path(args.out_dir) / "manifest.json");
  return guarded(manifest, err, [&] {
    Stopwatch sw;
    if (!opts.config_path.empty()) manifest.input(opts.config_path);
    const AppConfig config = resolve_config(opts);
    manifest.set_config(config);
    manifest.seed("split", config.train.split_seed);
    const LoadedInputs in = load_inputs(args.in, config, manifest);

    auto run_split = [&](const std::vector<anomaly::LabeledSample>& samples) {
      std::pair<std::vector<AnomalyClass>, std::vector<AnomalyClass>> pl;
      for (const auto& s : samples) {
        pl.first.push_back(mlp::predict(in.model, anomaly::standardize(s.features, in.stats)));
        pl.second.push_back(s.label);
      }
      return pl;
    };
    const auto [train_pred, train_lab] = run_split(in.split.train);
    const auto [test_pred, test_lab] = run_split(in.split.test);
    const double train_acc = eval::accuracy(train_pred, train_lab);
    const double test_acc = eval::accuracy(test_pred, test_lab);
    if (train_acc < test_acc) {
      err << "warning: training-split accuracy " << train_acc << " is below test accuracy " << test_acc << "\n";
    }

    std::vector<AnomalyClass> pred;
    std::vector<AnomalyClass> lab;
    if (args.split == "train" || args.split == "all") {
      pred.insert(pred.end(), train_pred.begin(), train_pred.end());
      lab.insert(lab.end(), train_lab.begin(), train_lab.end());
    }
    if (args.split == "test" || args.split == "all") {
      pred.insert(pred.end(), test_pred.begin(), test_pred.end());
      lab.insert(lab.end(), test_lab.begin(), test_lab.end());
    }
    const auto cm = eval::confusion(pred, lab);
    const double acc = eval::accuracy(pred, lab);

    json metrics;
    metrics["split"] = args.split;
    metrics["samples"] = cm.total();
    metrics["accuracy"] = acc;
    metrics["train_accuracy"] = train_acc;
    metrics["test_accuracy"] = test_acc;
    json per_class = json::object();
    for (AnomalyClass c : kAllClasses) {
      per_class[std::string(class_name(c))] = {{"precision", cm.precision(c)}, {"recall", cm.recall(c)}};
    }
    metrics["per_class"] = std::move(per_class);

    const fs::path cm_path = fs::path(args.out_dir) / "confusion.csv";
    const fs::path metrics_path = fs::path(args.out_dir) / "metrics.json";
    io::write_file(cm_path, eval::confusion_to_csv(cm));
    io::write_file(metrics_path, metrics.dump(2) + "\n");
    manifest.output(cm_path);
    manifest.output(metrics_path);

    out << "accuracy (" << args.split << "): " << std::fixed << std::setprecision(4) << acc << "\n";
    for (AnomalyClass c : kAllClasses) {
      out << "  " << std::left << std::setw(10) << class_name(c) << " precision " << cm.precision(c) << "  recall "
          << cm.recall(c) << "\n";
    }
    out << std::defaultfloat;
    manifest.timing("total", sw.ms());
  });
}

// --- tsne ----------------------------------------------------------------

struct TsneArgs {
  ModelInputs in;
  std::string out;
  std::optional<double> perplexity;
  std::optional<int> iterations;
};

int cmd_tsne(const Options& opts, const TsneArgs& args, std::ostream& out, std::ostream& err) {
  Manifest manifest("tsne", args.out + ".manifest.json");
  return guarded(manifest, err, [&] {
    Stopwatch sw;
    if (!opts.config_path.empty()) manifest.input(opts.config_path);
    AppConfig config = resolve_config(opts);
    if (args.perplexity) config.tsne.perplexity = *args.perplexity;
    if (args.iterations) config.tsne.iterations = *args.iterations;
    if (opts.seed) config.tsne.seed = *opts.seed;
    manifest.set_config(config);
    manifest.seed("tsne", config.tsne.seed);
    manifest.seed("split", config.train.split_seed);
    const LoadedInputs in = load_inputs(args.in, config, manifest);
    const auto& test = in.split.test;
    config.tsne.validate(test.size());

    eval::PointSet points{test.size(), static_cast<std::size_t>(kNumClasses), {}};
    points.values.reserve(test.size() * kNumClasses);
    std::vector<int> labels;
    for (const auto& s : test) {
      const auto probs = mlp::forward(in.model, anomaly::standardize(s.features, in.stats)).probs;
      points.values.insert(points.values.end(), probs.begin(), probs.end());
      labels.push_back(code(s.label));
    }
    const auto emb = eval::tsne(points, config.tsne);
    const double score = eval::silhouette(emb.points, labels);

    std::string csv = "ue_id,tick,label,x,y\n";
    for (std::size_t i = 0; i < test.size(); ++i) {
      csv += std::to_string(test[i].ue_id) + ',' + std::to_string(test[i].tick) + ',' + std::to_string(labels[i]) + ',' +
             io::format_double(emb.points[i][0]) + ',' + io::format_double(emb.points[i][1]) + '\n';
    }
    io::write_file(args.out, csv);
    manifest.output(args.out);
    out << "embedded " << test.size() << " test points; KL " << emb.initial_kl << " -> " << emb.final_kl << "\n";
    out << "silhouette: " << std::fixed << std::setprecision(4) << score << std::defaultfloat << "\n";
    manifest.timing("total", sw.ms());
  });
}

// --- closed-loop -----------------------------------------------------------

struct ClosedLoopArgs {
  std::string model;
  std::string stats;
  std::string schedule;
  std::string out_dir;
  std::optional<int> ticks;
  bool log_messages = false;
};

int cmd_closed_loop(const Options& opts, const ClosedLoopArgs& args, std::ostream& out, std::ostream& err) {
  Manifest manifest("closed-loop", fs::path(args.out_dir) / "manifest.json");
  return guarded(manifest, err, [&] {
    Stopwatch sw;
    if (!opts.config_path.empty()) manifest.input(opts.config_path);
    AppConfig config = resolve_config(opts);
    if (opts.seed) config.sim.seed = *opts.seed;
    if (args.ticks) config.sim.n_ticks = *args.ticks;
    config.sim.validate();
    manifest.set_config(config);
    manifest.seed("sim", config.sim.seed);

    require_file(args.model, "model");
    require_file(args.stats, "stats");
    manifest.input(args.model);
    manifest.input(args.stats);
    auto model = std::make_shared<const mlp::MlpModel>(mlp::load_model(args.model));
    auto stats = std::make_shared<const anomaly::FeatureStats>(anomaly::stats_from_csv(io::read_file(args.stats)));
    std::vector<ric::ScheduledFault> schedule = ric::demo_schedule();
    if (!args.schedule.empty()) {
      require_file(args.schedule, "schedule");
      manifest.input(args.schedule);
      schedule = ric::schedule_from_json(io::read_file(args.schedule));
    }

    ric::ClosedLoopOptions options;
    options.policy = config.ric.policy;
    options.restore_fraction = config.ric.restore_fraction;
    options.baseline_ticks = config.ric.baseline_ticks;
    options.record_trajectory = args.log_messages;
    ric::EpisodeLog log;
    try {
      log = ric::closed_loop_run(config.sim, model, stats, schedule, options);
    } catch (const DomainError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(std::string("closed loop failed: ") + e.what());
    }

    const fs::path episode = fs::path(args.out_dir) / "episode.jsonl";
    const fs::path summary = fs::path(args.out_dir) / "summary.csv";
    io::write_file(episode, ric::episode_to_jsonl(log));
    io::write_file(summary, ric::fault_summary_csv(log));
    manifest.output(episode);
    manifest.output(summary);
    if (args.log_messages) {
      std::string messages;
      for (std::size_t t = 0; t < log.trajectory.size(); ++t) {
        ric::Indication ind{log.ticks[t].tick, log.trajectory[t].reports, {}};
        messages += ric::indication_to_json(ind) + "\n";
        for (const auto& a : log.ticks[t].actions) messages += ric::control_to_json(a) + "\n";
      }
      const fs::path messages_path = fs::path(args.out_dir) / "messages.jsonl";
      io::write_file(messages_path, messages);
      manifest.output(messages_path);
    }

    std::vector<double> elapsed = log.twin_elapsed_ms;
    std::sort(elapsed.begin(), elapsed.end());
    out << "ran " << log.ticks.size() << " ticks, " << log.action_count() << " control actions\n";
    if (!elapsed.empty()) out << "twin tick median " << elapsed[elapsed.size() / 2] << " ms\n";
    for (const auto& f : log.faults) {
      out << "fault " << f.fault_id << " ue " << f.ue_id << " " << class_name(f.cls) << " onset " << f.onset_tick;
      if (const auto d = f.detection_latency()) out << ": detected after " << *d << " ticks";
      else out << ": not detected";
      if (const auto r = f.restoration_latency()) out << ", restored " << *r << " ticks after action";
      out << "\n";
    }
    manifest.timing("total", sw.ms());
  });
}

int cmd_demo_schedule(const std::string& path, std::ostream& out, std::ostream& err) {
  Manifest manifest("demo-schedule", path + ".manifest.json");
  return guarded(manifest, err, [&] {
    io::write_file(path, ric::schedule_to_json(ric::demo_schedule()));
    manifest.output(path);
    out << "wrote demo schedule to " << path << "\n";
  });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"rantwin: RAN digital twin with anomaly-detection xApp"};
  app.require_subcommand(0, 1);

  Options opts;
  bool print_default = false;
  app.add_option("--config", opts.config_path, "JSON config file (defaults for every omitted key)")
      ->check(CLI::ExistingFile);
  app.add_flag("--print-default-config", print_default, "Print the fully expanded default config and exit");

  auto* gen = app.add_subcommand("gen-dataset", "Generate a labeled dataset CSV");
  GenDatasetArgs gen_args;
  gen->add_option("--out", gen_args.out, "Output CSV")->required();
  gen->add_option("--n-samples", gen_args.n_samples, "Number of samples (default 2505)");
  gen->add_option("--seed", opts.seed, "Dataset seed");

  auto* train = app.add_subcommand("train", "Train the anomaly classifier");
  TrainArgs train_args;
  train->add_option("--dataset", train_args.dataset, "Dataset CSV")->required();
  train->add_option("--model-out", train_args.model_out, "Model file to write")->required();
  train->add_option("--stats-out", train_args.stats_out, "Feature statistics CSV to write")->required();
  train->add_option("--report-out", train_args.report_out, "Per-epoch report CSV (default <model-out>.report.csv)");
  train->add_option("--epochs", train_args.epochs, "Override epochs");
  train->add_option("--seed", opts.seed, "Initialization and shuffling seed");

  auto* ev = app.add_subcommand("eval", "Evaluate a model on a dataset split");
  EvalArgs eval_args;
  ev->add_option("--model", eval_args.in.model)->required();
  ev->add_option("--stats", eval_args.in.stats)->required();
  ev->add_option("--dataset", eval_args.in.dataset)->required();
  ev->add_option("--out-dir", eval_args.out_dir)->required();
  ev->add_option("--split", eval_args.split, "test, train or all")->check(CLI::IsMember({"test", "train", "all"}));

  auto* ts = app.add_subcommand("tsne", "Embed test-set NN outputs with t-SNE");
  TsneArgs tsne_args;
  ts->add_option("--model", tsne_args.in.model)->required();
  ts->add_option("--stats", tsne_args.in.stats)->required();
  ts->add_option("--dataset", tsne_args.in.dataset)->required();
  ts->add_option("--out", tsne_args.out, "Embedding CSV")->required();
  ts->add_option("--perplexity", tsne_args.perplexity);
  ts->add_option("--iterations", tsne_args.iterations);
  ts->add_option("--seed", opts.seed, "Embedding initialization seed");

  auto* cl = app.add_subcommand("closed-loop", "Run the simulator with the xApp in the loop");
  ClosedLoopArgs cl_args;
  cl->add_option("--model", cl_args.model)->required();
  cl->add_option("--stats", cl_args.stats)->required();
  cl->add_option("--schedule", cl_args.schedule, "Fault schedule JSON (default: demo schedule)");
  cl->add_option("--out-dir", cl_args.out_dir)->required();
  cl->add_option("--ticks", cl_args.ticks, "Override sim.n_ticks");
  cl->add_option("--seed", opts.seed, "Simulation seed");
  cl->add_flag("--log-messages", cl_args.log_messages, "Also write every bus message as JSONL");

  auto* demo = app.add_subcommand("demo-schedule", "Write the default demo fault schedule");
  std::string demo_out;
  demo->add_option("--out", demo_out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  }

  if (print_default) {
    try {
      out << dump_config(resolve_config(opts));
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return exit_code_for(e);
    }
    return kOk;
  }

  if (gen->parsed()) return cmd_gen_dataset(opts, gen_args, out, err);
  if (train->parsed()) return cmd_train(opts, train_args, out, err);
  if (ev->parsed()) return cmd_eval(opts, eval_args, out, err);
  if (ts->parsed()) return cmd_tsne(opts, tsne_args, out, err);
  if (cl->parsed()) return cmd_closed_loop(opts, cl_args, out, err);
  if (demo->parsed()) return cmd_demo_schedule(demo_out, out, err);

  out << app.help();
  return kUsage;
}

}  // namespace rantwin::cli
