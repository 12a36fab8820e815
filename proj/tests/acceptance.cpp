// End-to-end acceptance run: one PASS/FAIL line per criterion. Exit status is
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "rantwin/anomaly.hpp"
#include "rantwin/eval.hpp"
#include "rantwin/io.hpp"
#include "rantwin/mlp.hpp"
#include "rantwin/radio_model.hpp"
#include "rantwin/ran_sim.hpp"
#include "rantwin/ric.hpp"
#include "rantwin/twin_engine.hpp"

using namespace rantwin;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct CommandRun {
  int code = 0;
  std::string out;
  std::string err;
  double seconds = 0.0;
};

CommandRun run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const auto start = std::chrono::steady_clock::now();
  const int code = cli::run(args, out, err);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (code != 0) std::cerr << "command failed (" << code << "): " << err.str();
  return {code, out.str(), err.str(), s};
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << v;
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(io::split_csv_line(line));
  }
  return rows;
}

// Directory layout shared by the pipeline criteria.
struct Workspace {
  fs::path root;
  fs::path dataset() const { return root / "dataset.csv"; }
  fs::path model() const { return root / "model.txt"; }
  fs::path stats() const { return root / "stats.csv"; }
  fs::path eval_dir() const { return root / "eval"; }
  fs::path embedding() const { return root / "embedding.csv"; }
  fs::path loop_dir() const { return root / "loop"; }
  fs::path schedule() const { return root / "schedule.json"; }
};

std::string s(const fs::path& p) { return p.string(); }

double gen_seconds = 0.0;
double train_seconds = 0.0;
double eval_seconds = 0.0;

Outcome criterion_dataset(const Workspace& ws) {
  const auto gen = run_cli({"gen-dataset", "--out", s(ws.dataset())});
  if (gen.code != 0) return {false, "gen-dataset exit " + std::to_string(gen.code)};
  gen_seconds = gen.seconds;
  const auto train = run_cli({"train", "--dataset", s(ws.dataset()), "--model-out", s(ws.model()), "--stats-out",
                              s(ws.stats())});
  if (train.code != 0) return {false, "train exit " + std::to_string(train.code)};
  train_seconds = train.seconds;

  const auto rows = read_csv(ws.dataset());
  const auto data = anomaly::dataset_from_csv(io::read_file(ws.dataset()));
  const auto split = anomaly::split_dataset(data, 0.8, 5);
  const bool printed = train.out.find("split: train 2004, test 501") != std::string::npos;
  const bool ok = rows.size() == 2505 && data.size() == 2505 && split.train.size() == 2004 &&
                  split.test.size() == 501 && printed && gen.seconds < 60.0;
  return {ok, "samples " + std::to_string(rows.size()) + ", split " + std::to_string(split.train.size()) + "/" +
                  std::to_string(split.test.size()) + ", gen " + fmt(gen.seconds, 2) + " s"};
}

Outcome criterion_accuracy(const Workspace& ws) {
  const auto ev = run_cli({"eval", "--model", s(ws.model()), "--stats", s(ws.stats()), "--dataset", s(ws.dataset()),
                           "--out-dir", s(ws.eval_dir())});
  if (ev.code != 0) return {false, "eval exit " + std::to_string(ev.code)};
  eval_seconds = ev.seconds;

  // Recompute from the confusion matrix rather than trusting the summary.
  const auto rows = read_csv(ws.eval_dir() / "confusion.csv");
  long long total = 0;
  long long diag = 0;
  double min_recall = 1.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    long long row_total = 0;
    for (std::size_t c = 1; c < rows[r].size(); ++c) row_total += io::parse_int(rows[r][c]);
    const long long hit = io::parse_int(rows[r][r + 1]);
    total += row_total;
    diag += hit;
    min_recall = std::min(min_recall, row_total ? static_cast<double>(hit) / row_total : 0.0);
  }
  const double acc = total ? static_cast<double>(diag) / total : 0.0;
  const double runtime = gen_seconds + train_seconds + ev.seconds;
  const bool ok = total == 501 && acc >= 0.85 && min_recall >= 0.75 && runtime < 180.0;
  return {ok, "test accuracy " + fmt(acc) + ", min recall " + fmt(min_recall) + ", pipeline " + fmt(runtime, 2) + " s"};
}

Outcome criterion_tsne(const Workspace& ws) {
  const auto ts = run_cli({"tsne", "--model", s(ws.model()), "--stats", s(ws.stats()), "--dataset", s(ws.dataset()),
                           "--out", s(ws.embedding())});
  if (ts.code != 0) return {false, "tsne exit " + std::to_string(ts.code)};
  std::vector<std::array<double, 2>> y;
  std::vector<int> labels;
  for (const auto& row : read_csv(ws.embedding())) {
    labels.push_back(static_cast<int>(io::parse_int(row[2])));
    y.push_back({io::parse_double(row[3]), io::parse_double(row[4])});
  }
  const double sil = eval::silhouette(y, labels);
  const bool ok = y.size() == 501 && sil >= 0.3 && ts.seconds < 120.0;
  return {ok, "silhouette " + fmt(sil) + " over " + std::to_string(y.size()) + " points, " + fmt(ts.seconds, 2) + " s"};
}

Outcome criterion_latency() {
  sim::SimState state = sim::init_sim(sim::SimConfig{});
  std::vector<double> elapsed;
  for (int t = 0; t < 1000; ++t) {
    const auto out = sim::step(state);
    const auto tick = twin::twin_tick(out.reports, state.cells, state.config.link, sim::active_boosts(state));
    twin::apply_plan(state, tick.plan);
    elapsed.push_back(tick.elapsed_ms);
  }
  std::sort(elapsed.begin(), elapsed.end());
  const double median = (elapsed[499] + elapsed[500]) / 2.0;
  return {median < 10.0, "median twin_tick " + fmt(median, 4) + " ms, p99 " + fmt(elapsed[989], 4) + " ms"};
}

Outcome criterion_closed_loop(const Workspace& ws) {
  if (run_cli({"demo-schedule", "--out", s(ws.schedule())}).code != 0) return {false, "demo-schedule failed"};
  const auto cl = run_cli({"closed-loop", "--model", s(ws.model()), "--stats", s(ws.stats()), "--schedule",
                           s(ws.schedule()), "--out-dir", s(ws.loop_dir())});
  if (cl.code != 0) return {false, "closed-loop exit " + std::to_string(cl.code)};
  const auto rows = read_csv(ws.loop_dir() / "summary.csv");
  int detected = 0;
  int restored = 0;
  std::string detail;
  for (const auto& r : rows) {
    const long long onset = io::parse_int(r[3]);
    const bool has_detect = !r[4].empty();
    const bool in_time = has_detect && io::parse_int(r[4]) - onset <= 20;
    if (in_time) {
      ++detected;
      if (!r[5].empty() && !r[6].empty() && io::parse_int(r[6]) - io::parse_int(r[5]) <= 100) ++restored;
    }
    detail += " " + r[2] + (in_time ? "@+" + std::to_string(io::parse_int(r[4]) - onset) : "@miss");
    if (in_time) detail += r[6].empty() ? "/unrestored" : "/restored+" + std::to_string(io::parse_int(r[6]) - io::parse_int(r[5]));
  }
  const bool ok = rows.size() == 3 && detected >= 2 && restored == detected && cl.seconds < 60.0;
  return {ok, std::to_string(detected) + "/3 detected, " + std::to_string(restored) + " restored;" + detail + ", " +
                  fmt(cl.seconds, 2) + " s"};
}

Outcome criterion_gradients() {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> hidden;
    const int depth = 1 + static_cast<int>(rng.uniform_index(3));
    for (int d = 0; d < depth; ++d) hidden.push_back(2 + static_cast<int>(rng.uniform_index(15)));
    auto model = mlp::init_model(hidden, rng.next_u64());
    // Non-zero biases keep pre-activations off the ReLU kink.
    for (auto& layer : model.layers) {
      for (auto& b : layer.biases) b = rng.normal(0.0, 0.1);
    }
    std::vector<mlp::Example> batch(1 + rng.uniform_index(32));
    for (auto& e : batch) {
      for (auto& v : e.x) v = rng.normal();
      e.label = static_cast<int>(rng.uniform_index(4));
    }
    const auto grads = mlp::loss_and_grads(model, batch).grads;
    const double eps = 1e-5;
    auto check = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + eps;
      const double up = mlp::mean_loss(model, batch);
      param = saved - eps;
      const double down = mlp::mean_loss(model, batch);
      param = saved;
      const double numeric = (up - down) / (2.0 * eps);
      worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      for (std::size_t i = 0; i < model.layers[l].weights.size(); ++i) {
        check(model.layers[l].weights[i], grads.layers[l].weights[i]);
      }
      for (std::size_t i = 0; i < model.layers[l].biases.size(); ++i) {
        check(model.layers[l].biases[i], grads.layers[l].biases[i]);
      }
    }
  }
  return {worst < 1e-4, "max relative error " + std::to_string(worst) + " over 20 instances"};
}

Outcome criterion_allocation() {
  Rng rng(77);
  const radio::LinkBudgetParams link;
  double worst_ratio = 1.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int prbs = 1 + static_cast<int>(rng.uniform_index(12));
    const int n = 1 + static_cast<int>(rng.uniform_index(3));
    std::vector<sim::MeasurementReport> reports(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) {
      auto& r = reports[static_cast<std::size_t>(u)];
      r.ue_id = u;
      r.channel.cqi = static_cast<int>(rng.uniform_index(16));
      r.channel.sinr_db = rng.uniform(-10.0, 25.0);
      r.demand_mbps = rng.uniform(0.0, 5.0);
      r.priority = 1 + static_cast<int>(rng.uniform_index(4));
    }
    const std::vector<sim::CellState> cells{{0, {0.0, 0.0}, 15.0, prbs}};
    const auto plan = twin::allocate_prbs(reports, cells, link);
    auto utility = [&](const std::vector<int>& g) {
      double u = 0.0;
      for (int k = 0; k < n; ++k) {
        const auto& r = reports[static_cast<std::size_t>(k)];
        const double rate = link.prb_bandwidth_hz * twin::cqi_efficiency_table()[static_cast<std::size_t>(r.channel.cqi)] / 1e6;
        u += r.priority * std::min(g[static_cast<std::size_t>(k)] * rate, r.demand_mbps);
      }
      return u;
    };
    std::vector<int> g(static_cast<std::size_t>(n), 0);
    double best = 0.0;
    std::function<void(int, int)> rec = [&](int i, int left) {
      if (i == n) {
        best = std::max(best, utility(g));
        return;
      }
      for (int k = 0; k <= left; ++k) {
        g[static_cast<std::size_t>(i)] = k;
        rec(i + 1, left - k);
      }
    };
    rec(0, prbs);
    std::vector<int> greedy;
    for (const auto& r : reports) greedy.push_back(plan.grants.at(r.ue_id));
    if (best > 0.0) worst_ratio = std::min(worst_ratio, utility(greedy) / best);
  }
  return {worst_ratio >= 0.95, "worst greedy/optimum ratio " + fmt(worst_ratio, 6) + " over 50 instances"};
}

// Digest of every output listed in a manifest.
std::map<std::string, std::string> manifest_outputs(const fs::path& manifest, const fs::path& root) {
  std::map<std::string, std::string> out;
  const auto j = json::parse(io::read_file(manifest));
  for (const auto& o : j.at("outputs")) {
    out[fs::relative(o.at("path").get<std::string>(), root).string()] = o.at("sha256").get<std::string>();
  }
  return out;
}

Outcome criterion_determinism(const Workspace& first) {
  // Replay every command into a fresh directory with the seeds recorded in
  // the first run's manifests, then compare artifact digests.
  const Workspace second{first.root.parent_path() / "replay"};
  fs::remove_all(second.root);
  auto seed_of = [](const fs::path& manifest, const char* name) {
    return std::to_string(json::parse(io::read_file(manifest)).at("seeds").at(name).get<std::uint64_t>());
  };
  const auto ds_manifest = first.dataset().string() + ".manifest.json";
  const auto model_manifest = first.model().string() + ".manifest.json";
  const auto tsne_manifest = first.embedding().string() + ".manifest.json";
  const auto loop_manifest = first.loop_dir() / "manifest.json";

  std::vector<std::string> failures;
  auto expect_ok = [&](const CommandRun& r, const std::string& name) {
    if (r.code != 0) failures.push_back(name + " exit " + std::to_string(r.code));
  };
  expect_ok(run_cli({"gen-dataset", "--out", s(second.dataset()), "--seed", seed_of(ds_manifest, "dataset")}),
            "gen-dataset");
  expect_ok(run_cli({"train", "--dataset", s(second.dataset()), "--model-out", s(second.model()), "--stats-out",
                     s(second.stats()), "--seed", seed_of(model_manifest, "train")}),
            "train");
  expect_ok(run_cli({"eval", "--model", s(second.model()), "--stats", s(second.stats()), "--dataset",
                     s(second.dataset()), "--out-dir", s(second.eval_dir())}),
            "eval");
  expect_ok(run_cli({"tsne", "--model", s(second.model()), "--stats", s(second.stats()), "--dataset",
                     s(second.dataset()), "--out", s(second.embedding()), "--seed", seed_of(tsne_manifest, "tsne")}),
            "tsne");
  expect_ok(run_cli({"demo-schedule", "--out", s(second.schedule())}), "demo-schedule");
  expect_ok(run_cli({"closed-loop", "--model", s(second.model()), "--stats", s(second.stats()), "--schedule",
                     s(second.schedule()), "--out-dir", s(second.loop_dir()), "--seed", seed_of(loop_manifest, "sim")}),
            "closed-loop");

  int compared = 0;
  const std::vector<std::pair<fs::path, fs::path>> manifests{
      {ds_manifest, second.dataset().string() + ".manifest.json"},
      {model_manifest, second.model().string() + ".manifest.json"},
      {first.eval_dir() / "manifest.json", second.eval_dir() / "manifest.json"},
      {tsne_manifest, second.embedding().string() + ".manifest.json"},
      {first.schedule().string() + ".manifest.json", second.schedule().string() + ".manifest.json"},
      {loop_manifest, second.loop_dir() / "manifest.json"}};
  for (const auto& [a, b] : manifests) {
    if (!fs::exists(b)) {
      failures.push_back("missing " + b.string());
      continue;
    }
    const auto da = manifest_outputs(a, first.root);
    const auto db = manifest_outputs(b, second.root);
    if (da.empty() || da != db) failures.push_back("digest mismatch for " + a.filename().string());
    // Independent check: hash the files directly.
    for (const auto& [rel, digest] : da) {
      ++compared;
      if (io::sha256_file(first.root / rel) != io::sha256_file(second.root / rel)) failures.push_back(rel);
    }
  }
  std::string detail = std::to_string(compared) + " artifacts byte-identical across 6 commands";
  if (!failures.empty()) detail = "differences: " + failures.front();
  return {failures.empty() && compared >= 9, detail};
}

Outcome criterion_invariants() {
  std::vector<std::string> broken;
  Rng rng(99);

  // Radio model: monotone path loss and RSRQ <= 0.
  const radio::LinkBudgetParams link;
  for (int i = 0; i < 2000; ++i) {
    const double d = rng.uniform(0.1, 2000.0);
    if (radio::path_loss_db(d, link) > radio::path_loss_db(d + rng.uniform(0.0, 100.0), link)) {
      broken.push_back("path loss monotonicity");
      break;
    }
    std::vector<double> intf(rng.uniform_index(4));
    for (auto& p : intf) p = radio::dbm_to_mw(rng.uniform(-150.0, -50.0));
    const auto c = radio::make_channel_sample(radio::dbm_to_mw(rng.uniform(-140.0, -40.0)), intf,
                                              radio::noise_per_re_mw(link));
    if (c.rsrq_db > 0.0) {
      broken.push_back("rsrq <= 0");
      break;
    }
  }

  // PRB conservation per cell along a live simulation.
  {
    sim::SimConfig cfg;
    cfg.seed = 1234;
    sim::SimState st = sim::init_sim(cfg);
    for (int t = 0; t < 300 && broken.empty(); ++t) {
      const auto out = sim::step(st);
      const auto plan = twin::allocate_prbs(out.reports, st.cells, cfg.link, sim::active_boosts(st));
      std::map<int, int> used;
      for (const auto& r : out.reports) used[r.serving_cell] += plan.grants.at(r.ue_id);
      for (const auto& c : st.cells) {
        if (used[c.cell_id] > c.total_prbs) broken.push_back("PRB conservation");
      }
      twin::apply_plan(st, plan);
    }
  }

  // Softmax at extreme logits.
  for (int i = 0; i < 1000; ++i) {
    std::array<double, 4> logits{};
    for (auto& v : logits) v = rng.uniform(-1e4, 1e4);
    const auto p = mlp::softmax(logits);
    double sum = 0.0;
    for (double v : p) sum += v;
    if (!(std::abs(sum - 1.0) < 1e-12)) {
      broken.push_back("softmax normalization");
      break;
    }
  }

  // t-SNE P matrix and KL improvement.
  {
    const std::size_t n = 60;
    eval::PointSet pts{n, 4, {}};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < 4; ++k) pts.values.push_back((k == i % 4 ? 5.0 : 0.0) + rng.normal());
    }
    const auto jp = eval::joint_probabilities(pts, 10.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        sum += jp.p[i * n + j];
        if (std::abs(jp.p[i * n + j] - jp.p[j * n + i]) > 1e-15) broken.push_back("P symmetry");
      }
    }
    if (std::abs(sum - 1.0) > 1e-9) broken.push_back("P normalization");
    eval::TsneConfig cfg;
    cfg.perplexity = 10.0;
    const auto emb = eval::tsne(pts, cfg);
    if (!(emb.final_kl < emb.initial_kl)) broken.push_back("KL improvement");
  }

  // Bus: exactly-once, in-order delivery to every subscriber.
  {
    ric::MessageBus bus;
    auto a = bus.subscribe();
    auto b = bus.subscribe();
    for (std::int64_t t = 1; t <= 500; ++t) bus.publish(ric::Indication{t, {}, {}});
    for (const auto& sub : {a, b}) {
      for (std::int64_t t = 1; t <= 500; ++t) {
        const auto m = sub->poll();
        if (!m || (**m).tick != t) {
          broken.push_back("bus ordering");
          break;
        }
      }
      if (sub->poll()) broken.push_back("bus duplicate");
    }
  }

  // Loop safety: an always-Normal model leaves the trajectory unchanged.
  {
    auto model = mlp::zeros_like(std::vector<int>{8, 4});
    model.layers[0].biases[0] = 10.0;
    anomaly::FeatureStats stats;
    stats.std.fill(1.0);
    sim::SimConfig cfg;
    cfg.n_ticks = 400;
    ric::ClosedLoopOptions opts;
    opts.record_trajectory = true;
    const auto schedule = ric::demo_schedule();
    const auto log = ric::closed_loop_run(cfg, std::make_shared<const mlp::MlpModel>(model),
                                          std::make_shared<const anomaly::FeatureStats>(stats), schedule, opts);
    if (log.action_count() != 0 || log.trajectory != ric::twin_only_run(cfg, schedule)) {
      broken.push_back("loop safety");
    }
  }

  return {broken.empty(), broken.empty() ? "radio, PRB, softmax, t-SNE P/KL, bus, loop-safety properties hold"
                                         : "violated: " + broken.front()};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path base = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "rantwin_acceptance";
  fs::remove_all(base);
  const Workspace ws{base / "run"};

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {1, "dataset scale", [&] { return criterion_dataset(ws); }},
      {2, "classification accuracy", [&] { return criterion_accuracy(ws); }},
      {3, "cluster separation", [&] { return criterion_tsne(ws); }},
      {4, "near-RT twin budget", criterion_latency},
      {5, "closed loop", [&] { return criterion_closed_loop(ws); }},
      {6, "gradient oracle", criterion_gradients},
      {7, "allocation oracle", criterion_allocation},
      {8, "determinism", [&] { return criterion_determinism(ws); }},
      {9, "invariants", criterion_invariants},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail
              << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
