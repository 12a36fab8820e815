#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "config.hpp"
#include "rantwin/errors.hpp"
#include "rantwin/io.hpp"

using namespace rantwin;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "rantwin_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string p(const fs::path& path) { return path.string(); }

// Dataset, model and stats for the small pipeline, built once.
struct Pipeline {
  fs::path dir = scratch("pipeline");
  fs::path config = dir / "config.json";
  fs::path dataset = dir / "ds.csv";
  fs::path model = dir / "model.txt";
  fs::path stats = dir / "stats.csv";

  Pipeline() {
    io::write_file(config, R"({"train": {"epochs": 40}, "sim": {"n_ticks": 300}})");
    REQUIRE(run({"--config", p(config), "gen-dataset", "--out", p(dataset), "--n-samples", "400"}).code == 0);
    REQUIRE(run({"--config", p(config), "train", "--dataset", p(dataset), "--model-out", p(model), "--stats-out",
                 p(stats)})
                .code == 0);
  }
};

const Pipeline& pipeline() {
  static const Pipeline instance;
  return instance;
}

}  // namespace

TEST_CASE("config: defaults, overrides and unknown keys") {
  const auto def = cli::parse_config("{}");
  CHECK(def.sim.n_ues == 50);
  CHECK(def.dataset.n_samples == 2505);
  const auto c = cli::parse_config(R"({"sim": {"n_ues": 7, "link": {"path_loss_exponent": 3.0}}})");
  CHECK(c.sim.n_ues == 7);
  CHECK(c.sim.link.path_loss_exponent == 3.0);
  CHECK(c.sim.n_cells == 3);
  try {
    cli::parse_config(R"({"sim": {"n_uez": 7}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "sim.n_uez");
  }
  CHECK_THROWS_AS(cli::parse_config(R"({"sim": {"n_ues": "many"}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config(R"({"sim": {"n_ues": 0}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config("{"), ConfigError);
  // The dump parses back to the same configuration.
  CHECK(cli::dump_config(cli::parse_config(cli::dump_config(c))) == cli::dump_config(c));
}

TEST_CASE("print-default-config emits the expanded defaults") {
  const auto r = run({"--print-default-config"});
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("dataset").at("n_samples") == 2505);
  CHECK(j.at("train").at("train_fraction") == 0.8);
}

TEST_CASE("usage errors") {
  CHECK(run({"gen-dataset"}).code == 2);
  CHECK(run({"no-such-command"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("gen-dataset rejects a zero sample count") {
  const auto dir = scratch("zero");
  const auto r = run({"gen-dataset", "--out", p(dir / "ds.csv"), "--n-samples", "0"});
  CHECK(r.code == 2);
  CHECK(r.err.find("n_samples must be positive") != std::string::npos);
  const auto manifest = nlohmann::json::parse(io::read_file(dir / "ds.csv.manifest.json"));
  CHECK(manifest.at("exit_code") == 2);
  CHECK(manifest.at("error").get<std::string>().find("n_samples") != std::string::npos);
}

TEST_CASE("gen-dataset reports I/O failures with exit 3") {
  const auto dir = scratch("io");
  io::write_file(dir / "file", "x");
  CHECK(run({"gen-dataset", "--out", p(dir / "file" / "ds.csv"), "--n-samples", "10"}).code == 3);
}

TEST_CASE("train: corrupt rows and missing files") {
  const auto& pl = pipeline();
  const auto dir = scratch("corrupt");
  std::string text = io::read_file(pl.dataset);
  const auto line3 = text.find('\n', text.find('\n', text.find('\n') + 1) + 1);
  text.insert(line3, "oops");
  io::write_file(dir / "bad.csv", text);
  const auto r = run({"train", "--dataset", p(dir / "bad.csv"), "--model-out", p(dir / "m"), "--stats-out",
                      p(dir / "s")});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 3") != std::string::npos);
  CHECK(run({"train", "--dataset", p(dir / "none.csv"), "--model-out", p(dir / "m"), "--stats-out", p(dir / "s")})
            .code == 3);
}

TEST_CASE("train writes model, stats, report and a manifest with digests") {
  const auto& pl = pipeline();
  CHECK(fs::exists(pl.model.string() + ".report.csv"));
  const auto manifest = nlohmann::json::parse(io::read_file(pl.model.string() + ".manifest.json"));
  CHECK(manifest.at("command") == "train");
  CHECK(manifest.at("exit_code") == 0);
  CHECK(manifest.at("seeds").at("train") == 11);
  for (const auto& o : manifest.at("outputs")) {
    CHECK(o.at("sha256") == io::sha256_file(o.at("path").get<std::string>()));
  }
  CHECK(manifest.at("config").at("train").at("epochs") == 40);
}

TEST_CASE("eval writes confusion and metrics; rejects incompatible models") {
  const auto& pl = pipeline();
  const auto dir = scratch("eval");
  const auto r = run({"eval", "--model", p(pl.model), "--stats", p(pl.stats), "--dataset", p(pl.dataset), "--out-dir",
                      p(dir / "out")});
  CHECK(r.code == 0);
  const auto metrics = nlohmann::json::parse(io::read_file(dir / "out" / "metrics.json"));
  CHECK(metrics.at("accuracy").get<double>() > 0.5);
  CHECK(fs::exists(dir / "out" / "confusion.csv"));

  io::write_file(dir / "bad_model.txt", "RANTWIN-MLP v1\n5 4\n");
  CHECK(run({"eval", "--model", p(dir / "bad_model.txt"), "--stats", p(pl.stats), "--dataset", p(pl.dataset),
             "--out-dir", p(dir / "bad")})
            .code == 2);
}

TEST_CASE("tsne: output columns and infeasible perplexity") {
  const auto& pl = pipeline();
  const auto dir = scratch("tsne");
  const auto r = run({"tsne", "--model", p(pl.model), "--stats", p(pl.stats), "--dataset", p(pl.dataset), "--out",
                      p(dir / "emb.csv"), "--iterations", "200", "--perplexity", "15"});
  CHECK(r.code == 0);
  CHECK(r.out.find("silhouette") != std::string::npos);
  const auto text = io::read_file(dir / "emb.csv");
  CHECK(text.rfind("ue_id,tick,label,x,y\n", 0) == 0);
  CHECK(run({"tsne", "--model", p(pl.model), "--stats", p(pl.stats), "--dataset", p(pl.dataset), "--out",
             p(dir / "bad.csv"), "--perplexity", "1000"})
            .code == 2);
}

TEST_CASE("closed-loop: empty schedule, missing model") {
  const auto& pl = pipeline();
  const auto dir = scratch("loop");
  io::write_file(dir / "empty.json", "[]");
  const auto r = run({"--config", p(pl.config), "closed-loop", "--model", p(pl.model), "--stats", p(pl.stats),
                      "--schedule", p(dir / "empty.json"), "--out-dir", p(dir / "out")});
  CHECK(r.code == 0);
  CHECK(io::read_file(dir / "out" / "summary.csv") ==
        "fault_id,ue_id,class,onset_tick,detect_tick,action_tick,restore_tick\n");
  const auto missing = run({"closed-loop", "--model", p(dir / "nope.txt"), "--stats", p(pl.stats), "--out-dir",
                            p(dir / "out2")});
  CHECK(missing.code == 2);
  CHECK(fs::exists(dir / "out2" / "manifest.json"));
}

TEST_CASE("demo-schedule round-trips through closed-loop") {
  const auto& pl = pipeline();
  const auto dir = scratch("demo");
  REQUIRE(run({"demo-schedule", "--out", p(dir / "s.json")}).code == 0);
  const auto r = run({"--config", p(pl.config), "closed-loop", "--model", p(pl.model), "--stats", p(pl.stats),
                      "--schedule", p(dir / "s.json"), "--out-dir", p(dir / "out"), "--log-messages"});
  CHECK(r.code == 0);
  const auto summary = io::read_file(dir / "out" / "summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 2);  // header + the fault at tick 200
  CHECK(fs::exists(dir / "out" / "messages.jsonl"));
}
