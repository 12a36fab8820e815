#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "gen.hpp"
#include "rantwin/errors.hpp"
#include "rantwin/twin_engine.hpp"

using namespace rantwin;
using namespace rantwin::twin;
using sim::MeasurementReport;

namespace {

const radio::LinkBudgetParams kLink;

MeasurementReport make(int ue, int cell, int cqi, double demand, int priority) {
  MeasurementReport r;
  r.tick = 4;
  r.ue_id = ue;
  r.serving_cell = cell;
  r.channel.cqi = cqi;
  r.channel.sinr_db = 30.0;
  r.demand_mbps = demand;
  r.priority = priority;
  return r;
}

// Exhaustive search over every integer grant vector with sum <= capacity per cell.
double brute_force_optimum(const std::vector<MeasurementReport>& reports, int capacity) {
  double best = 0.0;
  std::vector<int> g(reports.size(), 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i == reports.size()) {
      double u = 0.0;
      for (std::size_t k = 0; k < reports.size(); ++k) {
        const double rate = kLink.prb_bandwidth_hz * cqi_efficiency_table()[reports[k].channel.cqi] / 1e6;
        u += reports[k].priority * std::min(g[k] * rate, reports[k].demand_mbps);
      }
      best = std::max(best, u);
      return;
    }
    for (int n = 0; n <= left; ++n) {
      g[i] = n;
      rec(i + 1, left - n);
    }
  };
  rec(0, capacity);
  return best;
}

}  // namespace

TEST_CASE("efficiency table endpoints") {
  CHECK(efficiency_cap(0) == 0.0);
  CHECK(efficiency_cap(9) == 2.4063);
  CHECK(efficiency_cap(15) == 5.5547);
  CHECK_THROWS_AS(efficiency_cap(16), DomainError);
  for (int k = 1; k <= 15; ++k) CHECK(efficiency_cap(k) > efficiency_cap(k - 1));
}

TEST_CASE("predict_throughput") {
  CHECK(predict_throughput(0, 20.0, 15, kLink) == 0.0);
  CHECK(predict_throughput(10, 30.0, 0, kLink) == 0.0);
  // log2(11) = 3.46 exceeds the CQI 9 cap, so the cap binds.
  const double shannon = std::log(11.0) / std::log(2.0);
  REQUIRE(shannon > 2.4063);
  CHECK(predict_throughput(10, 10.0, 9, kLink) == doctest::Approx(10 * 0.18 * 2.4063));
  CHECK(predict_throughput(10, 10.0, 9, kLink) == doctest::Approx(4.33).epsilon(1e-3));
  // Low SINR: Shannon binds instead.
  CHECK(predict_throughput(4, 0.0, 15, kLink) == doctest::Approx(4 * 0.18 * 1.0));
  CHECK_THROWS_AS(predict_throughput(-1, 0.0, 3, kLink), DomainError);
}

TEST_CASE("one UE with unbounded demand gets the whole cell") {
  const std::vector<MeasurementReport> reports{make(0, 0, 10, 1e9, 2)};
  const auto cells = gen::cells(1, 50);
  const auto plan = allocate_prbs(reports, cells, kLink);
  CHECK(plan.grants.at(0) == 50);
  CHECK(plan.tick == 4);
}

TEST_CASE("higher priority is served first") {
  const std::vector<MeasurementReport> reports{make(0, 0, 10, 2.0, 1), make(1, 0, 10, 2.0, 4)};
  const auto cells = gen::cells(1, 10);
  const auto plan = allocate_prbs(reports, cells, kLink);
  CHECK(plan.grants.at(1) >= plan.grants.at(0));
  const double rate = prb_rate_mbps(10, kLink);
  CHECK(plan.grants.at(1) == static_cast<int>(std::ceil(2.0 / rate)));
}

TEST_CASE("CQI {15, 7, 7} over 10 PRBs matches exhaustive search") {
  const std::vector<MeasurementReport> reports{make(0, 0, 15, 3.0, 1), make(1, 0, 7, 3.0, 1),
                                               make(2, 0, 7, 3.0, 1)};
  const auto cells = gen::cells(1, 10);
  const auto plan = allocate_prbs(reports, cells, kLink);
  CHECK(weighted_utility(reports, plan, kLink) == doctest::Approx(brute_force_optimum(reports, 10)));
}

TEST_CASE("unknown serving cell is rejected") {
  const std::vector<MeasurementReport> reports{make(0, 7, 10, 1.0, 1)};
  CHECK_THROWS_AS(allocate_prbs(reports, gen::cells(2, 10), kLink), DomainError);
}

TEST_CASE("empty report list gives an empty plan") {
  const auto r = twin_tick({}, gen::cells(3, 50), kLink);
  CHECK(r.plan.grants.empty());
  CHECK(r.kpis.empty());
}

TEST_CASE("property: allocation never exceeds cell capacity and respects the demand cap") {
  Rng rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    const int n_cells = gen::int_in(rng, 1, 3);
    const int prbs = gen::int_in(rng, 1, 60);
    const auto cells = gen::cells(n_cells, prbs);
    std::vector<MeasurementReport> reports;
    const int n = gen::int_in(rng, 0, 40);
    for (int u = 0; u < n; ++u) reports.push_back(gen::report(rng, u, gen::int_in(rng, 0, n_cells - 1)));
    const auto result = twin_tick(reports, cells, kLink);
    REQUIRE(result.kpis.size() == reports.size());
    std::map<int, int> used;
    for (const auto& r : reports) {
      const int g = result.plan.grants.at(r.ue_id);
      REQUIRE(g >= 0);
      used[r.serving_cell] += g;
    }
    for (const auto& [cell, total] : used) REQUIRE(total <= prbs);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const auto& k = result.kpis[i];
      const double one_prb = prb_rate_mbps(reports[i].channel.cqi, kLink);
      REQUIRE(k.predicted_mbps >= 0.0);
      REQUIRE(k.predicted_mbps <= reports[i].demand_mbps + one_prb + 1e-12);
      if (result.plan.grants.at(reports[i].ue_id) == 0) REQUIRE(k.predicted_mbps == 0.0);
    }
  }
}

TEST_CASE("property: raising a UE's priority never lowers its grant") {
  Rng rng(43);
  for (int trial = 0; trial < 500; ++trial) {
    const auto cells = gen::cells(1, gen::int_in(rng, 1, 30));
    std::vector<MeasurementReport> reports;
    const int n = gen::int_in(rng, 1, 8);
    for (int u = 0; u < n; ++u) reports.push_back(gen::report(rng, u, 0));
    const std::size_t who = rng.uniform_index(static_cast<std::uint64_t>(n));
    if (reports[who].priority == 4) continue;
    const int before = allocate_prbs(reports, cells, kLink).grants.at(reports[who].ue_id);
    reports[who].priority += gen::int_in(rng, 1, 4 - reports[who].priority);
    const int after = allocate_prbs(reports, cells, kLink).grants.at(reports[who].ue_id);
    REQUIRE(after >= before);
  }
}

TEST_CASE("property: greedy is within 5% of the brute-force optimum on small instances") {
  Rng rng(47);
  for (int trial = 0; trial < 300; ++trial) {
    const int prbs = gen::int_in(rng, 1, 12);
    std::vector<MeasurementReport> reports;
    const int n = gen::int_in(rng, 1, 3);
    for (int u = 0; u < n; ++u) reports.push_back(gen::report(rng, u, 0));
    const auto plan = allocate_prbs(reports, gen::cells(1, prbs), kLink);
    const double greedy = weighted_utility(reports, plan, kLink);
    const double best = brute_force_optimum(reports, prbs);
    REQUIRE(greedy >= 0.95 * best - 1e-12);
  }
}

TEST_CASE("weight boosts shift PRBs toward the boosted UE") {
  const std::vector<MeasurementReport> reports{make(0, 0, 10, 10.0, 2), make(1, 0, 10, 10.0, 2)};
  const auto cells = gen::cells(1, 10);
  const auto plain = allocate_prbs(reports, cells, kLink);
  const auto boosted = allocate_prbs(reports, cells, kLink, {{1, 2.0}});
  CHECK(boosted.grants.at(1) >= plain.grants.at(1));
  CHECK(boosted.grants.at(1) == 10);
}

TEST_CASE("plan JSONL has one line per granted UE") {
  const std::vector<MeasurementReport> reports{make(0, 0, 10, 1.0, 2), make(1, 0, 0, 1.0, 2)};
  const auto r = twin_tick(reports, gen::cells(1, 10), kLink);
  const std::string text = plan_to_jsonl(r.plan, r.kpis);
  CHECK(text.find("\"prbs\"") != std::string::npos);
  CHECK(text.find("\"predicted_mbps\"") != std::string::npos);
}
