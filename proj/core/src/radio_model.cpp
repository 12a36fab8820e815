#include "rantwin/radio_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rantwin/errors.hpp"

namespace rantwin::radio {

void LinkBudgetParams::validate() const {
  if (!(ref_distance_m > 0.0)) throw ConfigError("must be > 0", "ref_distance_m");
  if (!(path_loss_exponent > 0.0)) throw ConfigError("must be > 0", "path_loss_exponent");
  if (!(shadowing_sigma_db >= 0.0)) throw ConfigError("must be >= 0", "shadowing_sigma_db");
  if (!(prb_bandwidth_hz > 0.0)) throw ConfigError("must be > 0", "prb_bandwidth_hz");
  if (!(noise_figure_db >= 0.0)) throw ConfigError("must be >= 0", "noise_figure_db");
  if (!std::isfinite(ref_path_loss_db)) throw ConfigError("must be finite", "ref_path_loss_db");
  if (!std::isfinite(noise_density_dbm_hz)) throw ConfigError("must be finite", "noise_density_dbm_hz");
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

double path_loss_db(double distance_m, const LinkBudgetParams& params) {
  if (!(distance_m > 0.0)) throw DomainError("path_loss_db: distance must be positive");
  const double d = std::max(distance_m, params.ref_distance_m);
  return params.ref_path_loss_db + 10.0 * params.path_loss_exponent * std::log10(d / params.ref_distance_m);
}

double rsrp_dbm(double tx_power_per_re_dbm, double path_loss_db, double shadowing_db) {
  return tx_power_per_re_dbm - path_loss_db + shadowing_db;
}

double sinr_db(double serving_mw, std::span<const double> interferers_mw, double noise_mw) {
  if (!(serving_mw > 0.0)) throw DomainError("sinr_db: serving power must be positive");
  if (!(noise_mw > 0.0)) throw DomainError("sinr_db: noise power must be positive");
  double denom = noise_mw;
  for (double p : interferers_mw) {
    if (!(p >= 0.0)) throw DomainError("sinr_db: interferer power must be non-negative");
    denom += p;
  }
  return linear_to_db(serving_mw / denom);
}

double rsrq_db(double rsrp_mw_per_re, double total_rx_mw_per_re, int n_prb) {
  if (!(rsrp_mw_per_re > 0.0) || !(total_rx_mw_per_re > 0.0)) {
    throw DomainError("rsrq_db: powers must be positive");
  }
  if (n_prb < 1) throw DomainError("rsrq_db: n_prb must be >= 1");
  if (total_rx_mw_per_re < rsrp_mw_per_re) {
    throw DomainError("rsrq_db: total received power below RSRP");
  }
  return linear_to_db(rsrp_mw_per_re / total_rx_mw_per_re);
}

double noise_per_re_mw(const LinkBudgetParams& params) {
  const double re_bandwidth_hz = params.prb_bandwidth_hz / kSubcarriersPerPrb;
  return dbm_to_mw(params.noise_density_dbm_hz + linear_to_db(re_bandwidth_hz) + params.noise_figure_db);
}

const std::array<double, kMaxCqi + 1>& cqi_thresholds_db() {
  static const std::array<double, kMaxCqi + 1> table = [] {
    std::array<double, kMaxCqi + 1> t{};
    t[0] = -std::numeric_limits<double>::infinity();
    for (int k = 1; k <= kMaxCqi; ++k) t[k] = -6.7 + 1.9 * (k - 1);
    return t;
  }();
  return table;
}

int cqi_from_sinr(double sinr_db) {
  const auto& t = cqi_thresholds_db();
  int cqi = 0;
  for (int k = 1; k <= kMaxCqi; ++k) {
    if (sinr_db >= t[k]) cqi = k;
    else break;
  }
  return cqi;
}

ChannelSample make_channel_sample(double serving_mw, std::span<const double> interferers_mw,
                                  double noise_mw) {
  double total = serving_mw + noise_mw;
  for (double p : interferers_mw) total += p;
  ChannelSample s;
  s.rsrp_dbm = mw_to_dbm(serving_mw);
  s.rssi_dbm = mw_to_dbm(total);
  s.rsrq_db = rsrq_db(serving_mw, total, 1);
  s.sinr_db = sinr_db(serving_mw, interferers_mw, noise_mw);
  s.cqi = cqi_from_sinr(s.sinr_db);
  return s;
}

double evolve_shadowing(double previous_db, double rho, double sigma_db, Rng& rng) {
  const double innovation = rng.normal(0.0, sigma_db);
  return rho * previous_db + std::sqrt(1.0 - rho * rho) * innovation;
}

}  // namespace rantwin::radio
