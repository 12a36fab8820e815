#pragma once

#include <array>
#include <span>

#include "rantwin/rng.hpp"

namespace rantwin::radio {

struct LinkBudgetParams {
  double ref_path_loss_db = 36.6;
  double ref_distance_m = 1.0;
  double path_loss_exponent = 3.5;
  double shadowing_sigma_db = 8.0;
  double noise_density_dbm_hz = -174.0;
  double prb_bandwidth_hz = 180e3;
  double noise_figure_db = 7.0;

  // Throws ConfigError naming the first invalid field.
  void validate() const;

  friend bool operator==(const LinkBudgetParams&, const LinkBudgetParams&) = default;
};

struct ChannelSample {
  double rsrp_dbm = 0.0;
  double rssi_dbm = 0.0;  // total received power per resource element
  double rsrq_db = 0.0;
  double sinr_db = 0.0;
  int cqi = 0;

  friend bool operator==(const ChannelSample&, const ChannelSample&) = default;
};

inline constexpr int kMaxCqi = 15;
inline constexpr int kSubcarriersPerPrb = 12;

double db_to_linear(double db);
double linear_to_db(double linear);
inline double dbm_to_mw(double dbm) { return db_to_linear(dbm); }
inline double mw_to_dbm(double mw) { return linear_to_db(mw); }

// Log-distance model; distances inside the reference distance clamp to it.
double path_loss_db(double distance_m, const LinkBudgetParams& params);

double rsrp_dbm(double tx_power_per_re_dbm, double path_loss_db, double shadowing_db);

double sinr_db(double serving_mw, std::span<const double> interferers_mw, double noise_mw);

// Serving-to-total ratio per resource element. `n_prb` cancels under this
// normalization and is only validated.
double rsrq_db(double rsrp_mw_per_re, double total_rx_mw_per_re, int n_prb);

// Thermal noise plus noise figure over one subcarrier of a PRB.
double noise_per_re_mw(const LinkBudgetParams& params);

// Lower SINR bound (dB) of CQI k, k = 1..15; entry 0 is unused (-inf).
const std::array<double, kMaxCqi + 1>& cqi_thresholds_db();

int cqi_from_sinr(double sinr_db);

// Full per-RE link sample from linear powers at the UE.
ChannelSample make_channel_sample(double serving_mw, std::span<const double> interferers_mw,
                                  double noise_mw);

// AR(1) lognormal shadowing: rho * previous + sqrt(1 - rho^2) * N(0, sigma).
double evolve_shadowing(double previous_db, double rho, double sigma_db, Rng& rng);

}  // namespace rantwin::radio
