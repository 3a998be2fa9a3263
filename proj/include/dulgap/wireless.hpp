/**
 * @file wireless.hpp
 * @brief Two-tier RF/THz downlink model that turns random network snapshots
 * into user-association GAP instances.
 *
 * BS indices [0, n_rf_bs) are RF base stations, [n_rf_bs, n_bs) are THz.
 * RF links: h = gamma_R * d^-alpha * chi, chi ~ Exp(1), omnidirectional.
 * THz links (LoS only): h = gamma_T * exp(-k_a d) / d^2 with directional
 * gains; the serving link is perfectly aligned (max * max), interfering
 * links draw their gain product D at random from the main/side lobes.
 * gamma = (c / (4 pi f))^2. RF and THz tiers do not interfere.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dulgap/error.hpp"
#include "dulgap/gap.hpp"

namespace dulgap {

inline constexpr double kSpeedOfLight = 3e8; // m/s

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

/// Free-space constant (c / (4 pi f))^2.
inline double free_space_gain(double frequency_hz) {
  const double g = kSpeedOfLight / (4.0 * std::numbers::pi * frequency_hz);
  return g * g;
}

enum class InterferenceMode { per_user_other_bs, as_printed_all_pairs };

inline std::string to_string(InterferenceMode m) {
  return m == InterferenceMode::per_user_other_bs ? "per_user_other_bs"
                                                  : "as_printed_all_pairs";
}

inline InterferenceMode interference_mode_from_string(const std::string &s) {
  if (s == "per_user_other_bs")
    return InterferenceMode::per_user_other_bs;
  if (s == "as_printed_all_pairs")
    return InterferenceMode::as_printed_all_pairs;
  throw InvalidArgument("unknown interference mode '" + s + "'");
}

struct NetworkConfig {
  int n_users = 4;
  int n_bs = 4;
  int n_rf_bs = 2;
  int n_thz_bs = 2;
  double radius = 100.0;         // m
  double f_rf = 2.1e9;           // Hz
  double f_thz = 1.0e12;         // Hz
  double alpha = 2.5;            // RF path-loss exponent
  double k_abs = 0.05;           // 1/m
  double p_rf = 1.0;             // W
  double p_thz = 1.0;            // W
  double g_tx_max_db = 25.0;
  double g_rx_max_db = 25.0;
  double g_tx_min_db = 0.0;
  double g_rx_min_db = 0.0;
  double beamwidth_tx = std::numbers::pi / 6.0; // rad
  double beamwidth_rx = std::numbers::pi / 6.0; // rad
  double rf_gain_db = 0.0;       // combined tx*rx gain of an RF link
  double noise_power_dbm = -70.0;
  double bandwidth = 1.0;        // Hz; 1 gives rates in bit/s/Hz
  double min_distance = 1.0;     // m
  int bs_quota = 2;
  InterferenceMode interference_mode = InterferenceMode::per_user_other_bs;

  /// Default parameter set for `users` users and `bs` base stations:
  /// half the BSs RF (rounded down), quota ceil(users / bs) + 1 so the
  /// total capacity leaves one spare slot per BS.
  static NetworkConfig defaults(int users, int bs) {
    NetworkConfig cfg;
    cfg.n_users = users;
    cfg.n_bs = bs;
    cfg.n_rf_bs = bs / 2;
    cfg.n_thz_bs = bs - cfg.n_rf_bs;
    cfg.bs_quota = bs > 0 ? (users + bs - 1) / bs + 1 : 0;
    return cfg;
  }

  double f_tx() const { return beamwidth_tx / (2.0 * std::numbers::pi); }
  double f_rx() const { return beamwidth_rx / (2.0 * std::numbers::pi); }
  double gamma_rf() const { return free_space_gain(f_rf); }
  double gamma_thz() const { return free_space_gain(f_thz); }
  double noise_watts() const { return dbm_to_watts(noise_power_dbm); }

  void validate() const {
    if (n_users < 1 || n_bs < 1)
      throw InvalidArgument("need at least one user and one BS");
    if (n_rf_bs < 0 || n_thz_bs < 0 || n_rf_bs + n_thz_bs != n_bs)
      throw InvalidArgument("RF and THz BS counts must sum to n_bs");
    if (!(min_distance > 0.0) || !(radius > min_distance))
      throw InvalidArgument("need radius > min_distance > 0");
    if (!(f_rf > 0.0) || !(f_thz > 0.0))
      throw InvalidArgument("carrier frequencies must be positive");
    if (!(alpha > 0.0))
      throw InvalidArgument("path-loss exponent must be positive");
    if (!(k_abs >= 0.0))
      throw InvalidArgument("absorption coefficient must be non-negative");
    if (!(p_rf > 0.0) || !(p_thz > 0.0))
      throw InvalidArgument("transmit powers must be positive");
    if (!(f_tx() > 0.0 && f_tx() < 1.0) || !(f_rx() > 0.0 && f_rx() < 1.0))
      throw InvalidArgument("beamwidths must lie in (0, 2*pi)");
    if (!(bandwidth > 0.0))
      throw InvalidArgument("bandwidth must be positive");
    if (bs_quota < 1)
      throw InvalidArgument("BS quota must be at least 1");
    if (static_cast<long>(bs_quota) * n_bs < n_users)
      throw InvalidArgument("total BS quota cannot serve every user");
  }
};

inline nlohmann::json to_json_value(const NetworkConfig &c) {
  return nlohmann::json{{"n_users", c.n_users},
                        {"n_bs", c.n_bs},
                        {"n_rf_bs", c.n_rf_bs},
                        {"n_thz_bs", c.n_thz_bs},
                        {"radius", c.radius},
                        {"f_rf", c.f_rf},
                        {"f_thz", c.f_thz},
                        {"alpha", c.alpha},
                        {"k_abs", c.k_abs},
                        {"p_rf", c.p_rf},
                        {"p_thz", c.p_thz},
                        {"g_tx_max_db", c.g_tx_max_db},
                        {"g_rx_max_db", c.g_rx_max_db},
                        {"g_tx_min_db", c.g_tx_min_db},
                        {"g_rx_min_db", c.g_rx_min_db},
                        {"beamwidth_tx", c.beamwidth_tx},
                        {"beamwidth_rx", c.beamwidth_rx},
                        {"rf_gain_db", c.rf_gain_db},
                        {"noise_power_dbm", c.noise_power_dbm},
                        {"bandwidth", c.bandwidth},
                        {"min_distance", c.min_distance},
                        {"bs_quota", c.bs_quota},
                        {"interference_mode", to_string(c.interference_mode)}};
}

inline NetworkConfig network_config_from_json(const nlohmann::json &j) {
  try {
    NetworkConfig c;
    j.at("n_users").get_to(c.n_users);
    j.at("n_bs").get_to(c.n_bs);
    j.at("n_rf_bs").get_to(c.n_rf_bs);
    j.at("n_thz_bs").get_to(c.n_thz_bs);
    j.at("radius").get_to(c.radius);
    j.at("f_rf").get_to(c.f_rf);
    j.at("f_thz").get_to(c.f_thz);
    j.at("alpha").get_to(c.alpha);
    j.at("k_abs").get_to(c.k_abs);
    j.at("p_rf").get_to(c.p_rf);
    j.at("p_thz").get_to(c.p_thz);
    j.at("g_tx_max_db").get_to(c.g_tx_max_db);
    j.at("g_rx_max_db").get_to(c.g_rx_max_db);
    j.at("g_tx_min_db").get_to(c.g_tx_min_db);
    j.at("g_rx_min_db").get_to(c.g_rx_min_db);
    j.at("beamwidth_tx").get_to(c.beamwidth_tx);
    j.at("beamwidth_rx").get_to(c.beamwidth_rx);
    j.at("rf_gain_db").get_to(c.rf_gain_db);
    j.at("noise_power_dbm").get_to(c.noise_power_dbm);
    j.at("bandwidth").get_to(c.bandwidth);
    j.at("min_distance").get_to(c.min_distance);
    j.at("bs_quota").get_to(c.bs_quota);
    c.interference_mode = interference_mode_from_string(
        j.at("interference_mode").get<std::string>());
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("bad network config JSON: ") + e.what());
  }
}

enum class Tier { rf, thz };

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// One random network snapshot.
struct NetworkRealization {
  std::vector<Point> user_positions;
  std::vector<Point> bs_positions;
  std::vector<Tier> bs_tiers;
  Matrix rf_fading;       // I x n_rf_bs, Exp(1) channel power draws
  Matrix alignment_gains; // I x n_thz_bs, linear tx*rx gain products D
  Matrix distances;       // I x J

  Index n_users() const { return static_cast<Index>(user_positions.size()); }
  Index n_bs() const { return static_cast<Index>(bs_positions.size()); }
};

/// Independent generator for stream `index` of a run seeded with `seed`.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// Area-uniform point in a disc centred at the origin.
template <class Rng> Point sample_in_disc(Rng &rng, double radius) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = radius * std::sqrt(unit(rng));
  const double theta = 2.0 * std::numbers::pi * unit(rng);
  return {r * std::cos(theta), r * std::sin(theta)};
}

/// Random main/side-lobe gain model for interfering THz links.
struct AlignmentModel {
  double g_tx_max = 1.0, g_tx_min = 1.0;
  double g_rx_max = 1.0, g_rx_min = 1.0;
  double f_tx = 0.5, f_rx = 0.5; // main-lobe probabilities

  static AlignmentModel from(const NetworkConfig &cfg) {
    return {db_to_linear(cfg.g_tx_max_db), db_to_linear(cfg.g_tx_min_db),
            db_to_linear(cfg.g_rx_max_db), db_to_linear(cfg.g_rx_min_db),
            cfg.f_tx(), cfg.f_rx()};
  }
};

/// Returns G_tx * G_rx with the transmitter (receiver) in its main lobe
/// with probability f_tx (f_rx), independently.
template <class Rng> double draw_alignment_gain(Rng &rng, const AlignmentModel &m) {
  if (!(m.f_tx >= 0.0 && m.f_tx <= 1.0 && m.f_rx >= 0.0 && m.f_rx <= 1.0))
    throw InvalidArgument("alignment probabilities must lie in [0, 1]");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double tx = unit(rng) < m.f_tx ? m.g_tx_max : m.g_tx_min;
  const double rx = unit(rng) < m.f_rx ? m.g_rx_max : m.g_rx_min;
  return tx * rx;
}

template <class Rng> double draw_alignment_gain(Rng &rng, const NetworkConfig &cfg) {
  return draw_alignment_gain(rng, AlignmentModel::from(cfg));
}

/// Places BSs, then users (a user is redrawn until it is at least
/// min_distance from every BS), then draws fading and alignment gains.
template <class Rng>
NetworkRealization sample_topology(const NetworkConfig &cfg, Rng &rng) {
  cfg.validate();
  NetworkRealization net;
  const Index I = cfg.n_users;
  const Index J = cfg.n_bs;
  for (Index j = 0; j < J; ++j) {
    net.bs_positions.push_back(sample_in_disc(rng, cfg.radius));
    net.bs_tiers.push_back(j < cfg.n_rf_bs ? Tier::rf : Tier::thz);
  }
  constexpr int kMaxAttempts = 100000;
  net.distances.resize(I, J);
  for (Index i = 0; i < I; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxAttempts)
        throw InvalidArgument("could not place a user at min_distance from "
                              "every BS");
      const Point p = sample_in_disc(rng, cfg.radius);
      bool ok = true;
      for (Index j = 0; j < J && ok; ++j) {
        net.distances(i, j) = distance(p, net.bs_positions[std::size_t(j)]);
        ok = net.distances(i, j) >= cfg.min_distance;
      }
      if (ok) {
        net.user_positions.push_back(p);
        break;
      }
    }
  }
  std::exponential_distribution<double> fading(1.0);
  net.rf_fading.resize(I, cfg.n_rf_bs);
  for (Index i = 0; i < I; ++i)
    for (Index j = 0; j < cfg.n_rf_bs; ++j)
      net.rf_fading(i, j) = fading(rng);
  const AlignmentModel align = AlignmentModel::from(cfg);
  net.alignment_gains.resize(I, cfg.n_thz_bs);
  for (Index i = 0; i < I; ++i)
    for (Index j = 0; j < cfg.n_thz_bs; ++j)
      net.alignment_gains(i, j) = draw_alignment_gain(rng, align);
  return net;
}

inline NetworkRealization sample_topology(const NetworkConfig &cfg,
                                          std::uint64_t seed) {
  auto rng = make_stream(seed, 0);
  return sample_topology(cfg, rng);
}

/// gamma_R * d^-alpha * fading.
inline double rf_channel_power(double distance_m, double fading,
                               const NetworkConfig &cfg) {
  return cfg.gamma_rf() * std::pow(distance_m, -cfg.alpha) * fading;
}

/// gamma_T * exp(-k_a d) / d^2.
inline double thz_channel_power(double distance_m, const NetworkConfig &cfg) {
  return cfg.gamma_thz() * std::exp(-cfg.k_abs * distance_m) /
         (distance_m * distance_m);
}

/// Linear SINR of every user/BS pair.
inline Matrix sinr_matrix(const NetworkRealization &net,
                          const NetworkConfig &cfg) {
  const Index I = net.n_users();
  const Index J = net.n_bs();
  if (J != cfg.n_bs || I != cfg.n_users || net.distances.rows() != I ||
      net.distances.cols() != J || net.rf_fading.cols() != cfg.n_rf_bs ||
      net.alignment_gains.cols() != cfg.n_thz_bs)
    throw DimensionError("realization does not match the network config");
  const Index n_rf = cfg.n_rf_bs;
  const double rf_gain = db_to_linear(cfg.rf_gain_db);
  const double serving_thz_gain =
      db_to_linear(cfg.g_tx_max_db) * db_to_linear(cfg.g_rx_max_db);
  const double noise = cfg.noise_watts();

  // Received power of every link as it would appear as interference, and
  // as the desired signal.
  Matrix interfering(I, J), desired(I, J);
  for (Index i = 0; i < I; ++i)
    for (Index j = 0; j < J; ++j) {
      const double d = net.distances(i, j);
      if (j < n_rf) {
        const double p = cfg.p_rf * rf_gain *
                         rf_channel_power(d, net.rf_fading(i, j), cfg);
        interfering(i, j) = p;
        desired(i, j) = p;
      } else {
        const double h = thz_channel_power(d, cfg);
        interfering(i, j) = cfg.p_thz * net.alignment_gains(i, j - n_rf) * h;
        desired(i, j) = cfg.p_thz * serving_thz_gain * h;
      }
    }

  const bool all_pairs =
      cfg.interference_mode == InterferenceMode::as_printed_all_pairs;
  Matrix sinr(I, J);
  for (Index i = 0; i < I; ++i)
    for (Index j = 0; j < J; ++j) {
      const Index lo = j < n_rf ? 0 : n_rf;
      const Index hi = j < n_rf ? n_rf : J;
      double agg = 0.0;
      for (Index k = all_pairs ? 0 : i; k < (all_pairs ? I : i + 1); ++k)
        for (Index m = lo; m < hi; ++m)
          if (k != i || m != j)
            agg += interfering(k, m);
      sinr(i, j) = desired(i, j) / (noise + agg);
    }
  return sinr;
}

/// W * log2(1 + SINR), elementwise.
inline Matrix rate_from_sinr(const Matrix &sinr, double bandwidth) {
  return bandwidth * sinr.array().log1p() / std::numbers::ln2;
}

inline Matrix rate_matrix(const NetworkRealization &net,
                          const NetworkConfig &cfg) {
  return rate_from_sinr(sinr_matrix(net, cfg), cfg.bandwidth);
}

/// User-association GAP: profits are rates, unit weights, capacity = quota.
inline GapInstance association_instance(const Matrix &rates,
                                        const NetworkConfig &cfg) {
  return GapInstance::unit_weight(
      rates, Vector::Constant(rates.cols(), static_cast<double>(cfg.bs_quota)));
}

} // namespace dulgap
