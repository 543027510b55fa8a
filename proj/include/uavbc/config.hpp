#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace uavbc {

/// Raised for invalid or inconsistent configuration values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed or out-of-range input data (trajectories, models, reports).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ArrivalModel {
  kPoissonGap,       // gap ~ Poisson(lambda), lambda is the mean gap in seconds
  kExponentialRate,  // gap ~ Exp(rate = lambda)
};

enum class AlphaMode {
  kSector,     // angular sector distance
  kEuclidean,  // planar distance between UAV and UE positions
};

std::string to_string(ArrivalModel m);
ArrivalModel arrival_model_from_string(const std::string& s);
std::string to_string(AlphaMode m);
AlphaMode alpha_mode_from_string(const std::string& s);

struct SimConfig {
  int n_ues = 5;
  int sectors = 36;
  int queue_limit = 200;
  int frame_packets_per_ue = 220;
  int events_per_frame = 1000;
  int frames = 50;
  int runs = 10;
  double packet_size_bits = 800000.0;
  std::vector<double> lambdas{3.0, 5.0, 10.0, 8.0, 7.0};
  double mu_s = 2.0;
  ArrivalModel arrival_model = ArrivalModel::kPoissonGap;
  double battery_min = 40000.0;
  double battery_max = 50000.0;
  double e_move = 0.5;
  double e_hover = 0.3;
  double e_tx = 0.1;
  double idle_time = 0.05;
  AlphaMode alpha_mode = AlphaMode::kSector;
  double radius_uav = 250.0;
  double radius_ue_min = 100.0;
  double radius_ue_max = 400.0;
  double ue_speed = 0.5;
  double heading_sigma = 0.3;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

/// Applies one `key = value` setting. Keys accept snake_case or kebab-case.
void apply_setting(SimConfig& cfg, const std::string& key, const std::string& value);

/// Reads a plain-text key/value file ('#' comments, blank lines ignored).
SimConfig load_sim_config(const std::filesystem::path& path, SimConfig base = {});

/// Every field, resolved, as ordered key/value pairs (used for the effective-config banner).
std::vector<std::pair<std::string, std::string>> describe(const SimConfig& cfg);

std::vector<double> parse_double_list(const std::string& s);

}  // namespace uavbc
