#include "uavbc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace uavbc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string normalize_key(std::string k) {
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

int parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("'" + key + "': trailing characters in '" + v + "'");
  return static_cast<int>(out);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("'" + key + "': trailing characters in '" + v + "'");
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(ArrivalModel m) {
  return m == ArrivalModel::kPoissonGap ? "poisson-gap" : "exponential-rate";
}

ArrivalModel arrival_model_from_string(const std::string& s) {
  if (s == "poisson-gap") return ArrivalModel::kPoissonGap;
  if (s == "exponential-rate") return ArrivalModel::kExponentialRate;
  throw ConfigError("unknown arrival_model '" + s + "'");
}

std::string to_string(AlphaMode m) { return m == AlphaMode::kSector ? "sector" : "euclidean"; }

AlphaMode alpha_mode_from_string(const std::string& s) {
  if (s == "sector") return AlphaMode::kSector;
  if (s == "euclidean") return AlphaMode::kEuclidean;
  throw ConfigError("unknown alpha_mode '" + s + "'");
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_double("lambdas", item));
  }
  return out;
}

void SimConfig::validate() const {
  auto positive_finite = [](double v) { return std::isfinite(v) && v > 0; };
  if (n_ues < 1) throw ConfigError("n_ues must be >= 1");
  if (sectors < 2) throw ConfigError("sectors must be >= 2");
  if (n_ues > sectors) throw ConfigError("n_ues must not exceed sectors (one UE per sector)");
  if (queue_limit < 1) throw ConfigError("queue_limit must be >= 1");
  if (frame_packets_per_ue < 0) throw ConfigError("frame_packets_per_ue must be >= 0");
  if (events_per_frame < 1) throw ConfigError("events_per_frame must be >= 1");
  if (frames < 1) throw ConfigError("frames must be >= 1");
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (!positive_finite(packet_size_bits)) throw ConfigError("packet_size_bits must be > 0");
  if (static_cast<int>(lambdas.size()) != n_ues)
    throw ConfigError("lambdas has " + std::to_string(lambdas.size()) + " entries, n_ues is " +
                      std::to_string(n_ues));
  for (double l : lambdas)
    if (!positive_finite(l)) throw ConfigError("every lambda must be finite and > 0");
  if (!positive_finite(mu_s)) throw ConfigError("mu_s must be > 0");
  if (!positive_finite(battery_min) || battery_max < battery_min)
    throw ConfigError("battery range must satisfy 0 < min <= max");
  if (!(e_hover >= 0) || !(e_move > e_hover)) throw ConfigError("need e_move > e_hover >= 0");
  if (!(e_tx >= 0)) throw ConfigError("e_tx must be >= 0");
  if (!positive_finite(idle_time)) throw ConfigError("idle_time must be > 0");
  if (!(radius_ue_min > 0) || !(radius_ue_max > radius_ue_min))
    throw ConfigError("UE radius band must satisfy 0 < min < max");
  if (!positive_finite(radius_uav)) throw ConfigError("radius_uav must be > 0");
  if (!(ue_speed >= 0) || !(heading_sigma >= 0)) throw ConfigError("mobility parameters must be >= 0");
}

void apply_setting(SimConfig& cfg, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = normalize_key(trim(raw_key));
  const std::string v = trim(raw_value);
  if (key == "n_ues") cfg.n_ues = parse_int(key, v);
  else if (key == "sectors") cfg.sectors = parse_int(key, v);
  else if (key == "queue_limit") cfg.queue_limit = parse_int(key, v);
  else if (key == "frame_packets_per_ue") cfg.frame_packets_per_ue = parse_int(key, v);
  else if (key == "events_per_frame") cfg.events_per_frame = parse_int(key, v);
  else if (key == "frames") cfg.frames = parse_int(key, v);
  else if (key == "runs") cfg.runs = parse_int(key, v);
  else if (key == "packet_size_bits") cfg.packet_size_bits = parse_double(key, v);
  else if (key == "lambdas") cfg.lambdas = parse_double_list(v);
  else if (key == "mu_s") cfg.mu_s = parse_double(key, v);
  else if (key == "arrival_model") cfg.arrival_model = arrival_model_from_string(v);
  else if (key == "battery_init_range") {
    const auto r = parse_double_list(v);
    if (r.size() != 2) throw ConfigError("battery_init_range needs two values 'min,max'");
    cfg.battery_min = r[0];
    cfg.battery_max = r[1];
  } else if (key == "battery_min") cfg.battery_min = parse_double(key, v);
  else if (key == "battery_max") cfg.battery_max = parse_double(key, v);
  else if (key == "e_move") cfg.e_move = parse_double(key, v);
  else if (key == "e_hover") cfg.e_hover = parse_double(key, v);
  else if (key == "e_tx") cfg.e_tx = parse_double(key, v);
  else if (key == "idle_time") cfg.idle_time = parse_double(key, v);
  else if (key == "alpha_mode") cfg.alpha_mode = alpha_mode_from_string(v);
  else if (key == "radius_uav") cfg.radius_uav = parse_double(key, v);
  else if (key == "radius_ue_min") cfg.radius_ue_min = parse_double(key, v);
  else if (key == "radius_ue_max") cfg.radius_ue_max = parse_double(key, v);
  else if (key == "ue_speed") cfg.ue_speed = parse_double(key, v);
  else if (key == "heading_sigma") cfg.heading_sigma = parse_double(key, v);
  else if (key == "seed") {
    try {
      std::size_t pos = 0;
      cfg.seed = std::stoull(v, &pos);
      if (pos != v.size()) throw ConfigError("'seed': trailing characters");
    } catch (const std::logic_error&) {
      throw ConfigError("'seed': expected an unsigned integer, got '" + v + "'");
    }
  } else {
    throw ConfigError("unknown configuration key '" + raw_key + "'");
  }
}

SimConfig load_sim_config(const std::filesystem::path& path, SimConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

std::vector<std::pair<std::string, std::string>> describe(const SimConfig& c) {
  std::string lambdas;
  for (std::size_t i = 0; i < c.lambdas.size(); ++i) {
    if (i) lambdas += ",";
    lambdas += fmt_double(c.lambdas[i]);
  }
  return {
      {"n_ues", std::to_string(c.n_ues)},
      {"sectors", std::to_string(c.sectors)},
      {"queue_limit", std::to_string(c.queue_limit)},
      {"frame_packets_per_ue", std::to_string(c.frame_packets_per_ue)},
      {"events_per_frame", std::to_string(c.events_per_frame)},
      {"frames", std::to_string(c.frames)},
      {"runs", std::to_string(c.runs)},
      {"packet_size_bits", fmt_double(c.packet_size_bits)},
      {"lambdas", lambdas},
      {"mu_s", fmt_double(c.mu_s)},
      {"arrival_model", to_string(c.arrival_model)},
      {"battery_init_range", fmt_double(c.battery_min) + "," + fmt_double(c.battery_max)},
      {"e_move", fmt_double(c.e_move)},
      {"e_hover", fmt_double(c.e_hover)},
      {"e_tx", fmt_double(c.e_tx)},
      {"idle_time", fmt_double(c.idle_time)},
      {"alpha_mode", to_string(c.alpha_mode)},
      {"radius_uav", fmt_double(c.radius_uav)},
      {"radius_ue_min", fmt_double(c.radius_ue_min)},
      {"radius_ue_max", fmt_double(c.radius_ue_max)},
      {"ue_speed", fmt_double(c.ue_speed)},
      {"heading_sigma", fmt_double(c.heading_sigma)},
      {"seed", std::to_string(c.seed)},
  };
}

}  // namespace uavbc
