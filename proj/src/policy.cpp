#include "uavbc/policy.hpp"

#include <stdexcept>

#include "uavbc/config.hpp"

namespace uavbc {

std::string to_string(Source s) {
  switch (s) {
    case Source::kScripted:
      return "scripted";
    case Source::kHuman:
      return "human";
    case Source::kClone:
      return "clone";
  }
  return "scripted";
}

Source source_from_string(const std::string& s) {
  if (s == "scripted") return Source::kScripted;
  if (s == "human") return Source::kHuman;
  if (s == "clone") return Source::kClone;
  throw DataError("unknown source '" + s + "'");
}

Decision decide_with_movement(int ue, const PolicyInput& in) {
  if (ue < 0 || static_cast<std::size_t>(ue) >= in.ue_sectors.size())
    throw std::out_of_range("selected UE " + std::to_string(ue) + " out of range");
  return {ue, movement_action(in.uav_sector, in.ue_sectors[static_cast<std::size_t>(ue)], in.sectors)};
}

int scripted_select(std::span<const int> qlens, int current, int delta) {
  if (qlens.empty()) throw std::invalid_argument("scripted_select: no queues");
  if (current < 0 || static_cast<std::size_t>(current) >= qlens.size())
    throw std::out_of_range("scripted_select: current UE out of range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < qlens.size(); ++i)
    if (qlens[i] > qlens[best]) best = i;
  if (qlens[best] - qlens[static_cast<std::size_t>(current)] <= delta) return current;
  return static_cast<int>(best);
}

ExpertPolicy::ExpertPolicy(ExpertConfig cfg) : cfg_(cfg) {
  if (cfg_.hysteresis_delta < 0) throw ConfigError("hysteresis_delta must be >= 0");
}

Decision ExpertPolicy::decide(const PolicyInput& in) {
  return decide_with_movement(scripted_select(in.qlens, in.active_ue, cfg_.hysteresis_delta), in);
}

}  // namespace uavbc
