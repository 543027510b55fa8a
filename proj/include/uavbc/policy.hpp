#pragma once

#include <span>
#include <string>

#include "uavbc/geometry.hpp"

namespace uavbc {

enum class Source { kScripted, kHuman, kClone };

std::string to_string(Source s);
Source source_from_string(const std::string& s);

/// What a policy sees at decision time: queue lengths plus the positional context.
struct PolicyInput {
  std::span<const int> qlens;
  int active_ue = 0;
  int uav_sector = 1;
  std::span<const int> ue_sectors;
  int sectors = 36;
};

struct Decision {
  int ue = 0;
  Movement movement = Movement::kHover;
};

/// Completes a UE choice with its geometric movement action.
Decision decide_with_movement(int ue, const PolicyInput& in);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Decision decide(const PolicyInput& in) = 0;
  virtual Source source() const = 0;
};

struct ExpertConfig {
  int hysteresis_delta = 10;
};

/// Longest-queue selection with switching hysteresis. Ties in the maximum go to the
/// lowest index; the current UE is kept unless the longest queue beats it by more than delta.
int scripted_select(std::span<const int> qlens, int current, int delta);

class ExpertPolicy final : public Policy {
 public:
  explicit ExpertPolicy(ExpertConfig cfg = {});
  Decision decide(const PolicyInput& in) override;
  Source source() const override { return Source::kScripted; }
  const ExpertConfig& config() const { return cfg_; }

 private:
  ExpertConfig cfg_;
};

}  // namespace uavbc
