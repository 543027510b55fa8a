#pragma once

#include <vector>

#include "uavbc/config.hpp"
#include "uavbc/rng.hpp"

namespace uavbc {

// Sectors are numbered 1..S. Clockwise is the direction of decreasing index.

enum class Movement : int { kClockwise = 0, kCounterClockwise = 1, kHover = 2 };

struct Vec2 {
  double x = 0;
  double y = 0;
};

class SectorRing {
 public:
  explicit SectorRing(int sectors);

  int sectors() const { return sectors_; }
  double sector_width_deg() const { return 360.0 / sectors_; }
  int max_distance() const { return sectors_ / 2; }

  /// Wedge bounds of sector s in radians, [lo, hi).
  double wedge_lo(int s) const;
  double wedge_hi(int s) const;
  double wedge_center(int s) const;

  void check(int s) const;

 private:
  int sectors_;
};

/// Shortest number of one-sector steps between s1 and s2.
int angular_distance(int s1, int s2, int sectors);

/// Distance penalty on service time, dist / max_dist + 1, in [1, 2].
double scale_alpha(double dist, double max_dist);

/// One-step action that moves the UAV toward target; ties at S/2 go clockwise.
Movement movement_action(int uav_sector, int target_sector, int sectors);

int apply_movement(int uav_sector, Movement action, int sectors);

/// Position of a UAV sitting over the middle of its sector on the flight circle.
Vec2 uav_position(const SectorRing& ring, int sector, double radius);

struct MobilityState {
  std::vector<Vec2> position;
  std::vector<double> heading;
  std::vector<int> sector;
  double speed = 0.5;
  double heading_sigma = 0.3;
  double r_min = 100;
  double r_max = 400;
};

bool inside_wedge(const SectorRing& ring, int sector, double r_min, double r_max, Vec2 p);

/// Brownian step with constant speed; reflects off the wedge walls and radius band.
Vec2 ue_mobility_step(MobilityState& mob, const SectorRing& ring, int ue, Rng& rng);

struct EnergyLedger {
  double move_total = 0;
  double hover_total = 0;
  double tx_total = 0;

  double total() const { return move_total + hover_total + tx_total; }
};

struct EnergyResult {
  double battery = 0;
  double spent = 0;
  bool exhausted = false;
};

/// Deducts the movement or hover cost plus the transmission cost of one event.
/// When the battery would go negative it is clamped to zero and `exhausted` is set.
EnergyResult consume_energy(double battery, EnergyLedger& ledger, Movement movement, bool delivered,
                            const SimConfig& cfg);

}  // namespace uavbc
