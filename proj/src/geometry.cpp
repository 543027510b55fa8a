#include "uavbc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace uavbc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Angle of p mapped into [lo - pi, lo + pi) so wedge comparisons never wrap.
double angle_near(Vec2 p, double lo) {
  double a = std::atan2(p.y, p.x);
  while (a < lo - std::numbers::pi) a += kTwoPi;
  while (a >= lo + std::numbers::pi) a -= kTwoPi;
  return a;
}

Vec2 reflect_across_ray(Vec2 v, double phi) {
  const double c = std::cos(2 * phi);
  const double s = std::sin(2 * phi);
  return {c * v.x + s * v.y, s * v.x - c * v.y};
}

Vec2 reflect_about_normal(Vec2 v, Vec2 n) {
  const double d = v.x * n.x + v.y * n.y;
  return {v.x - 2 * d * n.x, v.y - 2 * d * n.y};
}

}  // namespace

SectorRing::SectorRing(int sectors) : sectors_(sectors) {
  if (sectors < 2) throw std::invalid_argument("a sector ring needs at least 2 sectors");
}

void SectorRing::check(int s) const {
  if (s < 1 || s > sectors_)
    throw std::invalid_argument("sector " + std::to_string(s) + " outside [1, " +
                                std::to_string(sectors_) + "]");
}

double SectorRing::wedge_lo(int s) const { return (s - 1) * kTwoPi / sectors_; }
double SectorRing::wedge_hi(int s) const { return s * kTwoPi / sectors_; }
double SectorRing::wedge_center(int s) const { return (s - 0.5) * kTwoPi / sectors_; }

int angular_distance(int s1, int s2, int sectors) {
  const SectorRing ring(sectors);
  ring.check(s1);
  ring.check(s2);
  const int d = std::abs(s1 - s2);
  return std::min(d, sectors - d);
}

double scale_alpha(double dist, double max_dist) {
  if (!(max_dist > 0)) throw std::invalid_argument("scale_alpha: max_dist must be > 0");
  if (dist < 0 || dist > max_dist)
    throw std::invalid_argument("scale_alpha: distance outside [0, max_dist]");
  return dist / max_dist + 1.0;
}

Movement movement_action(int uav_sector, int target_sector, int sectors) {
  const SectorRing ring(sectors);
  ring.check(uav_sector);
  ring.check(target_sector);
  if (uav_sector == target_sector) return Movement::kHover;
  // Steps needed going in the decreasing-index (clockwise) direction.
  const int cw = ((uav_sector - target_sector) % sectors + sectors) % sectors;
  const int ccw = sectors - cw;
  return cw <= ccw ? Movement::kClockwise : Movement::kCounterClockwise;
}

int apply_movement(int uav_sector, Movement action, int sectors) {
  switch (action) {
    case Movement::kClockwise:
      return ((uav_sector - 2) % sectors + sectors) % sectors + 1;
    case Movement::kCounterClockwise:
      return uav_sector % sectors + 1;
    case Movement::kHover:
      return uav_sector;
  }
  throw std::invalid_argument("invalid movement action");
}

Vec2 uav_position(const SectorRing& ring, int sector, double radius) {
  const double a = ring.wedge_center(sector);
  return {radius * std::cos(a), radius * std::sin(a)};
}

bool inside_wedge(const SectorRing& ring, int sector, double r_min, double r_max, Vec2 p) {
  const double r = std::hypot(p.x, p.y);
  if (r < r_min || r > r_max) return false;
  const double lo = ring.wedge_lo(sector);
  const double a = angle_near(p, lo);
  return a >= lo && a <= ring.wedge_hi(sector);
}

Vec2 ue_mobility_step(MobilityState& mob, const SectorRing& ring, int ue, Rng& rng) {
  const auto i = static_cast<std::size_t>(ue);
  std::normal_distribution<double> turn(0.0, mob.heading_sigma);
  double& heading = mob.heading[i];
  if (mob.heading_sigma > 0) heading += turn(rng);
  if (mob.speed == 0) return mob.position[i];

  const int s = mob.sector[i];
  const double lo = ring.wedge_lo(s);
  const double hi = ring.wedge_hi(s);
  Vec2 v{mob.speed * std::cos(heading), mob.speed * std::sin(heading)};
  Vec2 p{mob.position[i].x + v.x, mob.position[i].y + v.y};

  for (int bounce = 0; bounce < 8 && !inside_wedge(ring, s, mob.r_min, mob.r_max, p); ++bounce) {
    const double r = std::hypot(p.x, p.y);
    if (r > mob.r_max || r < mob.r_min) {
      const double target = r > mob.r_max ? 2 * mob.r_max - r : 2 * mob.r_min - r;
      const Vec2 n{p.x / r, p.y / r};
      p = {n.x * target, n.y * target};
      v = reflect_about_normal(v, n);
      continue;
    }
    const double a = angle_near(p, lo);
    const double wall = a < lo ? lo : hi;
    p = reflect_across_ray(p, wall);
    v = reflect_across_ray(v, wall);
  }
  if (!inside_wedge(ring, s, mob.r_min, mob.r_max, p)) {
    // Wedge too narrow for the step length; stay put and turn around.
    p = mob.position[i];
    v = {-v.x, -v.y};
  }
  heading = std::atan2(v.y, v.x);
  mob.position[i] = p;
  return p;
}

EnergyResult consume_energy(double battery, EnergyLedger& ledger, Movement movement, bool delivered,
                            const SimConfig& cfg) {
  if (!(battery > 0)) throw std::invalid_argument("consume_energy: battery already exhausted");
  const bool moving = movement != Movement::kHover;
  const double flight = moving ? cfg.e_move : cfg.e_hover;
  const double tx = delivered ? cfg.e_tx : 0.0;

  EnergyResult out;
  double remaining = battery;
  const double flight_paid = std::min(flight, remaining);
  remaining -= flight_paid;
  const double tx_paid = std::min(tx, remaining);
  remaining -= tx_paid;

  (moving ? ledger.move_total : ledger.hover_total) += flight_paid;
  ledger.tx_total += tx_paid;
  out.battery = remaining;
  out.spent = flight_paid + tx_paid;
  out.exhausted = !(remaining > 0);
  return out;
}

}  // namespace uavbc
