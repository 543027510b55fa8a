#include "uavbc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace uavbc {

UeQueue::UeQueue(int owner, int limit) : owner_(owner), limit_(limit) {
  if (limit < 1) throw std::invalid_argument("queue limit must be >= 1");
}

EnqueueResult UeQueue::enqueue(const Packet& pkt) {
  if (pkt.ue != owner_) throw std::invalid_argument("packet enqueued at the wrong UE");
  ++generated_;
  if (size() >= limit_) {
    ++dropped_;
    return EnqueueResult::kDropped;
  }
  items_.push_back(pkt);
  ++enqueued_;
  return EnqueueResult::kEnqueued;
}

std::optional<Packet> UeQueue::dequeue() {
  if (items_.empty()) return std::nullopt;
  Packet p = items_.front();
  items_.pop_front();
  ++delivered_;
  return p;
}

std::vector<double> sample_frame_arrivals(Rng& rng, double lambda, ArrivalModel model,
                                          int frame_packets, double frame_start) {
  if (!std::isfinite(lambda) || lambda <= 0)
    throw ConfigError("arrival parameter must be finite and > 0");
  if (frame_packets < 0) throw ConfigError("frame_packets must be >= 0");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(frame_packets));
  double t = frame_start;
  if (model == ArrivalModel::kPoissonGap) {
    std::poisson_distribution<int> gap(lambda);
    for (int i = 0; i < frame_packets; ++i) {
      t += gap(rng);
      out.push_back(t);
    }
  } else {
    std::exponential_distribution<double> gap(lambda);
    for (int i = 0; i < frame_packets; ++i) {
      t += gap(rng);
      out.push_back(t);
    }
  }
  return out;
}

double sample_service(Rng& rng, double mu_s) {
  if (!(mu_s > 0)) throw ConfigError("mu_s must be > 0");
  std::exponential_distribution<double> d(1.0 / mu_s);
  double x = d(rng);
  // libstdc++ can return exactly 0 on a zero uniform; the support is (0, inf).
  while (!(x > 0)) x = d(rng);
  return x;
}

std::vector<int> WorldState::queue_lengths() const {
  std::vector<int> q(queues.size());
  std::transform(queues.begin(), queues.end(), q.begin(), [](const UeQueue& u) { return u.size(); });
  return q;
}

PolicyInput WorldState::policy_input(const std::vector<int>& qlens) const {
  return PolicyInput{qlens, active_ue, uav_sector, ue_sectors, cfg.sectors};
}

WorldState init_world(const SimConfig& cfg, int run) {
  cfg.validate();
  const auto r = static_cast<std::uint64_t>(run);
  WorldState w;
  w.cfg = cfg;
  w.run = run;
  w.rng = RngStreams{make_stream(cfg.seed, r, Stream::kArrivals), make_stream(cfg.seed, r, Stream::kService),
                     make_stream(cfg.seed, r, Stream::kMobility), make_stream(cfg.seed, r, Stream::kBattery),
                     make_stream(cfg.seed, r, Stream::kLayout)};
  const auto n = static_cast<std::size_t>(cfg.n_ues);
  for (int i = 0; i < cfg.n_ues; ++i) w.queues.emplace_back(i, cfg.queue_limit);
  w.pending.resize(n);
  w.next_seq.assign(n, 0);
  w.sampled.assign(n, 0);
  w.never_arrived.assign(n, 0);

  const SectorRing ring(cfg.sectors);
  std::vector<int> all(static_cast<std::size_t>(cfg.sectors));
  std::iota(all.begin(), all.end(), 1);
  std::shuffle(all.begin(), all.end(), w.rng.layout);
  w.ue_sectors.assign(all.begin(), all.begin() + cfg.n_ues);
  w.uav_sector = std::uniform_int_distribution<int>(1, cfg.sectors)(w.rng.layout);

  auto& mob = w.mobility;
  mob.speed = cfg.ue_speed;
  mob.heading_sigma = cfg.heading_sigma;
  mob.r_min = cfg.radius_ue_min;
  mob.r_max = cfg.radius_ue_max;
  mob.sector = w.ue_sectors;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int s = w.ue_sectors[i];
    const double a = ring.wedge_lo(s) + (0.1 + 0.8 * unit(w.rng.layout)) * (ring.wedge_hi(s) - ring.wedge_lo(s));
    const double r = mob.r_min + (0.1 + 0.8 * unit(w.rng.layout)) * (mob.r_max - mob.r_min);
    mob.position.push_back({r * std::cos(a), r * std::sin(a)});
    mob.heading.push_back(2 * std::numbers::pi * unit(w.rng.layout));
  }

  w.battery_initial = std::uniform_real_distribution<double>(cfg.battery_min, cfg.battery_max)(w.rng.battery);
  w.battery = w.battery_initial;
  return w;
}

void start_frame(WorldState& w) {
  ++w.frame;
  w.event = 0;
  for (std::size_t i = 0; i < w.pending.size(); ++i) {
    auto& p = w.pending[i];
    // Whatever is already due stays and is processed by the next event.
    const auto first_future = std::find_if(p.begin(), p.end(), [&](const PendingArrival& a) { return a.time > w.clock; });
    w.never_arrived[i] += std::distance(first_future, p.end());
    p.erase(first_future, p.end());

    const auto times = sample_frame_arrivals(w.rng.arrivals, w.cfg.lambdas[i], w.cfg.arrival_model,
                                             w.cfg.frame_packets_per_ue, w.clock);
    for (double t : times) p.push_back({t, w.next_seq[i]++});
    w.sampled[i] += static_cast<std::int64_t>(times.size());
  }
}

ArrivalCounts advance_arrivals(WorldState& w, double t_now) {
  ArrivalCounts out{std::vector<int>(w.queues.size(), 0), std::vector<int>(w.queues.size(), 0)};
  for (std::size_t i = 0; i < w.queues.size(); ++i) {
    auto& p = w.pending[i];
    while (!p.empty() && p.front().time <= t_now) {
      const Packet pkt{static_cast<int>(i), p.front().seq, p.front().time};
      p.pop_front();
      if (w.queues[i].enqueue(pkt) == EnqueueResult::kEnqueued)
        ++out.enqueued[i];
      else
        ++out.dropped[i];
    }
  }
  return out;
}

namespace {

double distance_alpha(const WorldState& w, int ue) {
  const auto& cfg = w.cfg;
  const SectorRing ring(cfg.sectors);
  if (cfg.alpha_mode == AlphaMode::kSector) {
    const int d = angular_distance(w.uav_sector, w.ue_sectors[static_cast<std::size_t>(ue)], cfg.sectors);
    return scale_alpha(d, ring.max_distance());
  }
  const Vec2 uav = uav_position(ring, w.uav_sector, cfg.radius_uav);
  const Vec2 p = w.mobility.position[static_cast<std::size_t>(ue)];
  const double max_d = cfg.radius_uav + cfg.radius_ue_max;
  return scale_alpha(std::min(std::hypot(uav.x - p.x, uav.y - p.y), max_d), max_d);
}

}  // namespace

EventOutcome step_event(WorldState& w, Policy& policy) {
  if (w.exhausted || !(w.battery > 0)) throw std::logic_error("step_event: battery exhausted");
  if (w.frame < 0) throw std::logic_error("step_event: no frame in progress");

  EventOutcome out;
  out.drops_this_event = advance_arrivals(w, w.clock).dropped;
  out.qlens = w.queue_lengths();
  out.active_before = w.active_ue;
  out.uav_before = w.uav_sector;
  out.t_decision = w.clock;

  const PolicyInput in = w.policy_input(out.qlens);
  const Decision d = policy.decide(in);
  if (d.ue < 0 || d.ue >= w.cfg.n_ues) throw std::out_of_range("policy selected an invalid UE");
  if (d.movement != decide_with_movement(d.ue, in).movement)
    throw std::logic_error("policy movement disagrees with the selected UE's sector");
  out.served_ue = d.ue;
  out.movement = d.movement;
  w.uav_sector = apply_movement(w.uav_sector, d.movement, w.cfg.sectors);

  // One service draw per event keeps the service stream aligned across policies.
  const double draw = sample_service(w.rng.service, w.cfg.mu_s);
  out.alpha = distance_alpha(w, d.ue);
  auto& q = w.queues[static_cast<std::size_t>(d.ue)];
  if (q.dequeue()) {
    out.delivered = 1;
    out.service_time = draw * out.alpha;
  } else {
    out.service_time = w.cfg.idle_time;
  }
  w.clock += out.service_time;

  const EnergyResult e = consume_energy(w.battery, w.ledger, d.movement, out.delivered == 1, w.cfg);
  w.battery = e.battery;
  out.energy_spent = e.spent;
  out.battery_exhausted = e.exhausted;
  w.exhausted = e.exhausted;

  const SectorRing ring(w.cfg.sectors);
  for (int i = 0; i < w.cfg.n_ues; ++i) ue_mobility_step(w.mobility, ring, i, w.rng.mobility);

  w.active_ue = d.ue;
  ++w.event;
  ++w.events_total;
  return out;
}

bool conservation_holds(const WorldState& w) {
  for (std::size_t i = 0; i < w.queues.size(); ++i) {
    const auto& q = w.queues[i];
    if (q.generated() != q.enqueued() + q.dropped()) return false;
    if (q.enqueued() != q.delivered() + q.size()) return false;
    if (q.size() > q.limit()) return false;
    const auto accounted = q.delivered() + q.dropped() + q.size() +
                           static_cast<std::int64_t>(w.pending[i].size()) + w.never_arrived[i];
    if (w.sampled[i] != accounted) return false;
  }
  return true;
}

}  // namespace uavbc
