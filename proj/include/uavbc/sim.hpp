#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "uavbc/config.hpp"
#include "uavbc/geometry.hpp"
#include "uavbc/policy.hpp"
#include "uavbc/rng.hpp"

namespace uavbc {

struct Packet {
  int ue = 0;
  std::int64_t seq = 0;
  double arrival_time = 0;
};

enum class EnqueueResult { kEnqueued, kDropped };

/// Bounded FIFO buffer of one UE. Arrivals beyond the limit are dropped.
class UeQueue {
 public:
  UeQueue(int owner, int limit);

  EnqueueResult enqueue(const Packet& pkt);
  std::optional<Packet> dequeue();

  int owner() const { return owner_; }
  int limit() const { return limit_; }
  int size() const { return static_cast<int>(items_.size()); }
  bool empty() const { return items_.empty(); }
  const Packet& head() const { return items_.front(); }

  std::int64_t generated() const { return generated_; }
  std::int64_t enqueued() const { return enqueued_; }
  std::int64_t dropped() const { return dropped_; }
  std::int64_t delivered() const { return delivered_; }

 private:
  int owner_;
  int limit_;
  std::deque<Packet> items_;
  std::int64_t generated_ = 0;
  std::int64_t enqueued_ = 0;
  std::int64_t dropped_ = 0;
  std::int64_t delivered_ = 0;
};

/// Cumulative arrival timestamps for one UE's frame, starting after frame_start.
std::vector<double> sample_frame_arrivals(Rng& rng, double lambda, ArrivalModel model,
                                          int frame_packets, double frame_start);

/// One exponential draw with mean mu_s.
double sample_service(Rng& rng, double mu_s);

struct RngStreams {
  Rng arrivals;
  Rng service;
  Rng mobility;
  Rng battery;
  Rng layout;
};

struct PendingArrival {
  double time = 0;
  std::int64_t seq = 0;
};

struct WorldState {
  SimConfig cfg;
  int run = 0;
  double clock = 0;
  int frame = -1;  // -1 until the first frame starts
  int event = 0;   // event index within the frame
  std::int64_t events_total = 0;
  std::vector<UeQueue> queues;
  std::vector<std::deque<PendingArrival>> pending;
  std::vector<std::int64_t> next_seq;
  std::vector<std::int64_t> sampled;        // timestamps drawn so far, per UE
  std::vector<std::int64_t> never_arrived;  // discarded at frame truncation, per UE
  int uav_sector = 1;
  std::vector<int> ue_sectors;
  MobilityState mobility;
  double battery_initial = 0;
  double battery = 0;
  EnergyLedger ledger;
  bool exhausted = false;
  int active_ue = 0;
  RngStreams rng;

  std::vector<int> queue_lengths() const;
  PolicyInput policy_input(const std::vector<int>& qlens) const;
};

/// Fresh world for one run: zero queues, random layout and battery from the run's streams.
WorldState init_world(const SimConfig& cfg, int run);

/// Draws the frame's arrivals. Arrivals still in the future from the previous frame are
/// discarded and counted as never-arrived.
void start_frame(WorldState& world);

struct ArrivalCounts {
  std::vector<int> enqueued;
  std::vector<int> dropped;
};

/// Moves every pending arrival with timestamp <= t_now into its queue, in arrival order.
ArrivalCounts advance_arrivals(WorldState& world, double t_now);

struct EventOutcome {
  // State observed by the policy at decision time.
  std::vector<int> qlens;
  int active_before = 0;
  int uav_before = 1;
  double t_decision = 0;

  int served_ue = 0;
  Movement movement = Movement::kHover;
  double alpha = 1;
  double service_time = 0;
  int delivered = 0;
  std::vector<int> drops_this_event;
  double energy_spent = 0;
  bool battery_exhausted = false;
};

/// One event: arrivals, decision, one-sector move, one packet served, energy, UE mobility.
EventOutcome step_event(WorldState& world, Policy& policy);

/// generated == delivered + dropped + in-queue + pending + never-arrived, per UE.
bool conservation_holds(const WorldState& world);

}  // namespace uavbc
