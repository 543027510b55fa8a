#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uavbc/sim.hpp"

namespace uavbc {

struct FrameMetrics {
  int frame = 0;
  std::int64_t delivered = 0;
  double service_time_total = 0;
  std::int64_t drops = 0;
  double energy = 0;
  double edt = 0;
  int longest_session = 0;

  bool operator==(const FrameMetrics&) const = default;
};

/// Energy/delay throughput of one frame in bits / (second * joule):
/// L * delivered / (service_time_total * (1 + drops) * energy).
double edt_frame(double packet_bits, std::int64_t delivered, double service_time_total, std::int64_t drops,
                 double energy);

/// Longest run of consecutive identical entries; 0 for an empty sequence.
int longest_session(std::span<const int> served);

/// Sums one frame's events. Event time (service or idle) counts toward service_time_total.
FrameMetrics aggregate_frame(std::span<const EventOutcome> events, double packet_bits, int frame);

struct MetricsRow {
  std::string policy;
  int run = 0;
  FrameMetrics m;
};

/// Writes `policy,run,frame,edt,drops,energy,longest_session,delivered`, one row per
/// (policy, run, frame). Every (policy, run) must cover frames 0..max without gaps.
void emit_report(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

std::vector<MetricsRow> read_report(const std::filesystem::path& path);

}  // namespace uavbc
