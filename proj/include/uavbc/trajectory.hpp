#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "uavbc/policy.hpp"

namespace uavbc {

/// One demonstration row: the state the policy saw and the action it took.
struct TrajectoryRecord {
  int run = 0;
  int frame = 0;
  int event = 0;
  std::vector<int> q;
  int active_ue = 0;
  int uav_sector = 1;
  std::vector<int> ue_sectors;
  int a1 = 0;
  int a2 = 2;
  double t = 0;
  Source source = Source::kScripted;

  bool operator==(const TrajectoryRecord&) const = default;
};

struct FeatureSpec {
  int n_ues = 5;
  int normalize_by = 200;
  bool include_active_ue_onehot = true;

  int feature_dim() const { return include_active_ue_onehot ? 2 * n_ues : n_ues; }
  bool operator==(const FeatureSpec&) const = default;
};

/// Normalized queue lengths, optionally followed by a one-hot of the active UE.
std::vector<double> encode_state(const TrajectoryRecord& r, const FeatureSpec& spec);

/// Same encoding written into a caller-provided row (size feature_dim).
void encode_state_into(std::span<const int> q, int active_ue, const FeatureSpec& spec,
                       std::span<double> out);

std::string to_json_line(const TrajectoryRecord& r);
TrajectoryRecord from_json_line(const std::string& line, int lineno);

/// Append-only JSON-lines writer; one record per line, flushed on close.
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(const std::filesystem::path& path);
  void write(const TrajectoryRecord& r);
  void flush();
  std::int64_t count() const { return count_; }

 private:
  std::ofstream out_;
  std::int64_t count_ = 0;
};

std::int64_t write_jsonl(const std::vector<TrajectoryRecord>& records, const std::filesystem::path& path);

enum class ReadMode { kStrict, kLenient };

/// Strict mode rejects the whole file on the first bad line; lenient returns the valid prefix.
std::vector<TrajectoryRecord> read_jsonl(const std::filesystem::path& path, ReadMode mode = ReadMode::kStrict);

/// Deterministic shuffled split; |train| = round(ratio * N).
std::pair<std::vector<TrajectoryRecord>, std::vector<TrajectoryRecord>> split_dataset(
    const std::vector<TrajectoryRecord>& records, double ratio, std::uint64_t seed);

}  // namespace uavbc
