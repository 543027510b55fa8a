#include "uavbc/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "uavbc/config.hpp"
#include "uavbc/rng.hpp"

namespace uavbc {

using nlohmann::json;

void encode_state_into(std::span<const int> q, int active_ue, const FeatureSpec& spec,
                       std::span<double> out) {
  if (static_cast<int>(q.size()) != spec.n_ues)
    throw DataError("state has " + std::to_string(q.size()) + " queues, feature spec expects " +
                    std::to_string(spec.n_ues));
  if (static_cast<int>(out.size()) != spec.feature_dim()) throw DataError("feature row has the wrong width");
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] < 0 || q[i] > spec.normalize_by)
      throw DataError("queue length " + std::to_string(q[i]) + " outside [0, " +
                      std::to_string(spec.normalize_by) + "]");
    out[i] = static_cast<double>(q[i]) / spec.normalize_by;
  }
  if (spec.include_active_ue_onehot) {
    if (active_ue < 0 || active_ue >= spec.n_ues) throw DataError("active_ue out of range");
    for (int i = 0; i < spec.n_ues; ++i) out[static_cast<std::size_t>(spec.n_ues + i)] = i == active_ue ? 1.0 : 0.0;
  }
}

std::vector<double> encode_state(const TrajectoryRecord& r, const FeatureSpec& spec) {
  std::vector<double> out(static_cast<std::size_t>(spec.feature_dim()));
  encode_state_into(r.q, r.active_ue, spec, out);
  return out;
}

std::string to_json_line(const TrajectoryRecord& r) {
  nlohmann::ordered_json j;
  j["run"] = r.run;
  j["frame"] = r.frame;
  j["event"] = r.event;
  j["q"] = r.q;
  j["active_ue"] = r.active_ue;
  j["uav_sector"] = r.uav_sector;
  j["ue_sectors"] = r.ue_sectors;
  j["a1"] = r.a1;
  j["a2"] = r.a2;
  j["t"] = r.t;
  j["source"] = to_string(r.source);
  return j.dump();
}

namespace {

const char* const kFields[] = {"run", "frame", "event", "q", "active_ue", "uav_sector",
                               "ue_sectors", "a1", "a2", "t", "source"};

template <typename T>
T field(const json& j, const char* name, int lineno) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw DataError("line " + std::to_string(lineno) + ": field '" + name + "' missing or mistyped");
  }
}

}  // namespace

TrajectoryRecord from_json_line(const std::string& line, int lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError("line " + std::to_string(lineno) + ": malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw DataError("line " + std::to_string(lineno) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kFields), std::end(kFields), key) == std::end(kFields))
      throw DataError("line " + std::to_string(lineno) + ": unexpected field '" + key + "'");
  }
  TrajectoryRecord r;
  r.run = field<int>(j, "run", lineno);
  r.frame = field<int>(j, "frame", lineno);
  r.event = field<int>(j, "event", lineno);
  r.q = field<std::vector<int>>(j, "q", lineno);
  r.active_ue = field<int>(j, "active_ue", lineno);
  r.uav_sector = field<int>(j, "uav_sector", lineno);
  r.ue_sectors = field<std::vector<int>>(j, "ue_sectors", lineno);
  r.a1 = field<int>(j, "a1", lineno);
  r.a2 = field<int>(j, "a2", lineno);
  r.t = field<double>(j, "t", lineno);
  try {
    r.source = source_from_string(field<std::string>(j, "source", lineno));
  } catch (const DataError&) {
    throw DataError("line " + std::to_string(lineno) + ": field 'source' has an unknown value");
  }

  const auto n = static_cast<int>(r.q.size());
  auto bad = [&](const std::string& what) { return DataError("line " + std::to_string(lineno) + ": " + what); };
  if (n == 0 || static_cast<int>(r.ue_sectors.size()) != n) throw bad("field 'ue_sectors' length differs from 'q'");
  if (std::any_of(r.q.begin(), r.q.end(), [](int v) { return v < 0; })) throw bad("field 'q' has a negative length");
  if (r.a1 < 0 || r.a1 >= n) throw bad("field 'a1' out of range");
  if (r.a2 < 0 || r.a2 > 2) throw bad("field 'a2' out of range");
  if (r.active_ue < 0 || r.active_ue >= n) throw bad("field 'active_ue' out of range");
  return r;
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
  if (!out_) throw DataError("cannot open " + path.string() + " for writing");
}

void TrajectoryWriter::write(const TrajectoryRecord& r) {
  out_ << to_json_line(r) << '\n';
  ++count_;
}

void TrajectoryWriter::flush() { out_.flush(); }

std::int64_t write_jsonl(const std::vector<TrajectoryRecord>& records, const std::filesystem::path& path) {
  TrajectoryWriter w(path);
  for (const auto& r : records) w.write(r);
  w.flush();
  return w.count();
}

std::vector<TrajectoryRecord> read_jsonl(const std::filesystem::path& path, ReadMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<TrajectoryRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    try {
      out.push_back(from_json_line(line, lineno));
    } catch (const DataError&) {
      if (mode == ReadMode::kLenient) return out;
      throw;
    }
  }
  return out;
}

std::pair<std::vector<TrajectoryRecord>, std::vector<TrajectoryRecord>> split_dataset(
    const std::vector<TrajectoryRecord>& records, double ratio, std::uint64_t seed) {
  if (records.empty()) throw DataError("cannot split an empty dataset");
  if (!(ratio > 0 && ratio < 1)) throw ConfigError("split ratio must lie in (0, 1)");
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_stream(seed, 0, Stream::kSplit);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(records.size())));
  std::pair<std::vector<TrajectoryRecord>, std::vector<TrajectoryRecord>> out;
  out.first.reserve(n_train);
  out.second.reserve(records.size() - n_train);
  for (std::size_t k = 0; k < idx.size(); ++k) (k < n_train ? out.first : out.second).push_back(records[idx[k]]);
  return out;
}

}  // namespace uavbc
