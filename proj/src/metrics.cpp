#include "uavbc/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "uavbc/config.hpp"

namespace uavbc {

double edt_frame(double packet_bits, std::int64_t delivered, double service_time_total, std::int64_t drops,
                 double energy) {
  if (!(service_time_total > 0)) throw DataError("degenerate frame: zero service time");
  if (!(energy > 0)) throw DataError("degenerate frame: zero energy");
  if (delivered < 0 || drops < 0) throw DataError("negative packet count");
  return packet_bits * static_cast<double>(delivered) /
         (service_time_total * (1.0 + static_cast<double>(drops)) * energy);
}

int longest_session(std::span<const int> served) {
  int best = 0;
  int run = 0;
  for (std::size_t i = 0; i < served.size(); ++i) {
    run = (i > 0 && served[i] == served[i - 1]) ? run + 1 : 1;
    best = std::max(best, run);
  }
  return best;
}

FrameMetrics aggregate_frame(std::span<const EventOutcome> events, double packet_bits, int frame) {
  if (events.empty()) throw DataError("cannot aggregate an empty frame");
  FrameMetrics m;
  m.frame = frame;
  std::vector<int> served;
  served.reserve(events.size());
  for (const auto& e : events) {
    m.delivered += e.delivered;
    m.service_time_total += e.service_time;
    for (int d : e.drops_this_event) m.drops += d;
    m.energy += e.energy_spent;
    served.push_back(e.served_ue);
  }
  m.longest_session = longest_session(served);
  m.edt = edt_frame(packet_bits, m.delivered, m.service_time_total, m.drops, m.energy);
  return m;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void emit_report(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  std::map<std::pair<std::string, int>, std::vector<int>> frames;
  for (const auto& r : rows) frames[{r.policy, r.run}].push_back(r.m.frame);
  for (auto& [key, f] : frames) {
    std::sort(f.begin(), f.end());
    for (int expect = 0; expect <= f.back(); ++expect) {
      if (!std::binary_search(f.begin(), f.end(), expect))
        throw DataError("missing metrics for policy=" + key.first + " run=" + std::to_string(key.second) +
                        " frame=" + std::to_string(expect));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "policy,run,frame,edt,drops,energy,longest_session,delivered\n";
  for (const auto& r : rows) {
    out << r.policy << ',' << r.run << ',' << r.m.frame << ',' << fmt(r.m.edt) << ',' << r.m.drops << ','
        << fmt(r.m.energy) << ',' << r.m.longest_session << ',' << r.m.delivered << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<MetricsRow> read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "policy,run,frame,edt,drops,energy,longest_session,delivered")
    throw DataError(path.string() + ": unexpected header");
  std::vector<MetricsRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 8 columns");
    try {
      MetricsRow r;
      r.policy = cells[0];
      r.run = std::stoi(cells[1]);
      r.m.frame = std::stoi(cells[2]);
      r.m.edt = std::stod(cells[3]);
      r.m.drops = std::stoll(cells[4]);
      r.m.energy = std::stod(cells[5]);
      r.m.longest_session = std::stoi(cells[6]);
      r.m.delivered = std::stoll(cells[7]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

}  // namespace uavbc
