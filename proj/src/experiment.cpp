#include "uavbc/experiment.hpp"

#include <numeric>

namespace uavbc {

TrajectoryRecord make_record(const WorldState& w, const EventOutcome& ev, Source source) {
  TrajectoryRecord r;
  r.run = w.run;
  r.frame = w.frame;
  r.event = w.event - 1;
  r.q = ev.qlens;
  r.active_ue = ev.active_before;
  r.uav_sector = ev.uav_before;
  r.ue_sectors = w.ue_sectors;
  r.a1 = ev.served_ue;
  r.a2 = static_cast<int>(ev.movement);
  r.t = ev.t_decision;
  r.source = source;
  return r;
}

RunResult run_episode(const SimConfig& cfg, int run, Policy& policy, const RecordSink& sink) {
  WorldState w = init_world(cfg, run);
  RunResult res;
  res.run = run;
  res.battery_initial = w.battery_initial;
  std::vector<EventOutcome> frame_events;
  frame_events.reserve(static_cast<std::size_t>(cfg.events_per_frame));
  for (int f = 0; f < cfg.frames && !w.exhausted; ++f) {
    start_frame(w);
    frame_events.clear();
    for (int e = 0; e < cfg.events_per_frame; ++e) {
      frame_events.push_back(step_event(w, policy));
      if (sink) sink(make_record(w, frame_events.back(), policy.source()));
      if (w.exhausted) break;
    }
    res.frames.push_back(aggregate_frame(frame_events, cfg.packet_size_bits, w.frame));
    res.drops_total += res.frames.back().drops;
    res.conserved = res.conserved && conservation_holds(w);
  }
  res.truncated = w.exhausted;
  res.events = w.events_total;
  res.battery_final = w.battery;
  res.ledger = w.ledger;
  return res;
}

std::vector<RunResult> run_all(const SimConfig& cfg, const PolicyFactory& make_policy, const RecordSink& sink) {
  cfg.validate();
  std::vector<RunResult> out;
  for (int r = 0; r < cfg.runs; ++r) {
    auto policy = make_policy();
    out.push_back(run_episode(cfg, r, *policy, sink));
  }
  return out;
}

std::vector<TrajectoryRecord> expert_trajectories(const SimConfig& cfg, ExpertConfig expert) {
  std::vector<TrajectoryRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.runs) * static_cast<std::size_t>(cfg.frames) *
                  static_cast<std::size_t>(cfg.events_per_frame));
  run_all(
      cfg, [&] { return std::make_unique<ExpertPolicy>(expert); },
      [&](const TrajectoryRecord& r) { records.push_back(r); });
  return records;
}

std::vector<MetricsRow> to_rows(const std::string& policy, const std::vector<RunResult>& runs) {
  std::vector<MetricsRow> rows;
  for (const auto& r : runs)
    for (const auto& f : r.frames) rows.push_back({policy, r.run, f});
  return rows;
}

double mean_energy(const std::vector<RunResult>& runs) {
  if (runs.empty()) return 0;
  double s = 0;
  for (const auto& r : runs) s += r.ledger.total();
  return s / static_cast<double>(runs.size());
}

double mean_longest_session(const std::vector<RunResult>& runs) {
  double s = 0;
  std::size_t n = 0;
  for (const auto& r : runs)
    for (const auto& f : r.frames) {
      s += f.longest_session;
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

namespace {

double mean_frame_field(const std::vector<RunResult>& runs, double FrameMetrics::*field_d,
                        std::int64_t FrameMetrics::*field_i) {
  double s = 0;
  std::size_t n = 0;
  for (const auto& r : runs)
    for (const auto& f : r.frames) {
      s += field_d ? f.*field_d : static_cast<double>(f.*field_i);
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace

Comparison compare_policies(const SimConfig& cfg, const PolicyFactory& expert, const PolicyFactory& clone,
                            const std::vector<std::uint64_t>& seeds) {
  std::vector<RunResult> expert_runs;
  std::vector<RunResult> clone_runs;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    SimConfig c = cfg;
    c.seed = seeds[i];
    auto pe = expert();
    auto pc = clone();
    RunResult re = run_episode(c, 0, *pe);
    RunResult rc = run_episode(c, 0, *pc);
    re.run = rc.run = static_cast<int>(i);
    expert_runs.push_back(std::move(re));
    clone_runs.push_back(std::move(rc));
  }
  Comparison out;
  out.rows = to_rows("expert", expert_runs);
  const auto clone_rows = to_rows("clone", clone_runs);
  out.rows.insert(out.rows.end(), clone_rows.begin(), clone_rows.end());
  auto& s = out.summary;
  s.expert_energy = mean_energy(expert_runs);
  s.clone_energy = mean_energy(clone_runs);
  s.expert_session = mean_longest_session(expert_runs);
  s.clone_session = mean_longest_session(clone_runs);
  s.expert_drops = mean_frame_field(expert_runs, nullptr, &FrameMetrics::drops);
  s.clone_drops = mean_frame_field(clone_runs, nullptr, &FrameMetrics::drops);
  s.expert_edt = mean_frame_field(expert_runs, &FrameMetrics::edt, nullptr);
  s.clone_edt = mean_frame_field(clone_runs, &FrameMetrics::edt, nullptr);
  return out;
}

ShiftReport shift_study(const SimConfig& cfg, const MlpModel& model, const std::vector<double>& lambdas,
                        const std::vector<std::uint64_t>& seeds, ExpertConfig expert) {
  if (static_cast<int>(lambdas.size()) != cfg.n_ues)
    throw ConfigError("expected " + std::to_string(cfg.n_ues) + " lambdas, got " + std::to_string(lambdas.size()));
  if (seeds.empty()) throw ConfigError("shift study needs at least one seed");
  SimConfig shifted = cfg;
  shifted.lambdas = lambdas;
  shifted.validate();

  ShiftReport out;
  out.lambdas = lambdas;
  std::vector<TrajectoryRecord> records;
  for (auto seed : seeds) {
    SimConfig c = shifted;
    c.seed = seed;
    c.runs = 1;
    auto part = expert_trajectories(c, expert);
    records.insert(records.end(), part.begin(), part.end());
  }
  out.accuracy = evaluate(model, records);
  out.closed_loop = compare_policies(
      shifted, [&] { return std::make_unique<ExpertPolicy>(expert); },
      [&] { return std::make_unique<ClonePolicy>(model); }, seeds);
  return out;
}

}  // namespace uavbc
