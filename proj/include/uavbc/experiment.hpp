#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "uavbc/metrics.hpp"
#include "uavbc/mlp.hpp"
#include "uavbc/sim.hpp"
#include "uavbc/trajectory.hpp"

namespace uavbc {

using RecordSink = std::function<void(const TrajectoryRecord&)>;
using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

TrajectoryRecord make_record(const WorldState& world, const EventOutcome& ev, Source source);

struct RunResult {
  int run = 0;
  std::vector<FrameMetrics> frames;
  bool truncated = false;  // battery ran out before the last frame finished
  std::int64_t events = 0;
  double battery_initial = 0;
  double battery_final = 0;
  EnergyLedger ledger;
  std::int64_t drops_total = 0;
  bool conserved = true;  // conservation held after every frame
};

/// Algorithm loop for one run: frames x events with the given policy. Every event is
/// passed to `sink` (if set) as a trajectory record.
RunResult run_episode(const SimConfig& cfg, int run, Policy& policy, const RecordSink& sink = {});

/// All `cfg.runs` runs in run-index order.
std::vector<RunResult> run_all(const SimConfig& cfg, const PolicyFactory& make_policy, const RecordSink& sink = {});

/// Scripted-expert trajectories for every run, in memory.
std::vector<TrajectoryRecord> expert_trajectories(const SimConfig& cfg, ExpertConfig expert = {});

std::vector<MetricsRow> to_rows(const std::string& policy, const std::vector<RunResult>& runs);

struct ComparisonSummary {
  double expert_energy = 0;  // mean per-run energy
  double clone_energy = 0;
  double expert_session = 0;  // mean per-frame longest session
  double clone_session = 0;
  double expert_drops = 0;  // mean per-frame drops
  double clone_drops = 0;
  double expert_edt = 0;
  double clone_edt = 0;
};

struct Comparison {
  std::vector<MetricsRow> rows;
  ComparisonSummary summary;
};

/// Expert and clone closed loop on identical seeds (same arrival/service/mobility streams).
/// `seeds` each supply one run (run index 0) so any seed list is reproducible on its own.
Comparison compare_policies(const SimConfig& cfg, const PolicyFactory& expert, const PolicyFactory& clone,
                            const std::vector<std::uint64_t>& seeds);

struct ShiftReport {
  std::vector<double> lambdas;
  EvalReport accuracy;  // teacher forcing against the scripted expert under `lambdas`
  Comparison closed_loop;
};

/// Re-runs the scripted expert with `lambdas` (length must equal n_ues) and scores a
/// trained model on it, plus a closed-loop comparison on the same seeds.
ShiftReport shift_study(const SimConfig& cfg, const MlpModel& model, const std::vector<double>& lambdas,
                        const std::vector<std::uint64_t>& seeds, ExpertConfig expert = {});

double mean_energy(const std::vector<RunResult>& runs);
double mean_longest_session(const std::vector<RunResult>& runs);

}  // namespace uavbc
