// End-to-end acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "uavbc/config.hpp"
#include "uavbc/experiment.hpp"
#include "uavbc/geometry.hpp"
#include "uavbc/metrics.hpp"
#include "uavbc/mlp.hpp"
#include "uavbc/policy.hpp"
#include "uavbc/sim.hpp"
#include "uavbc/trajectory.hpp"

using namespace uavbc;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Each failed property check appends a message; the suite passes when none do.
struct Checks {
  std::vector<std::string> failed;
  int total = 0;
  void expect(bool ok, const std::string& what) {
    ++total;
    if (!ok) failed.push_back(what);
  }
};

void sim_properties(Checks& c) {
  SimConfig cfg;
  cfg.runs = 1;
  cfg.frames = 8;
  cfg.seed = 31;
  ExpertPolicy expert;
  auto w = init_world(cfg, 0);
  bool bounded = true, conserved = true;
  for (int f = 0; f < cfg.frames && !w.exhausted; ++f) {
    start_frame(w);
    for (int e = 0; e < cfg.events_per_frame && !w.exhausted; ++e) {
      step_event(w, expert);
      for (int q : w.queue_lengths()) bounded = bounded && q >= 0 && q <= cfg.queue_limit;
      conserved = conserved && conservation_holds(w);
    }
  }
  c.expect(bounded, "queue lengths left [0, queue_limit]");
  c.expect(conserved, "queue conservation broke");

  cfg.frames = 3;
  for (const auto& r : run_all(cfg, [] { return std::make_unique<ExpertPolicy>(); })) {
    c.expect(r.conserved, "run_all reported a conservation failure");
    c.expect(std::abs(r.battery_initial - r.battery_final - r.ledger.total()) < 1e-6 * r.battery_initial,
             "energy ledger does not reconcile with the battery");
  }
}

void geometry_properties(Checks& c) {
  for (int s : {2, 3, 4, 5, 36}) {
    const int max_dist = s / 2;
    c.expect(scale_alpha(0, max_dist) == 1.0, "alpha(0) != 1");
    c.expect(scale_alpha(max_dist, max_dist) == 2.0, "alpha(max) != 2");
    for (int from = 1; from <= s; ++from)
      for (int to = 1; to <= s; ++to) {
        const int d = angular_distance(from, to, s);
        const double a = scale_alpha(d, max_dist);
        c.expect(a >= 1.0 && a <= 2.0, "alpha out of [1, 2]");
        if (d > 0) c.expect(a > scale_alpha(d - 1, max_dist), "alpha not increasing in distance");
        const int next = apply_movement(from, movement_action(from, to, s), s);
        c.expect(angular_distance(next, to, s) == std::max(d - 1, 0), "movement did not close the distance by one");
      }
  }
}

void learner_properties(Checks& c) {
  // softmax of equal logits is uniform; shifting logits changes nothing
  const std::vector<double> flat(5, 3.7);
  for (double p : softmax(flat)) c.expect(std::abs(p - 0.2) < 1e-15, "softmax of equal logits not uniform");
  const std::vector<double> t{1.0, -2.0, 0.5}, t2{101.0, 98.0, 100.5};
  const auto p1 = softmax(t), p2 = softmax(t2);
  double z = 0;
  for (double v : t) z += std::exp(v);
  for (std::size_t i = 0; i < t.size(); ++i) {
    c.expect(std::abs(p1[i] - p2[i]) < 1e-14, "softmax not shift invariant");
    c.expect(std::abs(p1[i] - std::exp(t[i]) / z) < 1e-15, "softmax differs from exp/sum");
  }
  Eigen::MatrixXd y(3, 1), q(3, 1);
  y << 0, 1, 0;
  q << 0.2, 0.5, 0.3;
  c.expect(std::abs(ce_loss(y, q).sum - std::log(2.0)) < 1e-15, "cross-entropy of p=0.5 is not ln 2");
  q << 0.5, 0.0, 0.5;
  c.expect(std::abs(ce_loss(y, q).sum + std::log(kProbClip)) < 1e-9, "cross-entropy not clipped");

  FeatureSpec spec;
  auto m = make_model(spec, {40, 80, 160, 80}, 5);
  init_he_uniform(m, 77);
  std::mt19937_64 rng(78);
  std::uniform_real_distribution<double> u(0.0, 1.0), ub(-0.1, 0.1);
  for (auto& l : m.layers)
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = ub(rng);
  Eigen::MatrixXd x(spec.feature_dim(), 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  const std::vector<int> labels{4, 0, 3, 1, 2, 2};
  const Gradients g = backward(m, x, labels);
  const double h = 1e-5;
  double worst = 0;
  auto check = [&](double& p, double analytic) {
    const double keep = p;
    p = keep + h;
    const double up = batch_loss(m, x, labels);
    p = keep - h;
    const double down = batch_loss(m, x, labels);
    p = keep;
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-7}));
  };
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    for (Eigen::Index i = 0; i < m.layers[k].w.size(); ++i) check(m.layers[k].w.data()[i], g.dw[k].data()[i]);
    for (Eigen::Index i = 0; i < m.layers[k].b.size(); ++i) check(m.layers[k].b(i), g.db[k](i));
  }
  c.expect(worst < 1e-4, "full-model gradient check relative error " + fmt(worst, 8));
}

void metrics_properties(Checks& c) {
  c.expect(edt_frame(800000, 10, 20, 0, 100) == 4000.0, "EDT hand value");
  c.expect(edt_frame(800000, 0, 20, 3, 100) == 0.0, "EDT with nothing delivered");
  for (int d = 0; d < 30; ++d) {
    c.expect(edt_frame(800000, 100, 30, d + 1, 40) < edt_frame(800000, 100, 30, d, 40), "EDT not falling in drops");
    c.expect(edt_frame(800000, d + 1, 30, 4, 40) > edt_frame(800000, d, 30, 4, 40), "EDT not rising in deliveries");
    c.expect(edt_frame(800000, 50, 30 + d + 1, 4, 40) < edt_frame(800000, 50, 30 + d, 4, 40), "EDT not falling in time");
    c.expect(edt_frame(800000, 50, 30, 4, 40 + d + 1) < edt_frame(800000, 50, 30, 4, 40 + d), "EDT not falling in energy");
  }
}

void rerun_properties(Checks& c, const std::filesystem::path& dir) {
  SimConfig cfg;
  cfg.runs = 2;
  cfg.frames = 2;
  cfg.seed = 99;
  write_jsonl(expert_trajectories(cfg), dir / "a.jsonl");
  write_jsonl(expert_trajectories(cfg), dir / "b.jsonl");
  c.expect(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"), "trajectory reruns differ");

  const auto make = [] { return std::make_unique<ExpertPolicy>(); };
  emit_report(to_rows("expert", run_all(cfg, make)), dir / "a.csv");
  emit_report(to_rows("expert", run_all(cfg, make)), dir / "b.csv");
  c.expect(slurp(dir / "a.csv") == slurp(dir / "b.csv"), "metrics reruns differ");

  FeatureSpec spec;
  const auto recs = read_jsonl(dir / "a.jsonl");
  const auto [tr, va] = split_dataset(recs, 0.8, 3);
  TrainConfig tc;
  tc.epochs = 2;
  tc.hidden = {16};
  for (const char* name : {"m1.json", "m2.json"})
    save_model(train(make_dataset(tr, spec), make_dataset(va, spec), spec, 5, tc).model, dir / name);
  c.expect(slurp(dir / "m1.json") == slurp(dir / "m2.json"), "training reruns differ");
}

// All 216 states of three queues in 0..5, from every starting UE, with no hysteresis:
// the first argmax wins unless the current UE already holds the maximum.
bool expert_oracle(std::string& detail) {
  int states = 0, mismatches = 0;
  for (int a = 0; a <= 5; ++a)
    for (int b = 0; b <= 5; ++b)
      for (int d = 0; d <= 5; ++d) {
        const std::vector<int> q{a, b, d};
        const int top = *std::max_element(q.begin(), q.end());
        const int first = static_cast<int>(std::find(q.begin(), q.end(), top) - q.begin());
        ++states;
        for (int cur = 0; cur < 3; ++cur) {
          const int expected = q[static_cast<std::size_t>(cur)] == top ? cur : first;
          if (scripted_select(q, cur, 0) != expected) ++mismatches;
        }
      }
  detail = std::to_string(states) + " states x 3 starting UEs, " + std::to_string(mismatches) + " mismatches";
  return states == 216 && mismatches == 0;
}

double mean_frames(const std::vector<MetricsRow>& rows, const std::string& policy, int lo, int hi) {
  double sum = 0;
  int n = 0;
  for (const auto& r : rows)
    if (r.policy == policy && r.m.frame >= lo && r.m.frame <= hi) {
      sum += static_cast<double>(r.m.drops);
      ++n;
    }
  return n ? sum / n : 0.0;
}

}  // namespace

int main() {
  const auto work = std::filesystem::temp_directory_path() / "uavbc_acceptance";
  std::filesystem::remove_all(work);
  std::filesystem::create_directories(work);

  // Property suites
  {
    const auto t0 = Clock::now();
    Checks c;
    sim_properties(c);
    geometry_properties(c);
    learner_properties(c);
    metrics_properties(c);
    rerun_properties(c, work);
    const double secs = seconds_since(t0);
    std::string detail = std::to_string(c.total - static_cast<int>(c.failed.size())) + "/" +
                         std::to_string(c.total) + " checks in " + fmt(secs, 1) + " s";
    for (const auto& f : c.failed) detail += "; " + f;
    report("property suites", c.failed.empty() && secs < 120, detail);
  }

  {
    std::string detail;
    const bool ok = expert_oracle(detail);
    report("expert rule oracle", ok, detail);
  }

  const SimConfig cfg;
  const FeatureSpec spec;
  const TrainConfig tc;
  const std::vector<std::uint64_t> test_seeds{777, 778};
  const std::vector<std::uint64_t> loop_seeds{101, 102, 103, 104, 105};

  auto t0 = Clock::now();
  const auto records = expert_trajectories(cfg);
  std::cout << "# generated " << records.size() << " expert records in " << fmt(seconds_since(t0), 1) << " s"
            << std::endl;
  t0 = Clock::now();
  const auto [tr, va] = split_dataset(records, 0.8, tc.seed);
  const auto trained = train(make_dataset(tr, spec), make_dataset(va, spec), spec, cfg.n_ues, tc);
  std::cout << "# trained " << tc.epochs << " epochs in " << fmt(seconds_since(t0), 1)
            << " s, final val accuracy " << fmt(trained.history.back().val_acc) << std::endl;

  const auto matched = shift_study(cfg, trained.model, cfg.lambdas, test_seeds);
  report("cloning accuracy", matched.accuracy.accuracy >= 0.95,
         "test accuracy " + fmt(matched.accuracy.accuracy) + " on " + std::to_string(matched.accuracy.samples) +
             " fresh-seed records (need >= 0.95)");

  const std::vector<double> shifted_lambdas{4, 6, 9, 7, 8};
  const auto shifted = shift_study(cfg, trained.model, shifted_lambdas, test_seeds);
  const double drop_points = 100.0 * (matched.accuracy.accuracy - shifted.accuracy.accuracy);
  report("distribution shift", drop_points >= 5.0,
         "accuracy " + fmt(matched.accuracy.accuracy) + " -> " + fmt(shifted.accuracy.accuracy) + " under lambdas "
             "(4,6,9,7,8), drop " + fmt(drop_points, 2) + " points (need >= 5)");

  const auto cmp = compare_policies(
      cfg, [] { return std::make_unique<ExpertPolicy>(); },
      [&] { return std::make_unique<ClonePolicy>(trained.model); }, loop_seeds);
  const auto& s = cmp.summary;
  report("closed-loop energy ordering", s.clone_energy >= s.expert_energy * 0.99,
         "clone " + fmt(s.clone_energy, 1) + " J vs expert " + fmt(s.expert_energy, 1) + " J over " +
             std::to_string(loop_seeds.size()) + " seeds (clone >= expert, 1% tie allowed)");

  const double gap = std::abs(s.clone_session - s.expert_session) / s.expert_session;
  report("longest session parity", gap <= 0.10,
         "clone " + fmt(s.clone_session, 2) + " vs expert " + fmt(s.expert_session, 2) + ", relative gap " +
             fmt(gap) + " (need <= 0.10)");

  bool trend = true;
  std::string detail;
  for (const char* policy : {"expert", "clone"}) {
    const double early = mean_frames(cmp.rows, policy, 0, 4);
    const double late = mean_frames(cmp.rows, policy, cfg.frames - 6, cfg.frames - 1);
    trend = trend && early < late;
    detail += std::string(detail.empty() ? "" : "; ") + policy + " early " + fmt(early, 2) + " vs late " +
              fmt(late, 2);
  }
  report("drop trend", trend, detail + " (mean drops per frame, first 5 vs last 6 frames)");

  std::filesystem::remove_all(work);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
