// uavbc: command-line driver for the relay simulator and the cloning pipeline.
//
//   uavbc simulate  --out-trajectories data.jsonl --out-metrics metrics.csv
//   uavbc train     --data data.jsonl --model-out model.json --history-out history.csv
//   uavbc evaluate  --model model.json --data test.jsonl
//   uavbc compare   --model model.json --seeds 101,102,103,104,105 --out compare.csv
//   uavbc shift     --model model.json --new-lambdas 4,6,9,7,8
//   uavbc serve     --port 8765 --record human.jsonl

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "uavbc/bridge.hpp"
#include "uavbc/config.hpp"
#include "uavbc/experiment.hpp"
#include "uavbc/metrics.hpp"
#include "uavbc/mlp.hpp"
#include "uavbc/trajectory.hpp"

namespace {

using namespace uavbc;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitThreshold = 4;

// Everything a config file or the command line can set.
struct Settings {
  SimConfig sim;
  TrainConfig train;
  FeatureSpec features;
  ExpertConfig expert;
  double split_ratio = 0.8;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string snake(std::string k) {
  for (auto& c : k)
    if (c == '-') c = '_';
  return k;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_double_list(s)) {
    if (v != std::floor(v)) throw ConfigError("expected integers in '" + s + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    try {
      std::size_t pos = 0;
      out.push_back(std::stoull(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError("'" + key + "': expected a boolean, got '" + v + "'");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return std::stod(v);
  } catch (const std::logic_error&) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
}

// Non-simulator keys first, then SimConfig's own parser.
void apply_any(Settings& s, const std::string& raw_key, const std::string& raw_value) {
  const auto key = snake(trim(raw_key));
  const auto v = trim(raw_value);
  if (key == "epochs") s.train.epochs = static_cast<int>(to_double(key, v));
  else if (key == "batch_size") s.train.batch_size = static_cast<int>(to_double(key, v));
  else if (key == "lr0") s.train.lr0 = to_double(key, v);
  else if (key == "hidden") s.train.hidden = parse_int_list(v);
  else if (key == "train_seed") s.train.seed = parse_seed_list(v).at(0);
  else if (key == "split_ratio") s.split_ratio = to_double(key, v);
  else if (key == "normalize_by") s.features.normalize_by = static_cast<int>(to_double(key, v));
  else if (key == "active_ue_onehot") s.features.include_active_ue_onehot = parse_bool(key, v);
  else if (key == "hysteresis_delta") s.expert.hysteresis_delta = static_cast<int>(to_double(key, v));
  else apply_setting(s.sim, key, v);
}

void load_settings_file(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    try {
      if (eq == std::string::npos) throw ConfigError("expected key = value");
      apply_any(s, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

// --config has to be read before CLI11 binds defaults, so flags override the file.
std::optional<std::string> prescan_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return std::nullopt;
}

// Flags mirror the config keys. Values captured as strings are applied after parsing.
struct FlagSink {
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_flag(CLI::App& app, FlagSink& sink, const std::string& key, const std::string& help) {
  std::string flag = "--" + key;
  for (auto& c : flag)
    if (c == '_') c = '-';
  app.add_option_function<std::string>(
      flag, [&sink, key](const std::string& v) { sink.overrides.emplace_back(key, v); }, help);
}

void add_sim_flags(CLI::App& app, FlagSink& sink) {
  for (const auto& [key, help] : std::vector<std::pair<std::string, std::string>>{
           {"n_ues", "number of UEs"},
           {"sectors", "sectors on the ring"},
           {"queue_limit", "per-UE buffer capacity"},
           {"frame_packets_per_ue", "arrivals drawn per UE per frame"},
           {"events_per_frame", "scheduling events per frame"},
           {"frames", "frames per run"},
           {"runs", "independent runs"},
           {"packet_size_bits", "packet size L in bits"},
           {"lambdas", "comma-separated arrival parameters, one per UE"},
           {"mu_s", "mean service time"},
           {"arrival_model", "poisson-gap | exponential-rate"},
           {"battery_init_range", "min,max initial battery"},
           {"e_move", "energy per moving event"},
           {"e_hover", "energy per hovering event"},
           {"e_tx", "energy per delivered packet"},
           {"idle_time", "time consumed serving an empty queue"},
           {"alpha_mode", "sector | euclidean"},
           {"radius_uav", "UAV orbit radius"},
           {"radius_ue_min", "inner UE radius"},
           {"radius_ue_max", "outer UE radius"},
           {"ue_speed", "UE speed per event"},
           {"heading_sigma", "UE heading noise"},
           {"seed", "master seed"},
           {"hysteresis_delta", "scripted expert switching margin"},
       })
    add_flag(app, sink, key, help);
}

void add_train_flags(CLI::App& app, FlagSink& sink) {
  for (const auto& [key, help] : std::vector<std::pair<std::string, std::string>>{
           {"epochs", "training epochs"},
           {"batch_size", "mini-batch size"},
           {"lr0", "initial learning rate"},
           {"hidden", "comma-separated hidden widths"},
           {"train_seed", "seed for init, split and shuffling"},
           {"split_ratio", "train fraction of the dataset"},
           {"normalize_by", "queue-length normaliser"},
           {"active_ue_onehot", "append the active-UE one-hot to the features"},
       })
    add_flag(app, sink, key, help);
}

void banner(const Settings& s, bool with_train) {
  std::cout << "# effective configuration\n";
  for (const auto& [k, v] : describe(s.sim)) std::cout << "#   " << k << " = " << v << '\n';
  std::cout << "#   hysteresis_delta = " << s.expert.hysteresis_delta << '\n';
  if (with_train) {
    std::string hidden;
    for (std::size_t i = 0; i < s.train.hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(s.train.hidden[i]);
    std::cout << "#   epochs = " << s.train.epochs << "\n#   batch_size = " << s.train.batch_size
              << "\n#   lr0 = " << s.train.lr0 << "\n#   hidden = " << hidden << "\n#   train_seed = " << s.train.seed
              << "\n#   split_ratio = " << s.split_ratio << "\n#   normalize_by = " << s.features.normalize_by
              << "\n#   active_ue_onehot = " << (s.features.include_active_ue_onehot ? "true" : "false") << '\n';
  }
}

void write_history(const std::vector<EpochStats>& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(10);
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& e : h)
    out << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_loss << ',' << e.val_acc << '\n';
}

void write_confusion(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "true\\pred";
  for (std::size_t j = 0; j < r.confusion.size(); ++j) out << ',' << j;
  out << '\n';
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    out << i;
    for (auto c : r.confusion[i]) out << ',' << c;
    out << '\n';
  }
}

void write_eval(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(10);
  out << "samples,accuracy,mean_loss\n" << r.samples << ',' << r.accuracy << ',' << r.mean_loss << '\n';
}

void print_summary(const ComparisonSummary& s) {
  std::cout << "policy,mean_energy,mean_longest_session,mean_drops,mean_edt\n"
            << "expert," << s.expert_energy << ',' << s.expert_session << ',' << s.expert_drops << ','
            << s.expert_edt << '\n'
            << "clone," << s.clone_energy << ',' << s.clone_session << ',' << s.clone_drops << ',' << s.clone_edt
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  FlagSink sink;
  CLI::App app{"UAV relay scheduling simulator and behavioural cloning pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value settings file (flags override it)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run the closed loop and record trajectories");
  std::string sim_policy = "expert", sim_model, sim_traj, sim_metrics;
  sim->add_option("--policy", sim_policy, "expert | model")->check(CLI::IsMember({"expert", "model"}));
  sim->add_option("--model", sim_model, "model file for --policy model");
  sim->add_option("--out-trajectories", sim_traj, "JSONL trajectory output");
  sim->add_option("--out-metrics", sim_metrics, "per-frame metrics CSV");
  add_sim_flags(*sim, sink);

  // train
  auto* tr = app.add_subcommand("train", "fit the MLP to recorded trajectories");
  std::string tr_data, tr_model = "model.json", tr_history = "history.csv";
  double tr_min_acc = -1;
  tr->add_option("--data", tr_data, "JSONL trajectories")->required();
  tr->add_option("--model-out", tr_model, "model output");
  tr->add_option("--history-out", tr_history, "per-epoch history CSV");
  tr->add_option("--min-val-accuracy", tr_min_acc, "exit 4 if final validation accuracy is lower");
  add_train_flags(*tr, sink);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "teacher-forcing accuracy on a trajectory file");
  std::string ev_model, ev_data, ev_report, ev_confusion;
  double ev_min_acc = -1;
  ev->add_option("--model", ev_model, "model file")->required();
  ev->add_option("--data", ev_data, "JSONL trajectories")->required();
  ev->add_option("--report-out", ev_report, "summary CSV");
  ev->add_option("--confusion-out", ev_confusion, "confusion matrix CSV");
  ev->add_option("--min-accuracy", ev_min_acc, "exit 4 if accuracy is lower");

  // compare
  auto* cmp = app.add_subcommand("compare", "expert vs clone closed loop on matched seeds");
  std::string cmp_model, cmp_seeds = "101,102,103,104,105", cmp_out = "compare.csv";
  bool cmp_expert_twice = false;
  cmp->add_option("--model", cmp_model, "model file");
  cmp->add_option("--seeds", cmp_seeds, "comma-separated seeds, one run each");
  cmp->add_option("--out", cmp_out, "side-by-side metrics CSV");
  cmp->add_flag("--expert-vs-expert", cmp_expert_twice, "run the expert on both sides (determinism control)");
  add_sim_flags(*cmp, sink);

  // shift
  auto* sh = app.add_subcommand("shift", "accuracy and closed loop under changed arrival parameters");
  std::string sh_model, sh_lambdas, sh_seeds = "9001,9002", sh_out;
  double sh_baseline = -1, sh_min_drop = -1;
  sh->add_option("--model", sh_model, "model file")->required();
  sh->add_option("--new-lambdas", sh_lambdas, "comma-separated replacement lambdas")->required();
  sh->add_option("--seeds", sh_seeds, "comma-separated seeds, one run each");
  sh->add_option("--out", sh_out, "closed-loop metrics CSV");
  sh->add_option("--baseline-accuracy", sh_baseline, "matched-lambda accuracy to compare against");
  sh->add_option("--min-drop", sh_min_drop, "exit 4 unless accuracy falls at least this many points");
  add_sim_flags(*sh, sink);

  // serve
  auto* sv = app.add_subcommand("serve", "live WebSocket session for human demonstrations");
  int sv_port = 8765, sv_run = 0;
  double sv_speed = 2.0;
  std::string sv_record = "human.jsonl", sv_address = "127.0.0.1";
  std::int64_t sv_max_events = 0;
  bool sv_paused = false;
  sv->add_option("--port", sv_port, "listen port (0 picks a free one)");
  sv->add_option("--address", sv_address, "listen address");
  sv->add_option("--speed", sv_speed, "events per second");
  sv->add_option("--record", sv_record, "JSONL output for the human trajectory");
  sv->add_option("--run", sv_run, "run index used to seed the world");
  sv->add_option("--max-events", sv_max_events, "stop after this many events (0: no limit)");
  sv->add_flag("--paused", sv_paused, "start paused");
  add_sim_flags(*sv, sink);

  try {
    if (auto path = prescan_config(argc, argv)) load_settings_file(s, *path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (const auto& [k, v] : sink.overrides) apply_any(s, k, v);
    s.sim.validate();
    s.features.n_ues = s.sim.n_ues;

    if (*sim) {
      banner(s, false);
      std::unique_ptr<TrajectoryWriter> writer;
      if (!sim_traj.empty()) writer = std::make_unique<TrajectoryWriter>(sim_traj);
      std::optional<MlpModel> model;
      if (sim_policy == "model") {
        if (sim_model.empty()) throw ConfigError("--policy model needs --model");
        model = load_model(sim_model);
        if (model->spec.n_ues != s.sim.n_ues) throw ConfigError("model was trained for a different n_ues");
      }
      PolicyFactory factory = [&]() -> std::unique_ptr<Policy> {
        if (model) return std::make_unique<ClonePolicy>(*model);
        return std::make_unique<ExpertPolicy>(s.expert);
      };
      const auto runs = run_all(s.sim, factory, [&](const TrajectoryRecord& r) {
        if (writer) writer->write(r);
      });
      if (writer) writer->flush();
      if (!sim_metrics.empty()) emit_report(to_rows(sim_policy, runs), sim_metrics);
      std::int64_t events = 0, drops = 0;
      double sim_seconds = 0;
      for (const auto& r : runs) {
        events += r.events;
        drops += r.drops_total;
        for (const auto& f : r.frames) sim_seconds += f.service_time_total;
        std::cout << "run " << r.run << ": events=" << r.events << " drops=" << r.drops_total
                  << " energy=" << r.ledger.total() << " battery=" << r.battery_final << '/' << r.battery_initial
                  << (r.truncated ? " truncated" : "") << (r.conserved ? "" : " CONSERVATION-VIOLATED") << '\n';
      }
      std::cout << "records " << events << " drops " << drops << " simulated_seconds " << sim_seconds
                << " mean_energy " << mean_energy(runs) << '\n';
      return kExitOk;
    }

    if (*tr) {
      banner(s, true);
      const auto records = read_jsonl(tr_data);
      if (records.empty()) throw DataError(tr_data + ": no records");
      for (const auto& r : records)
        if (static_cast<int>(r.q.size()) != s.features.n_ues)
          throw DataError(tr_data + ": record has " + std::to_string(r.q.size()) + " queues, expected " +
                          std::to_string(s.features.n_ues));
      auto [train_recs, val_recs] = split_dataset(records, s.split_ratio, s.train.seed);
      const auto train_set = make_dataset(train_recs, s.features);
      const auto val_set = make_dataset(val_recs, s.features);
      std::cout << "train " << train_recs.size() << " validation " << val_recs.size() << '\n';
      const auto result = train(train_set, val_set, s.features, s.features.n_ues, s.train);
      for (const auto& e : result.history)
        std::cout << "epoch " << e.epoch << " train_loss " << e.train_loss << " train_acc " << e.train_acc
                  << " val_loss " << e.val_loss << " val_acc " << e.val_acc << '\n';
      save_model(result.model, tr_model);
      write_history(result.history, tr_history);
      const double final_val = result.history.back().val_acc;
      std::cout << "final validation accuracy " << final_val << '\n';
      if (tr_min_acc >= 0 && final_val < tr_min_acc) {
        std::cerr << "validation accuracy " << final_val << " below " << tr_min_acc << '\n';
        return kExitThreshold;
      }
      return kExitOk;
    }

    if (*ev) {
      const auto model = load_model(ev_model);
      const auto records = read_jsonl(ev_data);
      if (records.empty()) throw DataError(ev_data + ": no records");
      const auto rep = evaluate(model, records);
      std::cout << "samples " << rep.samples << " accuracy " << rep.accuracy << " mean_loss " << rep.mean_loss << '\n';
      if (!ev_report.empty()) write_eval(rep, ev_report);
      if (!ev_confusion.empty()) write_confusion(rep, ev_confusion);
      if (ev_min_acc >= 0 && rep.accuracy < ev_min_acc) return kExitThreshold;
      return kExitOk;
    }

    if (*cmp) {
      banner(s, false);
      const auto seeds = parse_seed_list(cmp_seeds);
      std::optional<MlpModel> model;
      if (!cmp_expert_twice) {
        if (cmp_model.empty()) throw ConfigError("compare needs --model (or --expert-vs-expert)");
        model = load_model(cmp_model);
      }
      auto expert = [&]() -> std::unique_ptr<Policy> { return std::make_unique<ExpertPolicy>(s.expert); };
      auto other = [&]() -> std::unique_ptr<Policy> {
        if (model) return std::make_unique<ClonePolicy>(*model);
        return std::make_unique<ExpertPolicy>(s.expert);
      };
      const auto c = compare_policies(s.sim, expert, other, seeds);
      emit_report(c.rows, cmp_out);
      print_summary(c.summary);
      return kExitOk;
    }

    if (*sh) {
      banner(s, false);
      const auto lambdas = parse_double_list(sh_lambdas);
      const auto model = load_model(sh_model);
      const auto rep = shift_study(s.sim, model, lambdas, parse_seed_list(sh_seeds), s.expert);
      std::cout << "shifted accuracy " << rep.accuracy.accuracy << " over " << rep.accuracy.samples << " samples\n";
      print_summary(rep.closed_loop.summary);
      if (!sh_out.empty()) emit_report(rep.closed_loop.rows, sh_out);
      if (sh_baseline >= 0) {
        const double drop = 100.0 * (sh_baseline - rep.accuracy.accuracy);
        std::cout << "accuracy drop " << drop << " points\n";
        if (sh_min_drop >= 0 && drop < sh_min_drop) return kExitThreshold;
      }
      return kExitOk;
    }

    if (*sv) {
      banner(s, false);
      if (sv_port < 0 || sv_port > 65535) throw ConfigError("port out of range");
      SessionOptions opts;
      opts.cfg = s.sim;
      opts.run = sv_run;
      opts.speed = sv_speed;
      opts.record_path = sv_record;
      opts.max_events = sv_max_events;
      opts.start_paused = sv_paused;
      DemoServer server(opts, static_cast<unsigned short>(sv_port), sv_address);
      std::cout << "listening on ws://" << sv_address << ':' << server.port() << std::endl;
      server.run(true, true);
      std::cout << "events recorded " << server.session().events_recorded() << " to " << sv_record << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
