#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "uavbc/sim.hpp"
#include "uavbc/trajectory.hpp"

namespace uavbc {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Command {
  enum class Kind { kSelect, kPause, kResume, kSpeed };
  Kind kind = Kind::kPause;
  int ue = 0;
  double eps = 0;
};

/// Parses one client frame. Throws ProtocolError for anything the protocol does not allow,
/// including a UE index outside [0, n_ues).
Command parse_command(const std::string& text, int n_ues);

/// State payload of a world: the fields a client needs to draw queues and the sector ring.
nlohmann::ordered_json snapshot(const WorldState& world);

nlohmann::ordered_json hello_message(const SimConfig& cfg);
nlohmann::ordered_json error_message(const std::string& msg);

/// Keeps serving the most recent human choice until a new one arrives.
class StickyPolicy final : public Policy {
 public:
  explicit StickyPolicy(int initial) : selected_(initial) {}
  void select(int ue) { selected_ = ue; }
  int selected() const { return selected_; }
  Decision decide(const PolicyInput& in) override { return decide_with_movement(selected_, in); }
  Source source() const override { return Source::kHuman; }

 private:
  int selected_;
};

struct SessionOptions {
  SimConfig cfg;
  int run = 0;
  double speed = 2.0;  // events per wall-clock second
  std::filesystem::path record_path;
  std::int64_t max_events = 0;  // 0: until frames or battery run out
  bool start_paused = false;
};

enum class SessionMode { kRunning, kPaused };

/// The simulation side of a live demonstration. Commands arrive through a FIFO mailbox
/// (safe to post from any thread) and are applied only between events.
class DemoSession {
 public:
  explicit DemoSession(SessionOptions opts);

  void post(const Command& cmd);

  struct TickResult {
    bool stepped = false;
    bool changed = false;  // a snapshot should go out
  };
  /// Drains the mailbox, then steps one event if running and not finished.
  TickResult tick();

  nlohmann::ordered_json state_message() const;
  nlohmann::ordered_json hello() const { return hello_message(opts_.cfg); }

  bool finished() const { return finished_; }
  SessionMode mode() const { return mode_; }
  double speed() const { return speed_; }
  std::int64_t events_recorded() const;
  std::int64_t commands_applied() const { return commands_applied_; }
  const WorldState& world() const { return world_; }
  void set_clients(int n) { clients_ = n; }

 private:
  void apply(const Command& cmd);

  SessionOptions opts_;
  WorldState world_;
  StickyPolicy policy_;
  std::optional<TrajectoryWriter> recorder_;
  std::int64_t recorded_ = 0;
  SessionMode mode_;
  double speed_;
  std::optional<int> pending_selection_;
  std::int64_t commands_applied_ = 0;
  bool finished_ = false;
  int clients_ = 0;

  std::mutex mailbox_mu_;
  std::deque<Command> mailbox_;
};

/// WebSocket front end for a DemoSession. One thread runs all network I/O and the
/// stepping timer; a snapshot is broadcast after every event.
class DemoServer {
 public:
  DemoServer(SessionOptions opts, unsigned short port, std::string address = "127.0.0.1");
  ~DemoServer();
  DemoServer(const DemoServer&) = delete;
  DemoServer& operator=(const DemoServer&) = delete;

  /// Bound port (useful with port 0).
  unsigned short port() const;

  /// Blocks until stop() or, when `exit_when_finished`, until the session ends.
  /// With `handle_signals`, SIGINT/SIGTERM stop the server cleanly.
  void run(bool exit_when_finished = true, bool handle_signals = false);
  void stop();

  const DemoSession& session() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace uavbc
