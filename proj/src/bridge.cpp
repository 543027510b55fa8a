#include "uavbc/bridge.hpp"

#include "uavbc/experiment.hpp"

#include <chrono>
#include <cmath>
#include <set>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace uavbc {

using ojson = nlohmann::ordered_json;

Command parse_command(const std::string& text, int n_ues) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    throw ProtocolError("message is not valid JSON");
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw ProtocolError("message must be an object with a string 'kind'");
  const auto kind = j["kind"].get<std::string>();
  Command c;
  if (kind == "select") {
    if (!j.contains("ue") || !j["ue"].is_number_integer()) throw ProtocolError("select needs an integer 'ue'");
    c.kind = Command::Kind::kSelect;
    c.ue = j["ue"].get<int>();
    if (c.ue < 0 || c.ue >= n_ues)
      throw ProtocolError("ue " + std::to_string(c.ue) + " outside [0, " + std::to_string(n_ues) + ")");
  } else if (kind == "pause") {
    c.kind = Command::Kind::kPause;
  } else if (kind == "resume") {
    c.kind = Command::Kind::kResume;
  } else if (kind == "speed") {
    if (!j.contains("eps") || !j["eps"].is_number()) throw ProtocolError("speed needs a numeric 'eps'");
    c.kind = Command::Kind::kSpeed;
    c.eps = j["eps"].get<double>();
    if (!std::isfinite(c.eps) || c.eps <= 0) throw ProtocolError("eps must be > 0");
  } else {
    throw ProtocolError("unknown kind '" + kind + "'");
  }
  return c;
}

ojson snapshot(const WorldState& w) {
  ojson j;
  j["frame"] = w.frame;
  j["event"] = w.event;
  j["q"] = w.queue_lengths();
  j["queue_limit"] = w.cfg.queue_limit;
  j["active_ue"] = w.active_ue;
  j["uav_sector"] = w.uav_sector;
  j["ue_sectors"] = w.ue_sectors;
  ojson pos = ojson::array();
  for (const auto& p : w.mobility.position) pos.push_back({p.x, p.y});
  j["ue_positions"] = pos;
  j["battery"] = w.battery;
  std::vector<std::int64_t> drops;
  for (const auto& q : w.queues) drops.push_back(q.dropped());
  j["drops_cumulative"] = drops;
  j["clock"] = w.clock;
  return j;
}

ojson hello_message(const SimConfig& cfg) {
  return {{"kind", "hello"}, {"n_ues", cfg.n_ues}, {"sectors", cfg.sectors}, {"queue_limit", cfg.queue_limit}};
}

ojson error_message(const std::string& msg) { return {{"kind", "error"}, {"msg", msg}}; }

DemoSession::DemoSession(SessionOptions opts)
    : opts_(std::move(opts)),
      world_(init_world(opts_.cfg, opts_.run)),
      policy_(world_.active_ue),
      mode_(opts_.start_paused ? SessionMode::kPaused : SessionMode::kRunning),
      speed_(opts_.speed) {
  if (!(speed_ > 0)) throw ConfigError("speed must be > 0");
  if (!opts_.record_path.empty()) recorder_.emplace(opts_.record_path);
}

void DemoSession::post(const Command& cmd) {
  std::lock_guard lock(mailbox_mu_);
  mailbox_.push_back(cmd);
}

std::int64_t DemoSession::events_recorded() const { return recorded_; }

void DemoSession::apply(const Command& cmd) {
  switch (cmd.kind) {
    case Command::Kind::kSelect:
      pending_selection_ = cmd.ue;
      break;
    case Command::Kind::kPause:
      mode_ = SessionMode::kPaused;
      break;
    case Command::Kind::kResume:
      mode_ = SessionMode::kRunning;
      break;
    case Command::Kind::kSpeed:
      speed_ = cmd.eps;
      break;
  }
  ++commands_applied_;
}

DemoSession::TickResult DemoSession::tick() {
  TickResult out;
  std::deque<Command> batch;
  {
    std::lock_guard lock(mailbox_mu_);
    batch.swap(mailbox_);
  }
  for (const auto& c : batch) apply(c);
  out.changed = !batch.empty();
  if (finished_ || mode_ == SessionMode::kPaused) return out;

  const auto& cfg = opts_.cfg;
  if (world_.frame < 0 || world_.event >= cfg.events_per_frame) {
    if (world_.frame + 1 >= cfg.frames) {
      finished_ = true;
      out.changed = true;
      return out;
    }
    start_frame(world_);
  }
  if (pending_selection_) {
    policy_.select(*pending_selection_);
    pending_selection_.reset();
  }
  const EventOutcome ev = step_event(world_, policy_);
  if (recorder_) {
    recorder_->write(make_record(world_, ev, Source::kHuman));
    recorder_->flush();
  }
  ++recorded_;
  out.stepped = true;
  out.changed = true;
  if (world_.exhausted || (opts_.max_events > 0 && recorded_ >= opts_.max_events)) finished_ = true;
  return out;
}

ojson DemoSession::state_message() const {
  ojson j;
  j["kind"] = "state";
  const ojson snap = snapshot(world_);
  for (const auto& [k, v] : snap.items()) j[k] = v;
  j["mode"] = mode_ == SessionMode::kRunning ? "running" : "paused";
  j["speed"] = speed_;
  j["commands_applied"] = commands_applied_;
  j["connected_clients"] = clients_;
  j["finished"] = finished_;
  return j;
}

// ---------------------------------------------------------------------------
// Network side

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class Client : public std::enable_shared_from_this<Client> {
 public:
  using MessageHandler = std::function<void(const std::shared_ptr<Client>&, const std::string&)>;
  using CloseHandler = std::function<void(const std::shared_ptr<Client>&)>;

  Client(tcp::socket socket, MessageHandler on_msg, CloseHandler on_close)
      : ws_(std::move(socket)), on_msg_(std::move(on_msg)), on_close_(std::move(on_close)) {}

  void start(std::shared_ptr<const std::string> greeting) {
    ws_.text(true);
    outbox_.push_front(std::move(greeting));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) {
        self->closed_ = true;
        self->outbox_.clear();
        return;
      }
      self->open_ = true;
      self->write();
      self->read();
    });
  }

  // Messages sent before the handshake completes are held until it does.
  void send(std::shared_ptr<const std::string> msg) {
    if (closed_) return;
    outbox_.push_back(std::move(msg));
    if (open_ && outbox_.size() == 1) write();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    open_ = false;
    beast::error_code ec;
    ws_.next_layer().shutdown(tcp::socket::shutdown_both, ec);
    ws_.next_layer().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->open_ = false;
        self->closed_ = true;
        self->on_close_(self);
        return;
      }
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->on_msg_(self, text);
      self->read();
    });
  }

  void write() {
    ws_.async_write(net::buffer(*outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->outbox_.clear();
        return;
      }
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) self->write();
    });
  }

  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> outbox_;
  MessageHandler on_msg_;
  CloseHandler on_close_;
  bool open_ = false;
  bool closed_ = false;
};

}  // namespace

struct DemoServer::Impl {
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  net::steady_timer timer{ioc};
  net::signal_set signals{ioc};
  DemoSession session;
  std::set<std::shared_ptr<Client>> clients;
  bool exit_when_finished = true;

  explicit Impl(SessionOptions opts) : session(std::move(opts)) {}

  void broadcast(const ojson& j) {
    auto msg = std::make_shared<const std::string>(j.dump());
    for (const auto& c : clients) c->send(msg);
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto client = std::make_shared<Client>(
          std::move(socket),
          [this](const std::shared_ptr<Client>& c, const std::string& text) { on_message(c, text); },
          [this](const std::shared_ptr<Client>& c) {
            clients.erase(c);
            session.set_clients(static_cast<int>(clients.size()));
          });
      clients.insert(client);
      session.set_clients(static_cast<int>(clients.size()));
      client->start(std::make_shared<const std::string>(session.hello().dump()));
      client->send(std::make_shared<const std::string>(session.state_message().dump()));
      accept();
    });
  }

  void on_message(const std::shared_ptr<Client>& c, const std::string& text) {
    try {
      session.post(parse_command(text, session.world().cfg.n_ues));
    } catch (const ProtocolError& e) {
      c->send(std::make_shared<const std::string>(error_message(e.what()).dump()));
    }
  }

  void schedule() {
    const auto period = std::chrono::duration<double>(1.0 / session.speed());
    timer.expires_after(std::chrono::duration_cast<net::steady_timer::duration>(period));
    timer.async_wait([this](beast::error_code ec) {
      if (ec) return;
      const auto r = session.tick();
      if (r.changed) broadcast(session.state_message());
      if (session.finished() && exit_when_finished) {
        // Let the final snapshot drain before shutting down.
        timer.expires_after(std::chrono::milliseconds(100));
        timer.async_wait([this](beast::error_code) { shutdown(); });
        return;
      }
      schedule();
    });
  }

  void shutdown() {
    beast::error_code ec;
    acceptor.close(ec);
    timer.cancel();
    signals.cancel(ec);
    for (const auto& c : clients) c->close();
    clients.clear();
    ioc.stop();
  }
};

DemoServer::DemoServer(SessionOptions opts, unsigned short port, std::string address)
    : impl_(std::make_unique<Impl>(std::move(opts))) {
  try {
    const tcp::endpoint ep(net::ip::make_address(address), port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw std::runtime_error("cannot listen on " + address + ":" + std::to_string(port) + ": " + e.what());
  }
}

DemoServer::~DemoServer() = default;

unsigned short DemoServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void DemoServer::run(bool exit_when_finished, bool handle_signals) {
  impl_->exit_when_finished = exit_when_finished;
  if (handle_signals) {
    impl_->signals.add(SIGINT);
    impl_->signals.add(SIGTERM);
    impl_->signals.async_wait([this](beast::error_code ec, int) {
      if (!ec) impl_->shutdown();
    });
  }
  impl_->accept();
  impl_->schedule();
  impl_->ioc.run();
}

void DemoServer::stop() {
  net::post(impl_->ioc, [this] { impl_->shutdown(); });
}

const DemoSession& DemoServer::session() const { return impl_->session; }

}  // namespace uavbc
