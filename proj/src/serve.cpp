#include "pourbench/serve.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <optional>
#include <sstream>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "pourbench/control.hpp"
#include "pourbench/errors.hpp"
#include "pourbench/evalharness.hpp"
#include "pourbench/json_io.hpp"
#include "pourbench/seeding.hpp"

namespace pourbench {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

namespace {

constexpr const char* kServiceName = "pourbench";
constexpr const char* kSessionPath = "/api/session";
constexpr const char* kHealthPath = "/api/health";

std::string mime_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

bool read_file(const std::filesystem::path& p, std::string& out) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

}  // namespace

struct SessionServer::Impl {
  explicit Impl(ServeOptions o) : options(std::move(o)), acceptor(ioc) {}

  ServeOptions options;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  int next_session = 1;
  int active_sessions = 0;

  json health() const {
    json containers = json::array();
    for (const RegistryEntry& e : options.registry.entries()) {
      containers.push_back({{"name", e.container.name()},
                            {"d", e.container.diameter()},
                            {"h", e.container.height()},
                            {"in_training", e.in_training}});
    }
    json liquids = json::array();
    for (const LiquidSpec& l : options.registry.liquids()) {
      liquids.push_back({{"name", l.name}, {"viscosity", l.viscosity_cps}});
    }
    return {{"service", kServiceName},
            {"status", "ok"},
            {"format_version", kFormatVersion},
            {"session_endpoint", kSessionPath},
            {"stream_hz", 1.0 / options.sim.dt},
            {"timeout_s", options.timeout_s},
            {"active_sessions", active_sessions},
            {"containers", containers},
            {"liquids", liquids}};
  }

  /// Directory for a session's recordings; created on first use.
  std::filesystem::path allocate_session_dir() {
    std::filesystem::create_directories(options.out_dir);
    for (;;) {
      char name[32];
      std::snprintf(name, sizeof name, "session-%04d", next_session++);
      const std::filesystem::path dir = options.out_dir / name;
      if (std::filesystem::create_directory(dir)) return dir;
    }
  }

  void accept();
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, SessionServer::Impl& server, int id)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), server_(server), id_(id) {}

  void run(http::request<http::string_body> req) {
    ++server_.active_sessions;
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->close();
      self->read();
    });
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->handle(text);
      self->read();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    --server_.active_sessions;
    ++generation_;
    loop_.reset();
    timer_.cancel();
  }

  void send(const json& j) {
    queue_.push_back(j.dump());
    if (queue_.size() == 1) write_next();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return self->close();
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->write_next();
                    });
  }

  void send_error(const std::string& message) {
    send({{"type", "error"}, {"message", message}});
  }

  void handle(const std::string& text) {
    try {
      const json msg = json::parse(text);
      const std::string type = msg.at("type").get<std::string>();
      if (type == "start") {
        start(msg);
      } else if (type == "velocity") {
        const double omega = msg.at("omega").get<double>();
        if (!std::isfinite(omega)) throw UsageError("velocity must be finite");
        // Sampled, not queued: the latest command is applied on the next step.
        if (loop_) omega_ = omega;
      } else if (type == "end") {
        if (loop_) finish(StopReason::kEnded);
      } else {
        throw UsageError("unknown message type '" + type + "'");
      }
    } catch (const json::exception& e) {
      send_error(std::string("malformed message: ") + e.what());
    } catch (const Error& e) {
      send_error(e.what());
    }
  }

  void start(const json& msg) {
    if (loop_) throw UsageError("a run is already active");
    const ServeOptions& o = server_.options;
    RunConfig rc;
    rc.container = o.registry.find(msg.at("container").get<std::string>()).container;
    rc.liquid = o.registry.find_liquid(msg.value("liquid", std::string("water")));
    rc.vol_total = msg.at("vol_total").get<double>();
    rc.vol_2pour = msg.at("vol_2pour").get<double>();
    rc.sim = o.sim;
    rc.sensor = o.sensor;
    rc.sensor.seed = derive_seed(o.seed, {stable_hash("session"), static_cast<std::uint64_t>(id_),
                                          static_cast<std::uint64_t>(runs_)});
    rc.timeout_s = o.timeout_s;
    loop_.emplace(rc);
    ++runs_;
    ++generation_;
    omega_ = 0.0;
    send_state(false);
    next_tick_ = std::chrono::steady_clock::now();
    schedule();
  }

  void schedule() {
    next_tick_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(server_.options.sim.dt));
    timer_.expires_at(next_tick_);
    timer_.async_wait([self = shared_from_this(), gen = generation_](beast::error_code ec) {
      if (ec || gen != self->generation_ || !self->loop_) return;
      self->tick();
    });
  }

  void tick() {
    if (loop_->step(omega_)) return finish(StopReason::kRetracted);
    if (loop_->timed_out()) return finish(StopReason::kTimeout);
    send_state(false);
    schedule();
  }

  void send_state(bool done, double final_error = 0.0) {
    const PourState& s = loop_->state();
    json j = {{"type", "state"},
              {"t", s.t},
              {"theta", s.theta},
              {"sensor_vol", s.sensor},
              {"target_vol", loop_->config().vol_2pour},
              {"done", done}};
    if (done) j["final_error"] = final_error;
    send(j);
  }

  void finish(StopReason reason) {
    ++generation_;
    timer_.cancel();
    RunResult r = loop_->result(reason);
    send_state(true, r.final_error);
    loop_.reset();
    errors_.push_back(r.final_error);
    const ErrorStats stats = error_stats(errors_);

    json summary = {{"type", "summary"},
                    {"n", stats.n},
                    {"mu_e", stats.mu_e},
                    {"sigma_e", stats.sigma_e},
                    {"errors", errors_}};
    try {
      if (dir_.empty()) dir_ = server_.allocate_session_dir();
      char name[32];
      std::snprintf(name, sizeof name, "trial-%03zu.jsonl", errors_.size());
      const Trial trials[] = {std::move(r.trajectory)};
      save_trials(dir_ / name, trials);
      trial_files_.push_back(name);
      json file = summary;
      file.erase("type");
      file["format_version"] = kFormatVersion;
      file["session"] = dir_.filename().string();
      file["trials"] = trial_files_;
      write_json_file((dir_ / "summary.json").string(), file);
      summary["trial_file"] = (dir_ / name).string();
    } catch (const std::exception& e) {
      send_error(std::string("could not record trial: ") + e.what());
    }
    send(summary);
  }

  websocket::stream<beast::tcp_stream> ws_;
  asio::steady_timer timer_;
  SessionServer::Impl& server_;
  int id_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  std::optional<ClosedLoop> loop_;
  double omega_ = 0.0;
  std::uint64_t generation_ = 0;
  std::size_t runs_ = 0;
  std::chrono::steady_clock::time_point next_tick_;
  std::vector<double> errors_;
  std::vector<std::string> trial_files_;
  std::filesystem::path dir_;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, SessionServer::Impl& server)
      : stream_(std::move(socket)), server_(server) {}

  void run() { read(); }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (ec) return self->shutdown();
                       self->dispatch();
                     });
  }

  void dispatch() {
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == kSessionPath) {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), server_,
                                    server_.next_session++)
            ->run(std::move(req_));
        return;
      }
      return respond(text(http::status::not_found, "no websocket endpoint here\n"));
    }
    if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
      return respond(text(http::status::method_not_allowed, "only GET is supported\n"));
    }
    const std::string target(req_.target());
    if (target == kHealthPath) {
      http::response<http::string_body> res{http::status::ok, req_.version()};
      res.set(http::field::content_type, "application/json");
      res.body() = server_.health().dump() + "\n";
      return respond(std::move(res));
    }
    return respond(serve_static(target));
  }

  http::response<http::string_body> text(http::status status, std::string body) {
    http::response<http::string_body> res{status, req_.version()};
    res.set(http::field::content_type, "text/plain; charset=utf-8");
    res.body() = std::move(body);
    return res;
  }

  http::response<http::string_body> serve_static(std::string target) {
    if (server_.options.static_dir.empty()) {
      return text(http::status::not_found, "no UI bundle configured\n");
    }
    target = target.substr(0, target.find_first_of("?#"));
    if (target.empty() || target.front() != '/' || target.find("..") != std::string::npos) {
      return text(http::status::bad_request, "bad path\n");
    }
    std::filesystem::path p = server_.options.static_dir / target.substr(1);
    if (target.back() == '/') p /= "index.html";
    std::string body;
    if (!read_file(p, body)) return text(http::status::not_found, "not found\n");
    http::response<http::string_body> res{http::status::ok, req_.version()};
    res.set(http::field::content_type, mime_type(p));
    res.body() = std::move(body);
    return res;
  }

  void respond(http::response<http::string_body> res) {
    res.set(http::field::server, kServiceName);
    res.keep_alive(req_.keep_alive());
    res.prepare_payload();
    if (req_.method() == http::verb::head) res.body().clear();
    auto shared = std::make_shared<http::response<http::string_body>>(std::move(res));
    http::async_write(stream_, *shared,
                      [self = shared_from_this(), shared](beast::error_code ec, std::size_t) {
                        if (ec || !shared->keep_alive()) return self->shutdown();
                        self->read();
                      });
  }

  void shutdown() {
    beast::error_code ec;
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  }

  beast::tcp_stream stream_;
  SessionServer::Impl& server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace

void SessionServer::Impl::accept() {
  acceptor.async_accept(asio::make_strand(ioc), [this](beast::error_code ec, tcp::socket s) {
    if (ec == asio::error::operation_aborted) return;
    if (!ec) std::make_shared<HttpSession>(std::move(s), *this)->run();
    accept();
  });
}

SessionServer::SessionServer(ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

SessionServer::~SessionServer() = default;

unsigned short SessionServer::listen() {
  try {
    const tcp::endpoint ep(asio::ip::make_address(impl_->options.address), impl_->options.port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw IoError("cannot listen on " + impl_->options.address + ":" +
                  std::to_string(impl_->options.port) + ": " + e.code().message());
  }
  impl_->accept();
  return impl_->acceptor.local_endpoint().port();
}

void SessionServer::run() { impl_->ioc.run(); }

void SessionServer::stop() { impl_->ioc.stop(); }

}  // namespace pourbench
