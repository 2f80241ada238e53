#include "recorder.hpp"

#include <stdexcept>

#include "httplib.h"

#include "common.hpp"

namespace dal::cli {

using nlohmann::json;

RecorderSession::RecorderSession(GameConfig game, std::filesystem::path out_dir, std::uint64_t seed)
    : game_(std::move(game)), out_dir_(std::move(out_dir)), seed_(seed) {
  game_.validate();
  ensure_dir(out_dir_);
  reset();
}

void RecorderSession::reset() {
  state_ = env_reset(game_, seed_);
  frame_ = render(state_, game_);
  terminal_ = is_terminal(state_, game_);
  trajectory_ = {};
  trajectory_.meta.config_hash = game_.hash();
  trajectory_.meta.seed = seed_;
  trajectory_.meta.recorder = RecorderTag::human;
}

json RecorderSession::state() const {
  const std::string bytes(frame_.pixels.begin(), frame_.pixels.end());
  return json{{"frame", httplib::detail::base64_encode(bytes)},
              {"tick", state_.tick},
              {"crossings", eval::crossings(state_)},
              {"terminal", terminal_}};
}

json RecorderSession::act(std::size_t action) {
  if (action >= kNumActions) throw std::invalid_argument("action must be 0 (up), 1 (down) or 2 (noop)");
  if (terminal_) throw std::logic_error("episode is over; POST /episode/finish to save it");
  const Action a = action_from_index(action);
  trajectory_.frames.push_back(frame_);
  trajectory_.actions.push_back(a);
  const StepResult r = env_step(state_, a, game_);
  state_ = r.state;
  terminal_ = r.terminal;
  frame_ = render(state_, game_);
  return state();
}

json RecorderSession::finish() {
  const auto path = episode_path(out_dir_, "human", episodes_);
  const int crossings = eval::crossings(state_);
  save_trajectory(trajectory_, path, static_cast<std::uint32_t>(crossings));
  json out{{"file", path.filename().string()}, {"ticks", trajectory_.size()}, {"crossings", crossings}};
  ++episodes_;
  ++seed_;
  reset();
  return out;
}

struct RecorderServer::Impl {
  RecorderSession session;
  std::mutex mutex;
  httplib::Server server;

  Impl(GameConfig game, std::filesystem::path out_dir, std::uint64_t seed)
      : session(std::move(game), std::move(out_dir), seed) {}
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message) { reply(res, status, {{"error", message}}); }

}  // namespace

RecorderServer::RecorderServer(GameConfig game, std::filesystem::path out_dir, std::uint64_t seed)
    : impl_(std::make_unique<Impl>(std::move(game), std::move(out_dir), seed)) {
  Impl& m = *impl_;
  m.server.new_task_queue = [] { return new httplib::ThreadPool(1); };
  m.server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
  m.server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  m.server.Get("/state", [&m](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(m.mutex);
    reply(res, 200, m.session.state());
  });
  m.server.Post("/action", [&m](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(m.mutex);
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("action") ||
        !body["action"].is_number_integer()) {
      return fail(res, 400, "expected JSON {\"action\": 0|1|2}");
    }
    const auto a = body["action"].get<std::int64_t>();
    if (a < 0 || a >= static_cast<std::int64_t>(kNumActions)) return fail(res, 400, "action must be 0, 1 or 2");
    try {
      reply(res, 200, m.session.act(static_cast<std::size_t>(a)));
    } catch (const std::logic_error& e) {
      fail(res, 409, e.what());
    }
  });
  m.server.Post("/episode/finish", [&m](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(m.mutex);
    try {
      reply(res, 200, m.session.finish());
    } catch (const std::exception& e) {
      fail(res, 500, e.what());
    }
  });
}

RecorderServer::~RecorderServer() { stop(); }

int RecorderServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void RecorderServer::listen() { impl_->server.listen_after_bind(); }

void RecorderServer::stop() { impl_->server.stop(); }

}  // namespace dal::cli
