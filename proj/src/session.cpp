#include "vaer/session.hpp"

#include <chrono>
#include <cstdio>
#include <map>

#include <httplib.h>

#include "vaer/error.hpp"

namespace vaer::session {

const char* to_string(Lifecycle lifecycle) {
  switch (lifecycle) {
    case Lifecycle::awaiting_labels: return "awaiting_labels";
    case Lifecycle::retraining: return "retraining";
    case Lifecycle::idle: return "idle";
    case Lifecycle::done: return "done";
  }
  return "?";
}

namespace {

std::string session_hash(const Table& left, const Table& right, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  };
  mix(left.name());
  mix(right.name());
  mix(std::to_string(left.size()));
  mix(std::to_string(right.size()));
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json scores_json(const metrics::Scores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"tp", s.counts.tp},
          {"fp", s.counts.fp},        {"fn", s.counts.fn},  {"tn", s.counts.tn}};
}

Reply error_reply(int status, const std::string& message) { return {status, {{"error", message}}}; }

}  // namespace

Session::Session(Table left, Table right, std::shared_ptr<const ir::Provider> provider, repr::VaeModel vae,
                 al::LearnerConfig config, SessionOptions options)
    : left_(std::move(left)),
      right_(std::move(right)),
      provider_(std::move(provider)),
      vae_(std::move(vae)),
      config_(std::move(config)),
      options_(std::move(options)) {
  if (!provider_) throw FormatError("session needs an IR provider");
  session_id_ = session_hash(left_, right_, config_.seed);
}

Session::~Session() {
  if (worker_.joinable()) worker_.join();
}

void Session::start() {
  std::scoped_lock lock(learner_mutex_);
  workspace_ = al::Workspace::build(left_, right_, *provider_, vae_);
  learner_ = std::make_unique<al::ActiveLearner>(workspace_, vae_, config_);
  learner_->start();
  history_ = json::array();
  record_metrics_locked();

  if (!options_.journal_path.empty()) {
    const auto entries = al::Journal(options_.journal_path).read();
    // one group per recorded iteration, retrained exactly as the live run did
    std::map<std::size_t, std::vector<std::pair<PairKey, int>>> groups;
    for (const al::JournalEntry& e : entries) groups[e.iteration].emplace_back(e.pair, e.label);
    for (const auto& [iteration, labels] : groups) {
      if (iteration != learner_->iteration()) {
        throw FormatError("journal " + options_.journal_path + " skips iteration " +
                          std::to_string(learner_->iteration()));
      }
      learner_->replay(labels);
      learner_->retrain();
      record_metrics_locked();
    }
  }
  learner_->propose();
  refresh_snapshot_locked();
  std::scoped_lock state(state_mutex_);
  lifecycle_ = learner_->pending().empty() ? Lifecycle::idle : Lifecycle::awaiting_labels;
  state_changed_.notify_all();
}

void Session::record_metrics_locked() {
  json m = {{"iteration", learner_->iteration()},
            {"labels_used", learner_->labels_used()},
            {"positives", learner_->pools().positives.size()},
            {"negatives", learner_->pools().negatives.size()}};
  if (options_.test) m["test"] = scores_json(learner_->evaluate(*options_.test));
  history_.push_back(std::move(m));
}

void Session::refresh_snapshot_locked() {
  const al::LabelPools& pools = learner_->pools();
  json status = {{"session_id", session_id_},
                 {"iteration", learner_->iteration()},
                 {"labels_used", learner_->labels_used()},
                 {"pools",
                  {{"positives", pools.positives.size()},
                   {"negatives", pools.negatives.size()},
                   {"unlabeled", pools.unlabeled.size()}}},
                 {"pending", learner_->pending().size()},
                 {"metrics", history_}};

  json pairs = json::array();
  for (const al::Proposal& p : learner_->pending()) {
    const al::CandidatePair& c = pools.unlabeled.at(p.index);
    pairs.push_back({{"pair_id", pair_id(c.key)},
                     {"left_id", c.key.left},
                     {"right_id", c.key.right},
                     {"left", left_.at(c.left).values},
                     {"right", right_.at(c.right).values},
                     {"category", al::to_string(p.category)},
                     {"probability", p.probability}});
  }
  json batch = {{"iteration", learner_->iteration()}, {"attributes", left_.attributes()}, {"pairs", pairs}};

  json boot = json::array();
  for (const al::LabeledPair& p : pools.positives) {
    if (p.provenance != al::Provenance::bootstrap) continue;
    boot.push_back({{"pair_id", pair_id(p.pair.key)},
                    {"left_id", p.pair.key.left},
                    {"right_id", p.pair.key.right},
                    {"left", left_.at(p.pair.left).values},
                    {"right", right_.at(p.pair.right).values},
                    {"w2", p.pair.total_w2}});
  }

  std::scoped_lock state(state_mutex_);
  status_snapshot_ = std::move(status);
  batch_snapshot_ = std::move(batch);
  bootstrap_snapshot_ = {{"attributes", left_.attributes()}, {"pairs", std::move(boot)}};
}

json Session::status() const {
  std::scoped_lock state(state_mutex_);
  json s = status_snapshot_;
  s["status"] = to_string(lifecycle_);
  s["error"] = last_error_.empty() ? json(nullptr) : json(last_error_);
  return s;
}

json Session::batch() const {
  std::scoped_lock state(state_mutex_);
  json b = batch_snapshot_;
  // nothing is pending while a retrain is under way
  if (lifecycle_ != Lifecycle::awaiting_labels) b["pairs"] = json::array();
  b["status"] = to_string(lifecycle_);
  return b;
}

json Session::bootstrap_positives() const {
  std::scoped_lock state(state_mutex_);
  return bootstrap_snapshot_;
}

Lifecycle Session::lifecycle() const {
  std::scoped_lock state(state_mutex_);
  return lifecycle_;
}

Reply Session::submit_labels(const std::string& body) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::exception& e) {
    return error_reply(400, std::string("invalid JSON: ") + e.what());
  }
  if (!parsed.is_array()) return error_reply(400, "expected an array of {pair_id, label}");
  std::map<std::string, int> submitted;
  for (const json& item : parsed) {
    if (!item.is_object() || !item.contains("pair_id") || !item.contains("label") || !item["pair_id"].is_string() ||
        !item["label"].is_number_integer()) {
      return error_reply(400, "every item needs a string pair_id and an integer label");
    }
    const int label = item["label"].get<int>();
    if (label != 0 && label != 1) return error_reply(400, "labels must be 0 or 1");
    if (!submitted.emplace(item["pair_id"].get<std::string>(), label).second) {
      return error_reply(400, "duplicate pair_id " + item["pair_id"].get<std::string>());
    }
  }

  {
    std::scoped_lock state(state_mutex_);
    if (lifecycle_ != Lifecycle::awaiting_labels) {
      return error_reply(409, std::string("session is ") + to_string(lifecycle_) + ", not awaiting labels");
    }
    // claim the transition so concurrent submissions are rejected
    lifecycle_ = Lifecycle::retraining;
  }
  auto release = [&](Lifecycle back) {
    std::scoped_lock state(state_mutex_);
    lifecycle_ = back;
    state_changed_.notify_all();
  };

  std::scoped_lock lock(learner_mutex_);
  const auto& pending = learner_->pending();
  const auto& pool = learner_->pools().unlabeled;
  std::vector<int> labels;
  std::vector<al::JournalEntry> entries;
  const std::string stamp = al::utc_timestamp();
  for (const al::Proposal& p : pending) {
    const PairKey& key = pool.at(p.index).key;
    auto it = submitted.find(pair_id(key));
    if (it == submitted.end()) {
      release(Lifecycle::awaiting_labels);
      return error_reply(422, "missing label for pair " + pair_id(key) + "; the whole batch must be labeled");
    }
    labels.push_back(it->second);
    entries.push_back({learner_->iteration(), key, p.category, it->second, stamp});
  }
  if (submitted.size() != pending.size()) {
    release(Lifecycle::awaiting_labels);
    return error_reply(422, "labels submitted for pairs outside the current batch");
  }
  try {
    if (!options_.journal_path.empty()) al::Journal(options_.journal_path).append(entries);
  } catch (const Error& e) {
    release(Lifecycle::awaiting_labels);
    return error_reply(500, e.what());
  }
  learner_->apply_labels(labels);
  refresh_snapshot_locked();

  if (worker_.joinable()) worker_.join();
  worker_ = std::thread([this] { retrain_worker(); });
  return {202, {{"status", to_string(Lifecycle::retraining)}, {"accepted", labels.size()}}};
}

void Session::retrain_worker() {
  std::string error;
  bool pending = false;
  {
    std::scoped_lock lock(learner_mutex_);
    try {
      learner_->retrain();
      record_metrics_locked();
      pending = !learner_->propose().empty();
    } catch (const std::exception& e) {
      error = e.what();
    }
    refresh_snapshot_locked();
  }
  std::scoped_lock state(state_mutex_);
  last_error_ = error;
  if (lifecycle_ != Lifecycle::done) lifecycle_ = pending ? Lifecycle::awaiting_labels : Lifecycle::idle;
  state_changed_.notify_all();
}

Reply Session::finish() {
  std::scoped_lock state(state_mutex_);
  lifecycle_ = Lifecycle::done;
  state_changed_.notify_all();
  return {200, {{"status", to_string(Lifecycle::done)}}};
}

void Session::wait_until_settled() const {
  std::unique_lock state(state_mutex_);
  state_changed_.wait(state, [this] { return lifecycle_ != Lifecycle::retraining; });
  // a finish during retraining leaves lifecycle done with the worker still running
  state.unlock();
  std::scoped_lock lock(learner_mutex_);
}

void Session::wait_until_done() const {
  std::unique_lock state(state_mutex_);
  state_changed_.wait(state, [this] { return lifecycle_ == Lifecycle::done; });
}

al::LabelPools Session::pools() const {
  std::scoped_lock lock(learner_mutex_);
  return learner_->pools();
}

match::MatcherModel Session::matcher() const {
  std::scoped_lock lock(learner_mutex_);
  return learner_->matcher();
}

Server::Server(Session& session) : session_(session), server_(std::make_unique<httplib::Server>()) {
  auto send = [](httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };
  server_->set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  // httplib's default adds SO_REUSEPORT, which would let a second server
  // share the port instead of failing
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  server_->Get("/session", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, {200, session_.status()});
  });
  server_->Get("/session/batch", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, {200, session_.batch()});
  });
  server_->Get("/session/bootstrap", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, {200, session_.bootstrap_positives()});
  });
  server_->Post("/session/labels", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, session_.submit_labels(req.body));
  });
  server_->Post("/session/finish", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, session_.finish());
  });
  server_->Options(R"(/session.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
    if (bound < 0) throw NetworkError("cannot bind " + host);
  } else if (!server_->bind_to_port(host, port)) {
    throw NetworkError("port " + std::to_string(port) + " on " + host + " is busy");
  }
  listener_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Server::run() {
  session_.wait_until_done();
  // give the finish reply time to flush before the socket closes
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  stop();
}

void Server::stop() {
  if (server_) server_->stop();
  if (listener_.joinable()) listener_.join();
}

}  // namespace vaer::session
