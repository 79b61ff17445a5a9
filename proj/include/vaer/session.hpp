#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "vaer/al.hpp"
#include "vaer/corpus.hpp"
#include "vaer/ir.hpp"
#include "vaer/repr.hpp"

namespace httplib {
class Server;
}

namespace vaer::session {

using nlohmann::json;

enum class Lifecycle { awaiting_labels, retraining, idle, done };
const char* to_string(Lifecycle lifecycle);

struct SessionOptions {
  /// Append-only label journal; replayed on start when it already exists.
  std::string journal_path;
  /// Optional ground truth for per-iteration metrics.
  std::optional<PairSet> test;
};

/// HTTP reply produced by a session operation.
struct Reply {
  int status = 200;
  json body;
};

/// One active-learning session: owns the tables, the learner and the
/// journal. Reads are answered from a snapshot and never wait for
/// retraining; writes are serialized.
class Session {
 public:
  Session(Table left, Table right, std::shared_ptr<const ir::Provider> provider, repr::VaeModel vae,
          al::LearnerConfig config, SessionOptions options);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Bootstrap, journal replay and the first batch. Blocking.
  void start();

  json status() const;
  json batch() const;
  json bootstrap_positives() const;
  /// Body: [{"pair_id": ..., "label": 0|1}, ...] covering the whole batch.
  /// Retraining continues in the background after the reply.
  Reply submit_labels(const std::string& body);
  Reply finish();

  /// Blocks until no retraining is in progress.
  void wait_until_settled() const;
  /// Blocks until finish() was called.
  void wait_until_done() const;

  Lifecycle lifecycle() const;
  al::LabelPools pools() const;
  match::MatcherModel matcher() const;

  static std::string pair_id(const PairKey& key) { return key.left + "|" + key.right; }

 private:
  void refresh_snapshot_locked();  // requires learner_mutex_
  void record_metrics_locked();    // requires learner_mutex_
  void retrain_worker();

  Table left_;
  Table right_;
  std::shared_ptr<const ir::Provider> provider_;
  repr::VaeModel vae_;
  al::LearnerConfig config_;
  SessionOptions options_;
  al::Workspace workspace_;
  std::unique_ptr<al::ActiveLearner> learner_;
  std::string session_id_;

  mutable std::mutex learner_mutex_;  // learner, metrics history
  json history_ = json::array();

  mutable std::mutex state_mutex_;  // everything below
  mutable std::condition_variable state_changed_;
  Lifecycle lifecycle_ = Lifecycle::idle;
  json status_snapshot_;
  json batch_snapshot_;
  json bootstrap_snapshot_;
  std::string last_error_;
  std::thread worker_;
};

/// Localhost HTTP front end for a Session.
///   GET  /session            status, iteration, pools, metrics
///   GET  /session/batch      pending pairs
///   GET  /session/bootstrap  automatically labeled positives
///   POST /session/labels     labels for the whole batch
///   POST /session/finish     ends the session
class Server {
 public:
  explicit Server(Session& session);
  ~Server();

  /// Binds to host:port (port 0 picks a free one) and returns the bound
  /// port. Throws NetworkError when the port is taken.
  int bind(const std::string& host, int port);
  /// Serves until the session is finished or stop() is called.
  void run();
  void stop();

 private:
  Session& session_;
  std::unique_ptr<httplib::Server> server_;
  std::thread listener_;
};

}  // namespace vaer::session
