#pragma once

#include <filesystem>
#include <json.hpp>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "matformer/generation.hpp"
#include "matformer/graph.hpp"

namespace httplib {
class Server;
}

namespace matformer {

/// Environment variable naming the session directory.
inline constexpr const char* kDataDirEnv = "MATFORMER_DATA_DIR";
inline constexpr int kThumbnailSize = 128;
inline constexpr int kMaxCompletions = 16;

struct Candidate {
  MaterialGraph graph;
  std::vector<bool> pinned;  // per node: kept from the partial graph
};

struct CompletionRound {
  int round = 0;
  std::vector<NodeId> pinned;
  int count = 0;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  std::vector<Candidate> candidates;
  std::optional<int> accepted;  // candidate index
  std::vector<NodeId> kept;
};

struct Session {
  std::string id;
  int revision = 0;  // bumped by every accept
  MaterialGraph graph;
  std::vector<CompletionRound> history;
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

/// Session state and the JSON API, independent of the HTTP transport. Every
/// mutation is appended to <data_dir>/<id>.jsonl before it is applied, and
/// the logs are replayed on construction.
class AuthoringService {
 public:
  /// `bundle` may be null; completion requests then answer 503.
  AuthoringService(std::shared_ptr<const OperatorLibrary> library, std::shared_ptr<const ModelBundle> bundle,
                   std::filesystem::path data_dir);

  ServiceResponse handle(const std::string& method, const std::string& path, const std::string& body);

  ServiceResponse create_session(const nlohmann::json& request);
  ServiceResponse get_session(const std::string& id) const;
  ServiceResponse complete(const std::string& id, const nlohmann::json& request);
  ServiceResponse accept(const std::string& id, const nlohmann::json& request);
  ServiceResponse library() const;

  int session_count() const;
  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  struct Entry {
    explicit Entry(std::shared_ptr<const OperatorLibrary> library) : session{"", 0, MaterialGraph(std::move(library)), {}} {}
    std::mutex mutex;
    Session session;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void append_event(const std::string& id, const nlohmann::json& event) const;
  void replay(const std::filesystem::path& log);
  void apply(Session& session, const nlohmann::json& event) const;
  nlohmann::json session_json(const Session& session) const;
  nlohmann::json candidate_json(const Candidate& c, int index, bool thumbnails) const;

  std::shared_ptr<const OperatorLibrary> library_;
  std::shared_ptr<const ModelBundle> bundle_;
  std::filesystem::path data_dir_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// HTTP transport for an AuthoringService: GET and POST on any path are
/// forwarded to handle().
class HttpFrontend {
 public:
  explicit HttpFrontend(AuthoringService& service);
  ~HttpFrontend();
  /// Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void serve();
  void stop();

 private:
  std::unique_ptr<httplib::Server> server_;
};

/// Serves the API on host:port until the process is stopped.
void run_http_service(AuthoringService& service, const std::string& host, int port);

}  // namespace matformer
