#include "matformer/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "matformer/evaluator.hpp"
#include "matformer/graph_io.hpp"
#include "matformer/operators.hpp"

namespace matformer {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ServiceResponse error(int status, const std::string& message) { return {status, json{{"error", message}}}; }

std::string new_session_id() {
  static std::mutex mutex;
  static std::mt19937_64 rng(std::random_device{}());
  std::lock_guard lock(mutex);
  return hex64(rng());
}

bool valid_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; });
}

std::vector<NodeId> id_list(const json& j, const char* field) {
  if (!j.is_array()) throw std::invalid_argument(std::string(field) + " must be an array of node ids");
  std::vector<NodeId> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw std::invalid_argument(std::string(field) + " must hold integers");
    out.push_back(v.get<NodeId>());
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw std::invalid_argument(std::string(field) + " lists a node twice");
  }
  return out;
}

void check_ids(const std::vector<NodeId>& ids, const MaterialGraph& g, const char* field) {
  for (NodeId id : ids) {
    if (id < 0 || id >= g.node_count()) {
      throw std::invalid_argument(std::string(field) + " names node " + std::to_string(id) + ", graph has " +
                                  std::to_string(g.node_count()) + " nodes");
    }
  }
}

}  // namespace

AuthoringService::AuthoringService(std::shared_ptr<const OperatorLibrary> library,
                                   std::shared_ptr<const ModelBundle> bundle, fs::path data_dir)
    : library_(std::move(library)), bundle_(std::move(bundle)), data_dir_(std::move(data_dir)) {
  if (bundle_ && bundle_->library->hash() != library_->hash()) {
    throw std::invalid_argument("model bundle was trained for a different operator library");
  }
  fs::create_directories(data_dir_);
  std::vector<fs::path> logs;
  for (const auto& entry : fs::directory_iterator(data_dir_)) {
    if (entry.path().extension() == ".jsonl") logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& p : logs) replay(p);
}

void AuthoringService::replay(const fs::path& log) {
  std::ifstream in(log);
  std::string line;
  std::shared_ptr<Entry> entry;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json event;
    try {
      event = json::parse(line);
    } catch (const json::parse_error&) {
      // A torn final line from an interrupted write is dropped.
      break;
    }
    if (!entry) {
      if (event.value("event", "") != "create") {
        throw std::runtime_error(log.string() + ": log does not start with a create event");
      }
      entry = std::make_shared<Entry>(library_);
      entry->session.id = event.at("id");
    }
    try {
      apply(entry->session, event);
    } catch (const std::exception& e) {
      throw std::runtime_error(log.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (entry) sessions_[entry->session.id] = entry;
}

void AuthoringService::apply(Session& s, const json& event) const {
  const std::string kind = event.at("event");
  if (kind == "create") {
    s.graph = event.contains("graph") ? graph_from_json(event["graph"], library_) : MaterialGraph(library_);
  } else if (kind == "complete") {
    CompletionRound r;
    r.round = event.at("round");
    r.pinned = event.at("pinned").get<std::vector<NodeId>>();
    r.count = event.at("count");
    r.temperature = event.at("temperature");
    r.seed = event.at("seed");
    for (const auto& c : event.at("candidates")) {
      r.candidates.push_back({graph_from_json(c.at("graph"), library_), c.at("pinned").get<std::vector<bool>>()});
    }
    s.history.push_back(std::move(r));
  } else if (kind == "accept") {
    const int round = event.at("round");
    auto it = std::find_if(s.history.begin(), s.history.end(), [&](const auto& r) { return r.round == round; });
    if (it == s.history.end()) throw std::runtime_error("accept names an unknown round");
    const int index = event.at("candidate");
    const auto kept = event.at("kept").get<std::vector<NodeId>>();
    const auto& candidate = it->candidates.at(static_cast<size_t>(index));
    check_ids(kept, candidate.graph, "kept");
    s.graph = induced_subgraph(candidate.graph, kept);
    it->accepted = index;
    it->kept = kept;
    ++s.revision;
  } else {
    throw std::runtime_error("unknown event " + kind);
  }
}

void AuthoringService::append_event(const std::string& id, const json& event) const {
  std::ofstream out(data_dir_ / (id + ".jsonl"), std::ios::app);
  out << event.dump() << "\n";
  out.flush();
  if (!out) throw std::runtime_error("cannot write session log for " + id);
}

std::shared_ptr<AuthoringService::Entry> AuthoringService::find(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

int AuthoringService::session_count() const {
  std::lock_guard lock(sessions_mutex_);
  return static_cast<int>(sessions_.size());
}

json AuthoringService::session_json(const Session& s) const {
  json history = json::array();
  for (const auto& r : s.history) {
    json candidates = json::array();
    for (size_t i = 0; i < r.candidates.size(); ++i) candidates.push_back(candidate_json(r.candidates[i], static_cast<int>(i), false));
    history.push_back({{"round", r.round},
                       {"pinned", r.pinned},
                       {"count", r.count},
                       {"temperature", r.temperature},
                       {"seed", r.seed},
                       {"accepted", r.accepted ? json(*r.accepted) : json(nullptr)},
                       {"kept", r.kept},
                       {"candidates", candidates}});
  }
  return {{"id", s.id},
          {"revision", s.revision},
          {"graph", graph_to_json(s.graph)},
          {"graph_hash", graph_hash(s.graph)},
          {"history", history}};
}

json AuthoringService::candidate_json(const Candidate& c, int index, bool thumbnails) const {
  json provenance = json::array();
  for (bool p : c.pinned) provenance.push_back(p ? "pinned" : "generated");
  json j = {{"index", index},
            {"graph", graph_to_json(c.graph)},
            {"graph_hash", graph_hash(c.graph)},
            {"provenance", provenance}};
  if (thumbnails) {
    const auto out = evaluate_graph(c.graph, kThumbnailSize);
    json thumbs = json::object();
    for (const auto& ch : material_channels()) thumbs[ch] = base64_encode(encode_png(out.channel(ch)));
    j["thumbnails"] = thumbs;
  }
  return j;
}

ServiceResponse AuthoringService::create_session(const json& request) {
  auto entry = std::make_shared<Entry>(library_);
  entry->session.id = new_session_id();
  json event = {{"event", "create"}, {"id", entry->session.id}};
  if (request.is_object() && request.contains("graph") && !request["graph"].is_null()) {
    try {
      event["graph"] = graph_to_json(graph_from_json(request["graph"], library_));
    } catch (const std::exception& e) {
      return error(422, std::string("invalid graph: ") + e.what());
    }
  }
  apply(entry->session, event);
  append_event(entry->session.id, event);
  {
    std::lock_guard lock(sessions_mutex_);
    sessions_[entry->session.id] = entry;
  }
  return {201, session_json(entry->session)};
}

ServiceResponse AuthoringService::get_session(const std::string& id) const {
  auto entry = find(id);
  if (!entry) return error(404, "unknown session " + id);
  std::lock_guard lock(entry->mutex);
  return {200, session_json(entry->session)};
}

ServiceResponse AuthoringService::complete(const std::string& id, const json& request) {
  auto entry = find(id);
  if (!entry) return error(404, "unknown session " + id);
  if (!bundle_) return error(503, "service started without models");
  MaterialGraph partial(library_);
  std::vector<NodeId> pinned;
  SamplerConfig config;
  int count = 3;
  bool thumbnails = true;
  int revision = 0;
  {
    std::lock_guard lock(entry->mutex);
    partial = entry->session.graph;
    revision = entry->session.revision;
  }
  try {
    const json req = request.is_object() ? request : json::object();
    if (req.contains("pinned")) {
      pinned = id_list(req["pinned"], "pinned");
      check_ids(pinned, partial, "pinned");
    } else {
      for (NodeId i = 0; i < partial.node_count(); ++i) pinned.push_back(i);
    }
    count = req.value("count", 3);
    if (count < 1 || count > kMaxCompletions) {
      throw std::invalid_argument("count must lie in [1, " + std::to_string(kMaxCompletions) + "]");
    }
    const double temperature = req.value("temperature", 1.0);
    if (!(temperature >= 0.0) || temperature > 10.0) throw std::invalid_argument("temperature must lie in [0, 10]");
    config = SamplerConfig::uniform(temperature, false, req.value("seed", std::uint64_t{1}));
    thumbnails = req.value("thumbnails", true);
  } catch (const json::exception& e) {
    return error(422, e.what());
  } catch (const std::invalid_argument& e) {
    return error(422, e.what());
  }

  std::vector<GeneratedGraph> generated;
  try {
    generated = autocomplete(*bundle_, partial, pinned, count, config);
  } catch (const SequenceError& e) {
    return error(422, std::string("partial graph exceeds the model limits: ") + e.what());
  } catch (const std::invalid_argument& e) {
    return error(422, e.what());
  }

  json event = {{"event", "complete"},
                {"pinned", pinned},
                {"count", count},
                {"temperature", config.nodes.temperature},
                {"seed", config.seed}};
  json candidates = json::array();
  std::vector<Candidate> kept;
  for (auto& g : generated) {
    candidates.push_back({{"graph", graph_to_json(g.graph)}, {"pinned", g.pinned}});
    kept.push_back({std::move(g.graph), std::move(g.pinned)});
  }
  event["candidates"] = candidates;

  json response;
  {
    std::lock_guard lock(entry->mutex);
    if (entry->session.revision != revision) return error(409, "session changed while completing; retry");
    event["round"] = static_cast<int>(entry->session.history.size()) + 1;
    append_event(id, event);
    apply(entry->session, event);
    response = {{"round", event["round"]}, {"revision", entry->session.revision}};
  }
  json list = json::array();
  for (size_t i = 0; i < kept.size(); ++i) list.push_back(candidate_json(kept[i], static_cast<int>(i), thumbnails));
  response["candidates"] = list;
  return {200, response};
}

ServiceResponse AuthoringService::accept(const std::string& id, const json& request) {
  auto entry = find(id);
  if (!entry) return error(404, "unknown session " + id);
  std::lock_guard lock(entry->mutex);
  auto& s = entry->session;
  if (!request.is_object()) return error(422, "accept needs a JSON object body");
  if (s.history.empty()) return error(409, "session has no completion round to accept");
  auto& latest = s.history.back();
  int index = 0;
  std::vector<NodeId> kept;
  try {
    if (request.contains("round") && request["round"].get<int>() != latest.round) {
      return error(409, "round " + std::to_string(request["round"].get<int>()) + " is not the latest round");
    }
    if (request.contains("revision") && request["revision"].get<int>() != s.revision) {
      return error(409, "session revision is " + std::to_string(s.revision));
    }
    if (latest.accepted) return error(409, "round " + std::to_string(latest.round) + " was already accepted");
    index = request.at("candidate").get<int>();
    if (index < 0 || index >= static_cast<int>(latest.candidates.size())) {
      return error(422, "candidate index out of range");
    }
    const auto& candidate = latest.candidates[static_cast<size_t>(index)];
    if (request.contains("kept")) {
      kept = id_list(request["kept"], "kept");
      check_ids(kept, candidate.graph, "kept");
    } else {
      for (NodeId i = 0; i < candidate.graph.node_count(); ++i) kept.push_back(i);
    }
  } catch (const json::exception& e) {
    return error(422, e.what());
  } catch (const std::invalid_argument& e) {
    return error(422, e.what());
  }
  const json event = {{"event", "accept"}, {"round", latest.round}, {"candidate", index}, {"kept", kept}};
  append_event(id, event);
  apply(s, event);
  return {200, {{"graph", graph_to_json(s.graph)}, {"graph_hash", graph_hash(s.graph)}, {"revision", s.revision}}};
}

ServiceResponse AuthoringService::library() const { return {200, library_to_json(*library_)}; }

ServiceResponse AuthoringService::handle(const std::string& method, const std::string& path, const std::string& body) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string p; std::getline(ss, p, '/');) {
    if (!p.empty()) parts.push_back(p);
  }
  json request;
  if (method == "POST" && !body.empty()) {
    try {
      request = json::parse(body);
    } catch (const json::parse_error& e) {
      return error(400, std::string("malformed JSON: ") + e.what());
    }
  }
  if (parts.size() < 2 || parts[0] != "v1") return error(404, "no route for " + path);
  if (parts.size() == 2 && parts[1] == "library") {
    return method == "GET" ? library() : error(405, "use GET");
  }
  if (parts[1] != "sessions") return error(404, "no route for " + path);
  if (parts.size() == 2) return method == "POST" ? create_session(request) : error(405, "use POST");
  if (!valid_id(parts[2])) return error(404, "unknown session " + parts[2]);
  if (parts.size() == 3) return method == "GET" ? get_session(parts[2]) : error(405, "use GET");
  if (parts.size() == 4 && parts[3] == "complete") return method == "POST" ? complete(parts[2], request) : error(405, "use POST");
  if (parts.size() == 4 && parts[3] == "accept") return method == "POST" ? accept(parts[2], request) : error(405, "use POST");
  return error(404, "no route for " + path);
}

HttpFrontend::HttpFrontend(AuthoringService& service) : server_(std::make_unique<httplib::Server>()) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    ServiceResponse r;
    try {
      r = service.handle(req.method, req.path, req.body);
    } catch (const std::exception& e) {
      r = error(500, e.what());
    }
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Get(".*", forward);
  server_->Post(".*", forward);
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void HttpFrontend::serve() { server_->listen_after_bind(); }

void HttpFrontend::stop() {
  if (server_->is_running()) server_->stop();
}

void run_http_service(AuthoringService& service, const std::string& host, int port) {
  HttpFrontend frontend(service);
  frontend.bind(host, port);
  frontend.serve();
}

}  // namespace matformer
