#pragma once

// Session-based consultation API. The handler methods take and return JSON
// documents and HTTP status codes so they can be exercised without a
// socket; `mount` wires them onto a cpp-httplib server.
//
//   POST /api/v1/sessions              {"explicit": [names]}
//   POST /api/v1/sessions/{id}/answer  {"present": bool}
//   GET  /api/v1/sessions/{id}
//   GET  /api/v1/vocab
//   GET  /api/v1/health

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "nsc/inference/episode.hpp"
#include "nsc/model/bundle.hpp"

namespace nsc::service {

inline constexpr const char* kServiceVersion = "1.0.0";
inline constexpr std::size_t kTopK = 3;

struct Response {
  int status = 200;
  nlohmann::json body;
};

inline std::string new_session_id() {
  static std::mutex mu;
  static std::random_device rd;
  std::lock_guard lock(mu);
  static const char* hex = "0123456789abcdef";
  std::string id;
  for (int w = 0; w < 4; ++w) {
    std::uint32_t v = rd();
    for (int i = 0; i < 8; ++i) {
      id.push_back(hex[v & 0xF]);
      v >>= 4;
    }
  }
  return id;
}

/// The k most probable diseases, ties toward the lower id.
inline nlohmann::json top_diseases(const ModelBundle& bundle, const std::vector<float>& probs, std::size_t k = kTopK) {
  std::vector<std::size_t> ids(probs.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  auto arr = nlohmann::json::array();
  for (std::size_t i = 0; i < std::min(k, ids.size()); ++i)
    arr.push_back({{"disease", bundle.vocab.diseases.name(ids[i])}, {"prob", probs[ids[i]]}});
  return arr;
}

class ConsultationService {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  ConsultationService(std::shared_ptr<const ModelBundle> bundle, std::string checkpoint_hash,
                      std::chrono::seconds idle_ttl = std::chrono::minutes(30), Clock clock = {})
      : bundle_(std::move(bundle)),
        hash_(std::move(checkpoint_hash)),
        ttl_(idle_ttl),
        clock_(clock ? std::move(clock) : Clock([] { return std::chrono::steady_clock::now(); })) {}

  Response create_session(std::string_view body) {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return error(400, "malformed request body");
    }
    if (!req.is_object() || !req.contains("explicit") || !req["explicit"].is_array())
      return error(400, "field 'explicit' must be an array of symptom names");
    std::vector<std::string> names;
    for (const auto& n : req["explicit"]) {
      if (!n.is_string()) return error(400, "field 'explicit' must be an array of symptom names");
      names.push_back(n.get<std::string>());
    }
    if (names.empty()) return error(422, "at least one explicit symptom is required");
    std::vector<std::string> unknown;
    KnownState st(bundle_->num_symptoms());
    for (const auto& n : names) {
      if (auto id = bundle_->vocab.symptoms.find(n)) st.reveal(*id, true);
      else unknown.push_back(n);
    }
    if (!unknown.empty()) {
      auto r = error(400, "unknown symptom names");
      r.body["unknown"] = unknown;
      return r;
    }
    auto s = std::make_shared<Session>(new_session_id(), Consultation(*bundle_, std::move(st), bundle_->stopping),
                                       names, clock_());
    {
      std::lock_guard lock(mu_);
      purge_locked();
      sessions_.emplace(s->id, s);
    }
    std::lock_guard slock(s->mu);
    return {201, view(*s)};
  }

  Response answer(const std::string& id, std::string_view body) {
    auto s = find(id);
    if (!s) return error(404, "unknown session");
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return error(400, "malformed request body");
    }
    if (!req.is_object() || !req.contains("present") || !req["present"].is_boolean())
      return error(400, "field 'present' must be a boolean");
    std::lock_guard lock(s->mu);
    if (s->consultation.concluded()) return error(409, "session already concluded");
    s->consultation.answer(req["present"].get<bool>());
    s->updated = clock_();
    s->updated_wall = std::chrono::system_clock::now();
    return {200, view(*s)};
  }

  Response get_session(const std::string& id) {
    auto s = find(id);
    if (!s) return error(404, "unknown session");
    std::lock_guard lock(s->mu);
    auto body = view(*s);
    const auto& tr = s->consultation.trace();
    body["explicit"] = s->explicit_names;
    body["initial"] = {{"top", top_diseases(*bundle_, tr.initial_diagnosis)}, {"uncertainty", tr.initial_uncertainty}};
    auto steps = nlohmann::json::array();
    for (const auto& st : tr.steps)
      steps.push_back({{"question", bundle_->vocab.symptoms.name(st.symptom)},
                       {"answer", st.present},
                       {"top", top_diseases(*bundle_, st.diagnosis)},
                       {"uncertainty", st.uncertainty}});
    body["steps"] = std::move(steps);
    body["created"] = unix_seconds(s->created_wall);
    body["updated"] = unix_seconds(s->updated_wall);
    return {200, body};
  }

  Response vocab() const {
    return {200, {{"symptoms", bundle_->vocab.symptoms.names()}, {"diseases", bundle_->vocab.diseases.names()}}};
  }

  Response health() const {
    return {200,
            {{"status", "ok"},
             {"version", kServiceVersion},
             {"checkpoint_hash", hash_},
             {"symptoms", bundle_->num_symptoms()},
             {"diseases", bundle_->num_diseases()}}};
  }

  /// Drops sessions idle for longer than the TTL. Returns how many.
  std::size_t purge_expired() {
    std::lock_guard lock(mu_);
    return purge_locked();
  }

  std::size_t session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

 private:
  struct Session {
    Session(std::string id_, Consultation c, std::vector<std::string> names,
            std::chrono::steady_clock::time_point now)
        : id(std::move(id_)), consultation(std::move(c)), explicit_names(std::move(names)), updated(now) {}
    std::string id;
    Consultation consultation;
    std::vector<std::string> explicit_names;
    std::chrono::steady_clock::time_point updated;
    std::chrono::system_clock::time_point created_wall = std::chrono::system_clock::now();
    std::chrono::system_clock::time_point updated_wall = created_wall;
    std::mutex mu;
  };

  static Response error(int status, const std::string& msg) { return {status, {{"error", msg}}}; }

  static std::int64_t unix_seconds(std::chrono::system_clock::time_point t) {
    return std::chrono::duration_cast<std::chrono::seconds>(t.time_since_epoch()).count();
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lock(mu_);
    purge_locked();
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::size_t purge_locked() {
    const auto now = clock_();
    std::size_t n = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      bool expired;
      {
        std::lock_guard slock(it->second->mu);
        expired = now - it->second->updated > ttl_;
      }
      if (expired) {
        it = sessions_.erase(it);
        ++n;
      } else {
        ++it;
      }
    }
    return n;
  }

  nlohmann::json view(const Session& s) const {
    const auto& c = s.consultation;
    nlohmann::json q = nullptr;
    if (auto id = c.question()) q = bundle_->vocab.symptoms.name(*id);
    nlohmann::json reason = nullptr;
    if (c.concluded()) reason = std::string(to_string(c.trace().stop_reason));
    return {{"session_id", s.id},
            {"question", q},
            {"top", top_diseases(*bundle_, c.trace().final_diagnosis)},
            {"uncertainty", c.current_uncertainty()},
            {"status", c.concluded() ? "concluded" : "asking"},
            {"stop_reason", reason}};
  }

  std::shared_ptr<const ModelBundle> bundle_;
  std::string hash_;
  std::chrono::seconds ttl_;
  Clock clock_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
};

/// Registers the API routes (and CORS handling for `cors_origin`).
inline void mount(httplib::Server& server, ConsultationService& svc, const std::string& cors_origin = "*") {
  auto send = [cors_origin](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", cors_origin);
    res.set_content(r.body.dump(), "application/json; charset=utf-8");
  };
  server.Options(R"(/api/v1/.*)", [cors_origin](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Origin", cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  server.Post("/api/v1/sessions", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.create_session(req.body));
  });
  server.Post(R"(/api/v1/sessions/([0-9a-zA-Z]+)/answer)",
              [&svc, send](const httplib::Request& req, httplib::Response& res) {
                send(res, svc.answer(req.matches[1], req.body));
              });
  server.Get(R"(/api/v1/sessions/([0-9a-zA-Z]+))", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.get_session(req.matches[1]));
  });
  server.Get("/api/v1/vocab", [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.vocab()); });
  server.Get("/api/v1/health",
             [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.health()); });
}

}  // namespace nsc::service
