// Copyright 2026 The demoforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DEMOFORGE_SERVICE_HPP_
#define DEMOFORGE_SERVICE_HPP_

// Session service. The API is transport-independent: handle() maps a method,
// path and body to a status and body. http.hpp serves it over HTTP.
// Endpoint table: docs/service_api.md.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "demoforge/archive.hpp"
#include "demoforge/error.hpp"
#include "demoforge/demo.hpp"
#include "demoforge/kinematics.hpp"
#include "demoforge/serialize.hpp"

namespace demoforge {

inline constexpr int kApiSchema = 1;

struct ServiceOptions {
  std::filesystem::path data_root = ".";    // relative scene paths resolve here
  std::filesystem::path output_root = ".";  // datasets go to <output_root>/<session id>
  double voxel_resolution = 0.01;
  PlaneOptions plane;
  int cloud_stride = 1;
  KeyframeOptions keyframes;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  // NDJSON responses: one entry per line, in order. body holds the joined text.
  std::vector<std::string> lines;
};

class SessionService {
 public:
  SessionService(KinematicChain chain, ServiceOptions opts);
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  // Never throws: errors become structured 4xx/5xx responses.
  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body);

  // CRC32 of the canonical committed state plus pending preview ids.
  // Throws NotFound.
  std::uint32_t state_hash(const std::string& id) const;
  std::vector<std::string> session_ids() const;

 private:
  struct Preview {
    std::uint64_t id = 0;
    std::string token;
    Proposal proposal;
  };
  struct Session {
    std::string id;
    std::string scene_path;
    std::shared_ptr<const SessionArchive> archive;
    std::mutex mu;  // serializes mutations
    DemoSession demo;
    std::optional<Preview> pending;
    std::map<std::uint64_t, std::string> accepted;  // preview id -> token
    std::uint64_t next_preview = 1;
    std::optional<Json> finalized;  // finalize response, replayed on repeat calls
    std::mutex stop_mu;
    std::stop_source planning{std::nostopstate};  // live only while a proposal runs
    mutable std::mutex snap_mu;
    std::shared_ptr<const Json> snapshot;

    Session(std::string id, std::string scene, std::shared_ptr<const SessionArchive> a, DemoSession d)
        : id(std::move(id)), scene_path(std::move(scene)), archive(std::move(a)), demo(std::move(d)) {}
  };

  Json create_session(const Json& req);
  Json list_sessions() const;
  Json delete_session(const std::string& id);
  Json anchor(Session& s, const Json& req);
  Json set_mode(Session& s, const Json& req);
  Json submit_keypoint(Session& s, const Json& req);
  Json submit_pose(Session& s, const Json& req);
  Json submit_hand_frames(Session& s, std::string_view body);
  ApiResponse preview_stream(Session& s, std::uint64_t preview) const;
  Json accept(Session& s, std::uint64_t preview, const Json& req);
  Json discard(Session& s, std::uint64_t preview, const Json& req);
  Json cancel(Session& s);
  Json finalize(Session& s, const Json& req);
  Json geometry(Session& s) const;
  Json scene(Session& s, const Json& query) const;

  std::shared_ptr<Session> find(const std::string& id) const;
  // Installs a fresh stop source for one proposal and clears it afterwards.
  class PlanningScope {
   public:
    explicit PlanningScope(Session& s);
    ~PlanningScope();
    PlanningScope(const PlanningScope&) = delete;
    PlanningScope& operator=(const PlanningScope&) = delete;
    std::stop_token token() const { return token_; }

   private:
    Session& s_;
    std::stop_token token_;
  };
  Json offer(Session& s, Proposal p);
  static Json describe(const Session& s);
  static void refresh(Session& s);
  std::string new_token();

  KinematicChain chain_;
  ServiceOptions opts_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex rng_mu_;
  std::uint64_t rng_state_;
};

int http_status(ErrorCode code);

}  // namespace demoforge

#endif  // DEMOFORGE_SERVICE_HPP_
