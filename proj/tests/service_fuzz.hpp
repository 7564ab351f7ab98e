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

// Random-order endpoint driver shared by the service tests and the
// acceptance run.

#ifndef DEMOFORGE_TESTS_SERVICE_FUZZ_HPP_
#define DEMOFORGE_TESTS_SERVICE_FUZZ_HPP_

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "demoforge/demo.hpp"
#include "demoforge/serialize.hpp"
#include "demoforge/service.hpp"

namespace demoforge::testing {

inline Json point_body(double x, double y, double z, const std::string& gripper = "open") {
  return {{"schema", 1}, {"point", {x, y, z}}, {"gripper", gripper}};
}

// NDJSON hand frames sweeping across y, closing halfway.
inline std::string hand_stream(int n, double x0 = 0.45) {
  std::string s;
  const Eigen::Quaterniond down = top_down_orientation(Vec3::UnitZ());
  for (int i = 0; i < n; ++i) {
    const RigidTransform f(down, Vec3(x0, -0.1 + 0.2 * i / std::max(1, n - 1), 0.25));
    s += Json{{"schema", 1}, {"timestamp", i / 30.0}, {"frame", to_json(f)}, {"aperture", i < n / 2 ? 0.08 : 0.01}}
             .dump() +
         "\n";
  }
  return s;
}

struct FuzzReport {
  int calls = 0;
  int client_errors = 0;  // 4xx
  int server_errors = 0;  // 5xx
  int bad_bodies = 0;     // response not JSON
  int bad_transitions = 0;
  int finalized_changed = 0;  // hash moved after finalize
  std::size_t sessions = 0;
  std::size_t finalized = 0;
  std::vector<std::string> problems;

  bool ok() const { return server_errors == 0 && bad_bodies == 0 && bad_transitions == 0 && finalized_changed == 0; }
};

// Issues `calls` random requests against `service`, which must serve the
// bundled scene as "sample_session". After every call each live session must
// sit in the same state or the next one along
// scene_loaded -> anchored -> collecting -> finalized.
inline FuzzReport fuzz_service(SessionService& service, std::uint64_t seed, int calls) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::map<std::string, int> order = {{"scene_loaded", 1}, {"anchored", 2}, {"collecting", 3}, {"finalized", 4}};
  std::map<std::string, std::string> last_state;
  std::map<std::string, std::uint32_t> final_hash;
  std::map<std::string, std::string> tokens;    // "id/pid" -> token
  std::map<std::string, std::uint64_t> latest;  // id -> newest streamed preview
  std::vector<std::string> ids;
  FuzzReport rep;
  auto problem = [&](const std::string& what) {
    if (rep.problems.size() < 20) rep.problems.push_back(what);
  };

  for (int call = 0; call < calls; ++call) {
    const std::string id = ids.empty() || pick(10) == 0 ? "s-bogus" : ids[pick(ids.size())];
    const std::string base = "/v1/sessions/" + id;
    std::string method = "POST", path, body;
    const std::size_t kind = ids.empty() || pick(40) == 0 ? 0 : 1 + pick(15);
    std::uint64_t pid = 1 + pick(8);
    switch (kind) {
      case 0:
        path = "/v1/sessions";
        body = Json{{"schema", 1}, {"scene", pick(4) == 0 ? "missing" : "sample_session"}}.dump();
        break;
      case 1:
        path = base + "/anchor";
        body = Json{{"schema", 1}, {"point", {u(rng) * 0.5, u(rng) * 0.5, pick(3) == 0 ? 0.3 : 0.0}}}.dump();
        break;
      case 2: {
        static const char* modes[] = {"pointing", "gui", "kinesthetic", "telepathy"};
        path = base + "/mode";
        body = Json{{"schema", 1}, {"mode", modes[pick(4)]}}.dump();
        break;
      }
      case 3:
        path = base + "/keypoints";
        body = point_body(0.45 + 0.2 * u(rng), 0.3 * u(rng), 0.1 + 0.3 * std::abs(u(rng)) + (pick(5) == 0 ? 1.5 : 0.0),
                          pick(2) ? "open" : "closed")
                   .dump();
        break;
      case 4:
        path = base + "/poses";
        body = Json{{"schema", 1},
                    {"pose", to_json(RigidTransform(top_down_orientation(Vec3::UnitZ()),
                                                    Vec3(0.4 + 0.1 * u(rng), 0.2 * u(rng), 0.25)))}}
                   .dump();
        break;
      case 5:
        path = base + "/hand_frames";
        body = pick(3) == 0 ? "garbage\n" : hand_stream(8, 0.4 + 0.1 * u(rng));
        break;
      case 6:
        method = "GET";
        path = base + "/previews/" + std::to_string(pid) + "/stream";
        break;
      case 7: {
        if (latest.count(id) && pick(4)) pid = latest[id];
        path = base + "/previews/" + std::to_string(pid) + "/accept";
        const auto it = tokens.find(id + "/" + std::to_string(pid));
        body = Json{{"schema", 1}, {"token", it != tokens.end() && pick(4) ? it->second : "nope"}}.dump();
        break;
      }
      case 8:
        path = base + "/previews/" + std::to_string(pid) + "/discard";
        body = R"({"schema":1})";
        break;
      case 9:
        path = base + "/cancel";
        body = R"({"schema":1})";
        break;
      case 10:
        path = base + "/finalize";
        body = Json{{"schema", 1}, {"language_goal", pick(5) ? "tidy up" : ""}, {"export", {{"imagebc", false}}}}.dump();
        break;
      case 11:
        method = "GET";
        path = pick(2) ? base : base + "/geometry";
        break;
      case 12:
        method = pick(2) ? "GET" : "PATCH";
        path = pick(2) ? "/v1/health" : base + "/unknown";
        break;
      case 13:
        path = base + "/keypoints";
        body = pick(2) ? R"({"schema":1,"point":[0,0],"extra":true})" : "[1,2";
        break;
      case 14:
        if (pick(10) == 0) {
          method = "DELETE";
          path = base;
        } else {
          method = "GET";
          path = base + "/scene?max_points=100";
        }
        break;
      default:
        path = base + "/previews/" + std::to_string(pid) + "/accept";
        body = R"({"schema":1})";
        break;
    }

    const ApiResponse r = service.handle(method, path, body);
    ++rep.calls;
    const std::string label = method + " " + path;
    if (r.status >= 500) {
      ++rep.server_errors;
      problem(label + " -> " + r.body);
    } else if (r.status >= 400) {
      ++rep.client_errors;
    }
    bool parsed = r.lines.empty() ? Json::accept(r.body) : true;
    for (const std::string& line : r.lines) parsed = parsed && Json::accept(line);
    if (!parsed) {
      ++rep.bad_bodies;
      problem(label + ": unparsable response");
      continue;
    }
    if (kind == 0 && r.status == 201) ids.push_back(Json::parse(r.body)["session"]["id"]);
    if (method == "DELETE" && r.status == 200) {
      std::erase(ids, id);
      last_state.erase(id);
      final_hash.erase(id);
    }
    if (kind == 6 && r.status == 200) tokens[id + "/" + std::to_string(pid)] = Json::parse(r.lines.back())["token"];
    if (kind >= 3 && kind <= 5 && r.status == 200) {
      // Stream new previews straight away so accepts have tokens to use.
      const std::uint64_t np = Json::parse(r.body)["preview"]["id"];
      const ApiResponse s = service.handle("GET", base + "/previews/" + std::to_string(np) + "/stream", "");
      if (s.status != 200 || s.lines.empty()) {
        ++rep.bad_transitions;
        problem(label + ": fresh preview not streamable");
        continue;
      }
      tokens[id + "/" + std::to_string(np)] = Json::parse(s.lines.back())["token"];
      latest[id] = np;
    }

    for (const std::string& sid : ids) {
      const Json s = Json::parse(service.handle("GET", "/v1/sessions/" + sid, "").body)["session"];
      const std::string st = s.value("state", "");
      if (!order.count(st)) {
        ++rep.bad_transitions;
        problem(sid + ": unknown state '" + st + "'");
        continue;
      }
      if (const auto it = last_state.find(sid); it != last_state.end()) {
        const int from = order.at(it->second), to = order.at(st);
        if (to != from && to != from + 1) {
          ++rep.bad_transitions;
          problem(sid + ": " + it->second + " -> " + st + " after " + label);
        }
      }
      last_state[sid] = st;
      if (st == "finalized") {
        const std::uint32_t h = service.state_hash(sid);
        if (const auto it = final_hash.find(sid); it != final_hash.end() && it->second != h) {
          ++rep.finalized_changed;
          problem(sid + ": finalized state changed after " + label);
        }
        final_hash[sid] = h;
      }
    }
  }
  rep.sessions = ids.size();
  rep.finalized = final_hash.size();
  return rep;
}

// Submits random keypoints and discards each preview; returns how many
// discards left the state hash different from before the submission.
inline int discard_hash_violations(SessionService& service, const std::string& id, std::uint64_t seed, int rounds,
                                   int* previews = nullptr) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int bad = 0, made = 0;
  for (int i = 0; i < rounds; ++i) {
    const std::string base = "/v1/sessions/" + id;
    const std::uint32_t before = service.state_hash(id);
    const Json req = point_body(0.45 + 0.15 * u(rng), 0.25 * u(rng), 0.12 + 0.2 * std::abs(u(rng)), rng() % 2 ? "open" : "closed");
    const ApiResponse sub = service.handle("POST", base + "/keypoints", req.dump());
    if (sub.status != 200) continue;
    ++made;
    const std::string pid = std::to_string(Json::parse(sub.body)["preview"]["id"].get<std::uint64_t>());
    service.handle("GET", base + "/previews/" + pid + "/stream", "");
    const ApiResponse d = service.handle("POST", base + "/previews/" + pid + "/discard", R"({"schema":1})");
    if (d.status != 200 || service.state_hash(id) != before) ++bad;
    // Every few rounds commit one so the hash is checked over a growing state.
    if (i % 10 == 9) {
      const ApiResponse again = service.handle("POST", base + "/keypoints", req.dump());
      if (again.status == 200) {
        const std::string p2 = std::to_string(Json::parse(again.body)["preview"]["id"].get<std::uint64_t>());
        const ApiResponse s = service.handle("GET", base + "/previews/" + p2 + "/stream", "");
        service.handle("POST", base + "/previews/" + p2 + "/accept",
                       Json{{"schema", 1}, {"token", Json::parse(s.lines.back())["token"]}}.dump());
      }
    }
  }
  if (previews) *previews = made;
  return bad;
}

}  // namespace demoforge::testing

#endif  // DEMOFORGE_TESTS_SERVICE_FUZZ_HPP_
