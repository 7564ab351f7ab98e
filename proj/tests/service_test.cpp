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

#include "demoforge/service.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "httplib.h"

#include "demoforge/http.hpp"
#include "service_fuzz.hpp"

namespace demoforge {
namespace {

namespace fs = std::filesystem;
using testing::hand_stream;
using testing::point_body;

const std::string kData = DEMOFORGE_DATA_DIR;

struct Fixture {
  fs::path out;
  SessionService service;

  explicit Fixture(const std::string& name)
      : out(fs::temp_directory_path() / ("demoforge_service_" + name)),
        service(KinematicChain::load(kData + "/franka_style.chain.json"), options(out)) {}

  static ServiceOptions options(const fs::path& out) {
    fs::remove_all(out);
    ServiceOptions o;
    o.data_root = kData;
    o.output_root = out;
    return o;
  }

  ApiResponse call(std::string_view method, const std::string& path, const Json& body = nullptr) {
    return service.handle(method, path, body.is_null() ? "" : body.dump());
  }
  Json ok(std::string_view method, const std::string& path, const Json& body = nullptr) {
    const ApiResponse r = call(method, path, body);
    EXPECT_LT(r.status, 300) << method << " " << path << " -> " << r.body;
    return Json::parse(r.body);
  }
  std::string create() { return ok("POST", "/v1/sessions", {{"schema", 1}, {"scene", "sample_session"}})["session"]["id"]; }
  std::string collecting(const std::string& mode) {
    const std::string id = create();
    ok("POST", "/v1/sessions/" + id + "/anchor", {{"schema", 1}, {"point", {0.0, 0.0, 0.0}}});
    ok("POST", "/v1/sessions/" + id + "/mode", {{"schema", 1}, {"mode", mode}});
    return id;
  }
  std::string state(const std::string& id) { return ok("GET", "/v1/sessions/" + id)["session"]["state"]; }
  // Submit, stream, and return (preview id, token).
  std::pair<std::uint64_t, std::string> preview(const std::string& id, const std::string& endpoint, const Json& body) {
    const Json sub = ok("POST", "/v1/sessions/" + id + "/" + endpoint, body);
    const std::uint64_t pid = sub["preview"]["id"];
    const ApiResponse s = call("GET", "/v1/sessions/" + id + "/previews/" + std::to_string(pid) + "/stream");
    EXPECT_EQ(s.status, 200);
    return {pid, Json::parse(s.lines.back())["token"]};
  }
  void accept(const std::string& id, std::uint64_t pid, const std::string& token) {
    ok("POST", "/v1/sessions/" + id + "/previews/" + std::to_string(pid) + "/accept", {{"schema", 1}, {"token", token}});
  }
};

std::string error_code(const ApiResponse& r) {
  const Json j = Json::parse(r.body);
  return j.contains("error") ? j["error"]["code"].get<std::string>() : "";
}

TEST(Service, CreateSession) {
  Fixture f("create");
  const Json s = f.ok("POST", "/v1/sessions", {{"schema", 1}, {"scene", "sample_session"}})["session"];
  EXPECT_EQ(s["state"], "scene_loaded");
  ASSERT_FALSE(s["plane"].is_null());
  EXPECT_NEAR(s["plane"]["normal"][2].get<double>(), 1.0, 1e-3);
  EXPECT_EQ(f.ok("GET", "/v1/sessions")["sessions"].size(), 1u);
  EXPECT_EQ(f.ok("GET", "/v1/health")["status"], "ok");

  const ApiResponse missing = f.call("POST", "/v1/sessions", {{"schema", 1}, {"scene", "no_such_scene"}});
  EXPECT_EQ(missing.status, 404);
  EXPECT_EQ(error_code(missing), "SceneNotFound");
}

TEST(Service, TruncatedArchiveIsCorrupt) {
  Fixture f("truncated");
  const fs::path copy = f.out / "scene";
  fs::create_directories(f.out);
  fs::copy(kData + "/sample_session", copy, fs::copy_options::recursive);
  const auto bytes = read_file(copy / "frames/000007.depth.z");
  write_file(copy / "frames/000007.depth.z", std::span(bytes).first(bytes.size() / 2));
  const ApiResponse r = f.call("POST", "/v1/sessions", {{"schema", 1}, {"scene", copy.string()}});
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(error_code(r), "SceneCorrupt");
  EXPECT_NE(r.body.find("frame 7"), std::string::npos);
}

TEST(Service, SchemaEnforced) {
  Fixture f("schema");
  EXPECT_EQ(f.call("POST", "/v1/sessions", {{"scene", "sample_session"}}).status, 400);
  EXPECT_EQ(f.call("POST", "/v1/sessions", {{"schema", 2}, {"scene", "sample_session"}}).status, 400);
  const ApiResponse extra = f.call("POST", "/v1/sessions", {{"schema", 1}, {"scene", "sample_session"}, {"colour", 1}});
  EXPECT_EQ(extra.status, 400);
  EXPECT_EQ(error_code(extra), "Schema");
  EXPECT_EQ(f.service.handle("POST", "/v1/sessions", "{oops").status, 400);
  EXPECT_EQ(f.call("GET", "/v2/health").status, 404);
  EXPECT_EQ(f.call("PUT", "/v1/health").status, 405);
  EXPECT_EQ(f.call("GET", "/v1/sessions/nope").status, 404);
}

TEST(Service, Anchor) {
  Fixture f("anchor");
  const std::string id = f.create();
  const std::string path = "/v1/sessions/" + id + "/anchor";
  const Json a = f.ok("POST", path, {{"schema", 1}, {"point", {0.3, 0.1, 0.001}}});
  const RigidTransform base = transform_from_json(a["base_pose"]);
  const Json plane = f.ok("GET", "/v1/sessions/" + id)["session"]["plane"];
  const Vec3 n = vec3_from_json(plane["normal"], "n");
  EXPECT_LT((base.rotate(Vec3::UnitZ()) - n).norm(), 1e-12);
  EXPECT_NEAR(n.dot(base.translation()), plane["offset"].get<double>(), 1e-12);
  EXPECT_EQ(f.state(id), "anchored");

  const ApiResponse off = f.call("POST", path, {{"schema", 1}, {"point", {0.3, 0.1, 0.5}}, {"max_distance", 0.05}});
  EXPECT_EQ(off.status, 422);
  EXPECT_EQ(error_code(off), "PointOffPlane");

  // Re-anchoring before collecting replaces the pose.
  const Json b = f.ok("POST", path, {{"schema", 1}, {"point", {0.0, 0.0, 0.0}}});
  EXPECT_NE(a["base_pose"], b["base_pose"]);
  f.ok("POST", "/v1/sessions/" + id + "/mode", {{"schema", 1}, {"mode", "pointing"}});
  EXPECT_EQ(error_code(f.call("POST", path, {{"schema", 1}, {"point", {0.0, 0.0, 0.0}}})), "InvalidState");
}

TEST(Service, OutOfOrderCallsRejected) {
  Fixture f("order");
  const std::string id = f.create();
  EXPECT_EQ(error_code(f.call("POST", "/v1/sessions/" + id + "/mode", {{"schema", 1}, {"mode", "gui"}})), "InvalidState");
  EXPECT_EQ(error_code(f.call("POST", "/v1/sessions/" + id + "/keypoints", point_body(0.4, 0, 0.2))), "InvalidState");
  EXPECT_EQ(error_code(f.call("POST", "/v1/sessions/" + id + "/finalize", {{"schema", 1}, {"language_goal", "x"}})),
            "EmptySession");
  EXPECT_EQ(f.state(id), "scene_loaded");
}

TEST(Service, PreviewStreamAcceptDiscard) {
  Fixture f("preview");
  const std::string id = f.collecting("pointing");
  const std::uint32_t before = f.service.state_hash(id);

  const Json sub = f.ok("POST", "/v1/sessions/" + id + "/keypoints", point_body(0.45, 0.1, 0.2));
  const std::uint64_t pid = sub["preview"]["id"];
  const ApiResponse s = f.call("GET", "/v1/sessions/" + id + "/previews/" + std::to_string(pid) + "/stream");
  ASSERT_EQ(s.status, 200);
  EXPECT_EQ(s.content_type, "application/x-ndjson");
  ASSERT_GE(s.lines.size(), 3u);
  EXPECT_EQ(Json::parse(s.lines.front())["type"], "preview");
  double last_t = -1.0;
  for (std::size_t i = 1; i + 1 < s.lines.size(); ++i) {
    const Json j = Json::parse(s.lines[i]);
    EXPECT_EQ(j["type"], "sample");
    EXPECT_GT(j["t"].get<double>(), last_t);
    last_t = j["t"];
  }
  const Json end = Json::parse(s.lines.back());
  EXPECT_EQ(end["type"], "end");

  // Discard leaves the committed state bit-identical.
  f.ok("POST", "/v1/sessions/" + id + "/previews/" + std::to_string(pid) + "/discard", {{"schema", 1}});
  EXPECT_EQ(f.service.state_hash(id), before);
  EXPECT_EQ(f.ok("GET", "/v1/sessions/" + id)["session"]["trajectory_samples"], 0);
  EXPECT_EQ(f.call("POST", "/v1/sessions/" + id + "/previews/" + std::to_string(pid) + "/accept",
                   {{"schema", 1}, {"token", end["token"]}}).status, 404);

  const auto [p2, token] = f.preview(id, "keypoints", point_body(0.45, 0.1, 0.2));
  EXPECT_EQ(f.call("POST", "/v1/sessions/" + id + "/previews/" + std::to_string(p2) + "/accept",
                   {{"schema", 1}, {"token", "wrong"}}).status, 400);
  f.accept(id, p2, token);
  const std::uint32_t after = f.service.state_hash(id);
  EXPECT_NE(after, before);
  // A repeated accept is acknowledged without applying twice.
  const Json again = f.ok("POST", "/v1/sessions/" + id + "/previews/" + std::to_string(p2) + "/accept",
                          {{"schema", 1}, {"token", token}});
  EXPECT_TRUE(again["repeat"].get<bool>());
  EXPECT_EQ(f.service.state_hash(id), after);
  EXPECT_EQ(f.ok("GET", "/v1/sessions/" + id)["session"]["segments"], 1);
}

TEST(Service, WrongModeAndUnreachable) {
  Fixture f("modes");
  const std::string id = f.collecting("kinesthetic");
  const ApiResponse wrong = f.call("POST", "/v1/sessions/" + id + "/keypoints", point_body(0.45, 0.0, 0.2));
  EXPECT_EQ(wrong.status, 409);
  EXPECT_EQ(error_code(wrong), "WrongMode");
  f.ok("POST", "/v1/sessions/" + id + "/mode", {{"schema", 1}, {"mode", "pointing"}});
  const ApiResponse far = f.call("POST", "/v1/sessions/" + id + "/keypoints", point_body(2.5, 0.0, 0.2));
  EXPECT_EQ(far.status, 422);
  EXPECT_EQ(error_code(far), "UnreachableKeypoint");
}

TEST(Service, FinalizeAndExport) {
  Fixture f("finalize");
  const std::string id = f.collecting("pointing");
  auto [p1, t1] = f.preview(id, "keypoints", point_body(0.5, -0.15, 0.12));
  f.accept(id, p1, t1);
  auto [p2, t2] = f.preview(id, "keypoints", point_body(0.45, 0.2, 0.12, "closed"));
  f.accept(id, p2, t2);
  const Json body = {{"schema", 1}, {"language_goal", "move the block"}, {"export", {{"stride", 5}}}};
  const Json a = f.ok("POST", "/v1/sessions/" + id + "/finalize", body);
  const Json& d = a["dataset"];
  EXPECT_GE(d["peract_samples"].get<int>(), 1);
  EXPECT_EQ(d["peract_samples"].get<int>(), d["keyframes"].get<int>() - 1);
  const Json m = parse_json(read_text(d["manifest"].get<std::string>()), "m");
  EXPECT_EQ(m["peract"]["samples"].size(), d["peract_samples"].get<std::size_t>());
  EXPECT_EQ(f.state(id), "finalized");
  // Idempotent.
  const Json b = f.ok("POST", "/v1/sessions/" + id + "/finalize", {{"schema", 1}, {"language_goal", "other"}});
  EXPECT_EQ(a, b);
  // Finalized sessions are immutable.
  const std::uint32_t h = f.service.state_hash(id);
  EXPECT_GE(f.call("POST", "/v1/sessions/" + id + "/mode", {{"schema", 1}, {"mode", "gui"}}).status, 400);
  EXPECT_GE(f.call("POST", "/v1/sessions/" + id + "/keypoints", point_body(0.4, 0, 0.2)).status, 400);
  EXPECT_EQ(f.service.state_hash(id), h);
}

TEST(Service, GuiAndKinesthetic) {
  Fixture f("gui");
  const std::string id = f.collecting("gui");
  const RigidTransform pose(top_down_orientation(Vec3::UnitZ()), Vec3(0.4, 0.0, 0.3));
  auto [p1, t1] = f.preview(id, "poses", {{"schema", 1}, {"pose", to_json(pose)}, {"gripper", "open"}, {"dwell", 0.2}});
  f.accept(id, p1, t1);
  f.ok("POST", "/v1/sessions/" + id + "/mode", {{"schema", 1}, {"mode", "kinesthetic"}});
  const Json sub = Json::parse(f.service.handle("POST", "/v1/sessions/" + id + "/hand_frames", hand_stream(20)).body);
  ASSERT_TRUE(sub.contains("preview")) << sub.dump();
  const std::uint64_t pid = sub["preview"]["id"];
  const ApiResponse s = f.call("GET", "/v1/sessions/" + id + "/previews/" + std::to_string(pid) + "/stream");
  f.accept(id, pid, Json::parse(s.lines.back())["token"]);
  const Json sess = f.ok("GET", "/v1/sessions/" + id)["session"];
  EXPECT_EQ(sess["segments"], 2);
  EXPECT_EQ(sess["gripper"], "closed");
  const ApiResponse bad = f.service.handle("POST", "/v1/sessions/" + id + "/hand_frames", "{\"schema\":1}\n");
  EXPECT_EQ(bad.status, 400);
}

TEST(Service, GeometryAndScene) {
  Fixture f("geometry");
  const std::string id = f.create();
  const Json g = f.ok("GET", "/v1/sessions/" + id + "/geometry");
  EXPECT_EQ(g["links"].size(), KinematicChain::load(kData + "/franka_style.chain.json").links().size());
  EXPECT_FALSE(g["current"]["spheres"].empty());
  const Json s = f.ok("GET", "/v1/sessions/" + id + "/scene?max_points=500");
  EXPECT_LE(s["points"].size(), 500u);
  EXPECT_EQ(s["points"].size(), s["colors"].size());
  EXPECT_EQ(f.call("GET", "/v1/sessions/" + id + "/scene?max_points=x").status, 400);
}

TEST(Service, CancelWhileIdle) {
  Fixture f("cancel");
  const std::string id = f.collecting("kinesthetic");
  EXPECT_FALSE(f.ok("POST", "/v1/sessions/" + id + "/cancel", {{"schema", 1}})["cancelled"].get<bool>());
}

TEST(Service, CancelDuringPlanning) {
  Fixture f("cancel_running");
  const std::string id = f.collecting("kinesthetic");
  const std::uint32_t before = f.service.state_hash(id);
  std::atomic<bool> done{false};
  ApiResponse result;
  std::thread worker([&] {
    result = f.service.handle("POST", "/v1/sessions/" + id + "/hand_frames", hand_stream(3000));
    done = true;
  });
  while (!done) {
    f.call("POST", "/v1/sessions/" + id + "/cancel", {{"schema", 1}});
    std::this_thread::yield();
  }
  worker.join();
  EXPECT_TRUE(result.status == 200 || error_code(result) == "Cancelled") << result.body;
  if (result.status != 200) {
    EXPECT_EQ(f.service.state_hash(id), before);
  }
}

TEST(Service, SnapshotsDuringMutation) {
  Fixture f("snapshots");
  const std::string id = f.collecting("pointing");
  std::atomic<bool> stop{false};
  std::thread writer([&] {
    for (int i = 0; i < 10; ++i) {
      auto [pid, token] = f.preview(id, "keypoints", point_body(0.45, -0.1 + 0.02 * i, 0.2));
      f.accept(id, pid, token);
    }
    stop = true;
  });
  std::size_t last_segments = 0, reads = 0;
  while (!stop) {
    const ApiResponse r = f.call("GET", "/v1/sessions/" + id);
    ASSERT_EQ(r.status, 200);
    const Json s = Json::parse(r.body)["session"];
    const std::size_t seg = s["segments"];
    EXPECT_GE(seg, last_segments);
    EXPECT_EQ(s["trajectory_samples"].get<std::size_t>() == 0, seg == 0);
    last_segments = seg;
    ++reads;
  }
  writer.join();
  EXPECT_GT(reads, 0u);
}

TEST(Service, Fuzz1000Calls) {
  Fixture f("fuzz");
  const testing::FuzzReport r = testing::fuzz_service(f.service, 20261018, 1000);
  for (const std::string& p : r.problems) ADD_FAILURE() << p;
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.calls, 1000);
  EXPECT_GT(r.client_errors, 0);
  EXPECT_GT(r.sessions, 0u);
  EXPECT_GT(r.finalized, 0u);
}

TEST(Service, DiscardNeverChangesHash) {
  Fixture f("discard");
  const std::string id = f.collecting("pointing");
  int previews = 0;
  EXPECT_EQ(testing::discard_hash_violations(f.service, id, 7, 60, &previews), 0);
  EXPECT_GT(previews, 40);
}

TEST(Http, Smoke) {
  Fixture f("http");
  HttpServer server(f.service);
  const int port = server.start("127.0.0.1", 0);
  httplib::Client c("127.0.0.1", port);
  auto health = c.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  auto created = c.Post("/v1/sessions", R"({"schema":1,"scene":"sample_session"})", "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201);
  const std::string id = Json::parse(created->body)["session"]["id"];
  const std::string base = "/v1/sessions/" + id;
  EXPECT_EQ(c.Post(base + "/anchor", R"({"schema":1,"point":[0,0,0]})", "application/json")->status, 200);
  EXPECT_EQ(c.Post(base + "/mode", R"({"schema":1,"mode":"pointing"})", "application/json")->status, 200);
  auto sub = c.Post(base + "/keypoints", R"({"schema":1,"point":[0.45,0.0,0.2]})", "application/json");
  ASSERT_EQ(sub->status, 200);
  const std::string stream = Json::parse(sub->body)["preview"]["stream"];
  auto s = c.Get(stream);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->status, 200);
  std::istringstream lines(s->body);
  std::string line, last;
  int n = 0;
  while (std::getline(lines, line)) {
    last = line;
    ++n;
  }
  EXPECT_GE(n, 3);
  const std::string token = Json::parse(last)["token"];
  const std::string pid = std::to_string(Json::parse(sub->body)["preview"]["id"].get<int>());
  EXPECT_EQ(c.Post(base + "/previews/" + pid + "/accept", Json{{"schema", 1}, {"token", token}}.dump(), "application/json")->status, 200);
  auto bad = c.Post(base + "/mode", R"({"schema":1,"mode":"pointing","x":1})", "application/json");
  EXPECT_EQ(bad->status, 400);
  auto fin = c.Post(base + "/finalize", R"({"schema":1,"language_goal":"reach","export":{"imagebc":false}})", "application/json");
  ASSERT_TRUE(fin);
  EXPECT_EQ(fin->status, 200) << fin->body;
  server.stop();
}

}  // namespace
}  // namespace demoforge
