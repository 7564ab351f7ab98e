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

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <random>
#include <sstream>

#include "demoforge/dataset.hpp"
#include "demoforge/error.hpp"
#include "demoforge/export.hpp"

namespace demoforge {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    const auto slash = path.find('/');
    const std::string_view part = path.substr(0, slash);
    if (!part.empty()) parts.push_back(part);
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash + 1);
  }
  return parts;
}

Json parse_query(std::string_view q) {
  Json out = Json::object();
  std::istringstream in{std::string(q)};
  std::string kv;
  while (std::getline(in, kv, '&')) {
    const auto eq = kv.find('=');
    if (eq != std::string::npos) out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

Json request_body(std::string_view body, std::initializer_list<std::string_view> allowed,
                  std::initializer_list<std::string_view> required, std::string_view what) {
  const Json j = parse_json(body, what);
  check_keys(j, allowed, required, what);
  if (!j.contains("schema") || !j["schema"].is_number_integer() || j["schema"].get<int>() != kApiSchema) {
    throw Error(ErrorCode::kSchema, std::string(what) + ": schema must be " + std::to_string(kApiSchema));
  }
  return j;
}

std::uint64_t parse_id(std::string_view s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw Error(ErrorCode::kNotFound, "no preview " + std::string(s));
  return v;
}

Json error_body(ErrorCode code, std::string_view message) {
  return {{"schema", kApiSchema}, {"error", {{"code", std::string(error_code_name(code))}, {"message", message}}}};
}

ApiResponse json_response(const Json& j, int status = 200) {
  ApiResponse r;
  r.status = status;
  r.body = dump(j);
  return r;
}

Json sample_json(const KinematicChain& chain, const TrajectorySample& s, std::size_t i) {
  return {{"schema", kApiSchema},
          {"type", "sample"},
          {"i", i},
          {"t", s.t},
          {"q", std::vector<double>(s.q.angles.data(), s.q.angles.data() + s.q.angles.size())},
          {"aperture", s.q.gripper_aperture},
          {"gripper", std::string(gripper_name(s.gripper))},
          {"collision", s.collision},
          {"reachable", s.reachable},
          {"tcp", to_json(tcp_pose(chain, s.q.angles, LimitCheck::kIgnore))}};
}

SceneModel load_scene_model(const SessionArchive& archive, const std::string& ref, const ServiceOptions& o) {
  SceneModel m;
  m.ref = ref;
  const SceneFrame f = archive.load(0);
  CloudOptions co;
  co.stride = o.cloud_stride;
  co.exclude = f.mask;
  m.cloud = build_point_cloud(f.frame, co);
  PlaneOptions po = o.plane;
  po.viewpoint = f.frame.camera_pose.translation();
  try {
    m.plane = detect_dominant_plane(m.cloud, po);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoPlaneFound) throw;
  }
  Aabb box{m.cloud.points.front(), m.cloud.points.front()};
  for (const Vec3& p : m.cloud.points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  const Vec3 pad = Vec3::Constant(o.voxel_resolution);
  m.grid = voxelize(m.cloud, {box.min - pad, box.max + pad}, o.voxel_resolution);
  return m;
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kSchema:
      return 400;
    case ErrorCode::kNotFound:
    case ErrorCode::kSceneNotFound:
      return 404;
    case ErrorCode::kWrongMode:
    case ErrorCode::kInvalidState:
    case ErrorCode::kEmptySession:
    case ErrorCode::kNoPlane:
    case ErrorCode::kCancelled:
      return 409;
    case ErrorCode::kUnreachableKeypoint:
    case ErrorCode::kPlanningFailed:
    case ErrorCode::kPointOffPlane:
    case ErrorCode::kSceneCorrupt:
    case ErrorCode::kAllSamplesUnreachable:
    case ErrorCode::kOutOfWorkspace:
    case ErrorCode::kMissingMask:
    case ErrorCode::kTooFewValidPoints:
    case ErrorCode::kDegenerateHand:
      return 422;
    default:
      return 500;
  }
}

SessionService::SessionService(KinematicChain chain, ServiceOptions opts)
    : chain_(std::move(chain)), opts_(std::move(opts)), rng_state_(std::random_device{}()) {
  rng_state_ = (rng_state_ << 32) ^ std::random_device{}();
}

SessionService::~SessionService() = default;

std::string SessionService::new_token() {
  std::lock_guard lock(rng_mu_);
  std::mt19937_64 rng(rng_state_);
  rng_state_ = rng();
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::kNotFound, "no session " + id);
  return it->second;
}

std::vector<std::string> SessionService::session_ids() const {
  std::shared_lock lock(sessions_mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

Json SessionService::describe(const Session& s) {
  const DemoSession& d = s.demo;
  Json j = {{"id", s.id},
            {"scene", s.scene_path},
            {"state", std::string(state_name(d.state()))},
            {"mode", d.mode() ? Json(std::string(mode_name(*d.mode()))) : Json(nullptr)},
            {"base_pose", to_json(d.chain().base_pose())},
            {"current", to_json(d.current())},
            {"tcp", to_json(tcp_pose(d.chain(), d.current().angles, LimitCheck::kIgnore))},
            {"gripper", std::string(gripper_name(d.gripper()))},
            {"segments", d.segment_count()},
            {"trajectory_samples", d.trajectory().size()},
            {"keypoints", d.keypoints().size()},
            {"pending_preview", s.pending ? Json(s.pending->id) : Json(nullptr)}};
  if (d.scene().plane) {
    j["plane"] = {{"normal", vec3_to_json(d.scene().plane->normal)}, {"offset", d.scene().plane->offset}};
  } else {
    j["plane"] = nullptr;
  }
  if (s.finalized) j["dataset"] = (*s.finalized)["dataset"];
  return j;
}

void SessionService::refresh(Session& s) {
  auto snap = std::make_shared<const Json>(describe(s));
  std::lock_guard lock(s.snap_mu);
  s.snapshot = std::move(snap);
}

std::uint32_t SessionService::state_hash(const std::string& id) const {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  const DemoSession& d = s->demo;
  Json kps = Json::array();
  for (const KeyPoint& k : d.keypoints()) kps.push_back(to_json(k));
  Json accepted = Json::array();
  for (const auto& [pid, token] : s->accepted) accepted.push_back(pid);
  const Json canon = {{"state", std::string(state_name(d.state()))},
                      {"mode", d.mode() ? Json(std::string(mode_name(*d.mode()))) : Json(nullptr)},
                      {"base_pose", to_json(d.chain().base_pose())},
                      {"current", to_json(d.current())},
                      {"gripper", std::string(gripper_name(d.gripper()))},
                      {"trajectory", to_json(d.trajectory())},
                      {"keypoints", kps},
                      {"arrivals", d.arrivals()},
                      {"segments", d.segment_count()},
                      {"pending", s->pending ? Json(s->pending->id) : Json(nullptr)},
                      {"accepted", accepted},
                      {"finalized", s->finalized.has_value()}};
  const std::string text = canon.dump();
  return crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Json SessionService::create_session(const Json& req) {
  const std::string scene = get_string(req, "scene", "create_session");
  fs::path path(scene);
  if (path.is_relative()) path = opts_.data_root / path;
  auto archive = std::make_shared<const SessionArchive>(SessionArchive::open(path));
  const ValidationReport report = validate_archive(path);
  if (!report.ok()) throw Error(ErrorCode::kSceneCorrupt, report.errors.front());
  SceneModel model = load_scene_model(*archive, scene, opts_);
  const std::string id = "s-" + new_token().substr(0, 12);
  auto s = std::make_shared<Session>(id, scene, archive, DemoSession(chain_, std::move(model), opts_.keyframes));
  refresh(*s);
  Json out = {{"schema", kApiSchema}, {"session", describe(*s)}};
  std::unique_lock lock(sessions_mu_);
  sessions_.emplace(id, std::move(s));
  return out;
}

Json SessionService::list_sessions() const {
  Json list = Json::array();
  std::shared_lock lock(sessions_mu_);
  for (const auto& [id, s] : sessions_) {
    std::lock_guard snap(s->snap_mu);
    list.push_back(*s->snapshot);
  }
  return {{"schema", kApiSchema}, {"sessions", list}};
}

Json SessionService::delete_session(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    std::unique_lock lock(sessions_mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::kNotFound, "no session " + id);
    s = it->second;
    sessions_.erase(it);
  }
  std::lock_guard stop(s->stop_mu);
  s->planning.request_stop();
  return {{"schema", kApiSchema}, {"deleted", id}};
}

Json SessionService::anchor(Session& s, const Json& req) {
  const Vec3 point = vec3_from_json(req["point"], "anchor.point");
  const double max_distance = req.contains("max_distance") ? get_number(req, "max_distance", "anchor") : 0.05;
  const Vec3 heading = req.contains("heading") ? vec3_from_json(req["heading"], "anchor.heading") : Vec3::UnitX();
  if (!(max_distance >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "max_distance must be >= 0");
  if (!(heading.norm() > 1e-9)) throw Error(ErrorCode::kInvalidArgument, "heading must be non-zero");
  const RigidTransform base = s.demo.anchor(point, max_distance, heading);
  return {{"schema", kApiSchema}, {"base_pose", to_json(base)}};
}

Json SessionService::set_mode(Session& s, const Json& req) {
  const Mode m = parse_mode(get_string(req, "mode", "mode"));
  if (s.demo.state() == SessionState::kCollecting && s.demo.mode() != m) s.pending.reset();
  s.demo.set_mode(m);
  return {{"schema", kApiSchema}, {"mode", std::string(mode_name(m))}};
}

SessionService::PlanningScope::PlanningScope(Session& s) : s_(s) {
  std::lock_guard lock(s_.stop_mu);
  s_.planning = std::stop_source();
  token_ = s_.planning.get_token();
}

SessionService::PlanningScope::~PlanningScope() {
  std::lock_guard lock(s_.stop_mu);
  s_.planning = std::stop_source(std::nostopstate);
}

Json SessionService::offer(Session& s, Proposal p) {
  Preview pv;
  pv.id = s.next_preview++;
  pv.token = new_token();
  std::size_t collisions = p.segment.collision_count();
  Json j = {{"id", pv.id},
            {"samples", p.segment.size()},
            {"arrival", p.arrival},
            {"collisions", collisions},
            {"stream", "/v1/sessions/" + s.id + "/previews/" + std::to_string(pv.id) + "/stream"}};
  if (p.keypoint) j["keypoint"] = to_json(*p.keypoint);
  pv.proposal = std::move(p);
  s.pending = std::move(pv);  // replaces any earlier pending preview
  return {{"schema", kApiSchema}, {"preview", j}};
}

Json SessionService::submit_keypoint(Session& s, const Json& req) {
  const Vec3 point = vec3_from_json(req["point"], "keypoint.point");
  const GripperState g = req.contains("gripper") ? parse_gripper(get_string(req, "gripper", "keypoint")) : s.demo.gripper();
  const double dwell = req.contains("dwell") ? get_number(req, "dwell", "keypoint") : 0.0;
  const PlanningScope planning(s);
  return offer(s, s.demo.propose_point(point, g, dwell, planning.token()));
}

Json SessionService::submit_pose(Session& s, const Json& req) {
  const RigidTransform tcp = transform_from_json(req["pose"]);
  const GripperState g = req.contains("gripper") ? parse_gripper(get_string(req, "gripper", "pose")) : s.demo.gripper();
  const double dwell = req.contains("dwell") ? get_number(req, "dwell", "pose") : 0.0;
  const PlanningScope planning(s);
  return offer(s, s.demo.propose_pose(tcp, g, dwell, planning.token()));
}

Json SessionService::submit_hand_frames(Session& s, std::string_view body) {
  HandTrack track;
  std::istringstream in{std::string(body)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string what = "hand_frames line " + std::to_string(lineno);
    Json j = request_body(line, {"schema", "frame", "aperture", "valid", "timestamp"},
                          {"schema", "frame", "aperture", "timestamp"}, what);
    j.erase("schema");
    track.samples.push_back(hand_pose_from_json(j));
    if (!j.contains("valid")) track.samples.back().valid = true;
  }
  if (track.samples.empty()) throw Error(ErrorCode::kInvalidArgument, "hand_frames: empty stream");
  const PlanningScope planning(s);
  return offer(s, s.demo.propose_mimic(track, {}, planning.token()));
}

ApiResponse SessionService::preview_stream(Session& s, std::uint64_t preview) const {
  std::optional<Preview> pv;
  {
    std::lock_guard lock(s.mu);
    if (!s.pending || s.pending->id != preview) {
      throw Error(ErrorCode::kNotFound, "no pending preview " + std::to_string(preview));
    }
    pv = s.pending;
  }
  const Proposal& p = pv->proposal;
  ApiResponse r;
  r.content_type = "application/x-ndjson";
  r.lines.push_back(dump(Json{{"schema", kApiSchema},
                              {"type", "preview"},
                              {"preview", pv->id},
                              {"samples", p.segment.size()},
                              {"arrival", p.arrival},
                              {"collisions", p.segment.collision_count()}}));
  for (std::size_t i = 0; i < p.segment.size(); ++i) r.lines.push_back(dump(sample_json(s.demo.chain(), p.segment.samples[i], i)));
  r.lines.push_back(dump(Json{{"schema", kApiSchema}, {"type", "end"}, {"preview", pv->id}, {"token", pv->token}}));
  for (const std::string& l : r.lines) r.body += l;
  return r;
}

Json SessionService::accept(Session& s, std::uint64_t preview, const Json& req) {
  const std::string token = get_string(req, "token", "accept");
  if (const auto it = s.accepted.find(preview); it != s.accepted.end()) {
    if (it->second != token) throw Error(ErrorCode::kInvalidArgument, "token does not match preview");
    return {{"schema", kApiSchema}, {"accepted", preview}, {"repeat", true}};
  }
  if (!s.pending || s.pending->id != preview) {
    throw Error(ErrorCode::kNotFound, "no pending preview " + std::to_string(preview));
  }
  if (s.pending->token != token) throw Error(ErrorCode::kInvalidArgument, "token does not match preview");
  s.demo.commit(s.pending->proposal);
  s.accepted.emplace(preview, token);
  s.pending.reset();
  return {{"schema", kApiSchema}, {"accepted", preview}, {"repeat", false}};
}

Json SessionService::discard(Session& s, std::uint64_t preview, const Json&) {
  if (!s.pending || s.pending->id != preview) {
    throw Error(ErrorCode::kNotFound, "no pending preview " + std::to_string(preview));
  }
  s.pending.reset();
  return {{"schema", kApiSchema}, {"discarded", preview}};
}

Json SessionService::cancel(Session& s) {
  std::lock_guard lock(s.stop_mu);
  const bool running = s.planning.stop_possible() && !s.planning.stop_requested();
  s.planning.request_stop();
  return {{"schema", kApiSchema}, {"cancelled", running}};
}

Json SessionService::finalize(Session& s, const Json& req) {
  if (s.finalized) return *s.finalized;
  const std::string goal = get_string(req, "language_goal", "finalize");
  bool peract = true, imagebc = true;
  PerActOptions po;
  ImageBcOptions io;
  if (req.contains("export")) {
    const Json& e = req["export"];
    constexpr std::string_view w = "finalize.export";
    check_keys(e, {"peract", "imagebc", "stride", "resolution", "rot_bin_deg"}, {}, w);
    if (e.contains("peract")) peract = get_bool(e, "peract", w);
    if (e.contains("imagebc")) imagebc = get_bool(e, "imagebc", w);
    if (e.contains("stride")) io.stride = static_cast<int>(get_int(e, "stride", w));
    if (e.contains("resolution")) po.resolution = get_number(e, "resolution", w);
    if (e.contains("rot_bin_deg")) po.rot_bin_deg = get_number(e, "rot_bin_deg", w);
  }
  // Export on a copy so a failed export leaves the session collecting.
  DemoSession copy = s.demo;
  const Demonstration demo = copy.finalize(goal);
  const KinematicChain& chain = copy.chain();
  std::vector<PerActSample> pa;
  std::vector<ImageBcSample> ib;
  if (peract) pa = export_peract(chain, demo, *s.archive, po);
  if (imagebc) ib = export_imagebc(chain, demo, *s.archive, io);
  const fs::path out = opts_.output_root / s.id;
  write_dataset(out, demo, pa, ib, {po.rot_bin_deg, io.stride});
  s.demo = std::move(copy);
  s.pending.reset();
  s.finalized = Json{{"schema", kApiSchema},
                     {"dataset",
                      {{"path", out.string()},
                       {"manifest", (out / "manifest.json").string()},
                       {"keyframes", demo.keyframes.size()},
                       {"peract_samples", pa.size()},
                       {"imagebc_samples", ib.size()}}}};
  return *s.finalized;
}

Json SessionService::geometry(Session& s) const {
  std::lock_guard lock(s.mu);
  const KinematicChain& chain = s.demo.chain();
  Json links = Json::array();
  for (const Link& l : chain.links()) {
    Json spheres = Json::array();
    for (const CollisionSphere& c : l.collision_spheres) {
      spheres.push_back({{"center", vec3_to_json(c.center)}, {"radius", c.radius}});
    }
    links.push_back({{"name", l.name}, {"spheres", spheres}});
  }
  Json world = Json::array();
  for (const WorldSphere& w : robot_spheres(chain, s.demo.current(), LimitCheck::kIgnore)) {
    world.push_back({{"link", w.link_index}, {"center", vec3_to_json(w.center)}, {"radius", w.radius}});
  }
  const FkResult fk = forward_kinematics(chain, s.demo.current(), LimitCheck::kIgnore);
  Json poses = Json::array();
  for (const RigidTransform& p : fk.link_poses) poses.push_back(to_json(p));
  return {{"schema", kApiSchema},
          {"chain", chain.name()},
          {"base_pose", to_json(chain.base_pose())},
          {"links", links},
          {"current", {{"q", to_json(s.demo.current())}, {"link_poses", poses}, {"tcp", to_json(fk.tcp)}, {"spheres", world}}}};
}

Json SessionService::scene(Session& s, const Json& query) const {
  std::size_t max_points = 20000;
  if (query.contains("max_points")) {
    const std::string v = query["max_points"];
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), max_points);
    if (ec != std::errc() || p != v.data() + v.size() || max_points == 0) {
      throw Error(ErrorCode::kInvalidArgument, "max_points must be a positive integer");
    }
  }
  const SceneModel& m = s.demo.scene();  // immutable after creation
  const std::size_t n = m.cloud.size();
  const std::size_t step = std::max<std::size_t>(1, (n + max_points - 1) / max_points);
  Json pts = Json::array(), cols = Json::array();
  for (std::size_t i = 0; i < n; i += step) {
    pts.push_back(vec3_to_json(m.cloud.points[i]));
    if (m.cloud.has_colors()) cols.push_back({m.cloud.colors[i].r, m.cloud.colors[i].g, m.cloud.colors[i].b});
  }
  Json j = {{"schema", kApiSchema}, {"points", pts}, {"colors", cols}, {"total_points", n}};
  if (m.plane) j["plane"] = {{"normal", vec3_to_json(m.plane->normal)}, {"offset", m.plane->offset}};
  return j;
}

ApiResponse SessionService::handle(std::string_view method, std::string_view target, std::string_view body) {
  try {
    std::string_view path = target, query;
    if (const auto q = target.find('?'); q != std::string_view::npos) {
      path = target.substr(0, q);
      query = target.substr(q + 1);
    }
    const auto parts = split_path(path);
    const auto method_not_allowed = [&] {
      return json_response(error_body(ErrorCode::kInvalidArgument, "method not allowed"), 405);
    };
    if (parts.size() < 2 || parts[0] != "v1") throw Error(ErrorCode::kNotFound, "no route " + std::string(path));
    if (parts.size() == 2 && parts[1] == "health") {
      if (method != "GET") return method_not_allowed();
      return json_response({{"schema", kApiSchema}, {"status", "ok"}, {"sessions", session_ids().size()}});
    }
    if (parts[1] != "sessions") throw Error(ErrorCode::kNotFound, "no route " + std::string(path));
    if (parts.size() == 2) {
      if (method == "GET") return json_response(list_sessions());
      if (method == "POST") return json_response(create_session(request_body(body, {"schema", "scene"}, {"schema", "scene"}, "create_session")), 201);
      return method_not_allowed();
    }
    const std::string id(parts[2]);
    if (parts.size() == 3) {
      if (method == "DELETE") return json_response(delete_session(id));
      if (method != "GET") return method_not_allowed();
      const auto s = find(id);
      std::lock_guard lock(s->snap_mu);
      return json_response({{"schema", kApiSchema}, {"session", *s->snapshot}});
    }
    const auto s = find(id);
    const std::string_view action = parts[3];
    if (parts.size() == 4 && method == "GET") {
      if (action == "geometry") return json_response(geometry(*s));
      if (action == "scene") return json_response(scene(*s, parse_query(query)));
      if (action == "hash") {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%08x", state_hash(id));
        return json_response({{"schema", kApiSchema}, {"hash", buf}});
      }
    }
    if (parts.size() == 4 && action == "cancel") {
      if (method != "POST") return method_not_allowed();
      request_body(body, {"schema"}, {"schema"}, "cancel");
      return json_response(cancel(*s));
    }
    if (parts.size() == 6 && action == "previews" && parts[5] == "stream") {
      if (method != "GET") return method_not_allowed();
      return preview_stream(*s, parse_id(parts[4]));
    }
    if (method != "POST") {
      if (parts.size() <= 6) return method_not_allowed();
      throw Error(ErrorCode::kNotFound, "no route " + std::string(path));
    }

    Json result;
    if (parts.size() == 4) {
      if (action == "anchor") {
        const Json req = request_body(body, {"schema", "point", "max_distance", "heading"}, {"schema", "point"}, "anchor");
        std::lock_guard lock(s->mu);
        result = anchor(*s, req);
      } else if (action == "mode") {
        const Json req = request_body(body, {"schema", "mode"}, {"schema", "mode"}, "mode");
        std::lock_guard lock(s->mu);
        result = set_mode(*s, req);
      } else if (action == "keypoints") {
        const Json req = request_body(body, {"schema", "point", "gripper", "dwell"}, {"schema", "point"}, "keypoint");
        std::lock_guard lock(s->mu);
        result = submit_keypoint(*s, req);
      } else if (action == "poses") {
        const Json req = request_body(body, {"schema", "pose", "gripper", "dwell"}, {"schema", "pose"}, "pose");
        std::lock_guard lock(s->mu);
        result = submit_pose(*s, req);
      } else if (action == "hand_frames") {
        std::lock_guard lock(s->mu);
        result = submit_hand_frames(*s, body);
      } else if (action == "finalize") {
        const Json req = request_body(body, {"schema", "language_goal", "export"}, {"schema", "language_goal"}, "finalize");
        std::lock_guard lock(s->mu);
        result = finalize(*s, req);
      } else {
        throw Error(ErrorCode::kNotFound, "no route " + std::string(path));
      }
    } else if (parts.size() == 6 && action == "previews") {
      const std::uint64_t pid = parse_id(parts[4]);
      if (parts[5] == "accept") {
        const Json req = request_body(body, {"schema", "token"}, {"schema", "token"}, "accept");
        std::lock_guard lock(s->mu);
        result = accept(*s, pid, req);
      } else if (parts[5] == "discard") {
        const Json req = request_body(body, {"schema"}, {"schema"}, "discard");
        std::lock_guard lock(s->mu);
        result = discard(*s, pid, req);
      } else {
        throw Error(ErrorCode::kNotFound, "no route " + std::string(path));
      }
    } else {
      throw Error(ErrorCode::kNotFound, "no route " + std::string(path));
    }
    {
      std::lock_guard lock(s->mu);
      refresh(*s);
    }
    return json_response(result);
  } catch (const Error& e) {
    const std::string what = e.what();
    const std::string prefix = std::string(error_code_name(e.code())) + ": ";
    const std::string msg = what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
    return json_response(error_body(e.code(), msg), http_status(e.code()));
  } catch (const nlohmann::json::exception& e) {
    return json_response(error_body(ErrorCode::kSchema, e.what()), 400);
  } catch (const std::exception& e) {
    return json_response(error_body(ErrorCode::kIo, e.what()), 500);
  }
}

}  // namespace demoforge
