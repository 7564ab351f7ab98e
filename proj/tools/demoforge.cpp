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

// Command-line entry point. Exit codes: 0 success, 1 failure (invalid input,
// failed validation, pipeline error), 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "demoforge/archive.hpp"
#include "demoforge/dataset.hpp"
#include "demoforge/error.hpp"
#include "demoforge/http.hpp"
#include "demoforge/pipeline.hpp"
#include "demoforge/serialize.hpp"
#include "demoforge/service.hpp"
#include "demoforge/synthetic.hpp"

namespace fs = std::filesystem;
using namespace demoforge;

namespace {

fs::path data_root() {
  if (const char* env = std::getenv("DEMOFORGE_DATA"); env && *env) return env;
  return DEMOFORGE_DEFAULT_DATA_DIR;
}

// Relative inputs that do not exist from the working directory are looked up
// under the data root.
fs::path resolve_input(const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || fs::exists(path)) return path;
  const fs::path alt = data_root() / path;
  return fs::exists(alt) ? alt : path;
}

// Options reachable from both a flag and the --config file. Config values win.
class Bindings {
 public:
  explicit Bindings(std::string section) : section_(std::move(section)) {}

  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& name, T& var, const std::string& desc) {
    setters_[name] = [&var](const Json& j) { var = j.get<T>(); };
    return app->add_option("--" + name, var, desc)->capture_default_str();
  }
  CLI::Option* flag(CLI::App* app, const std::string& name, bool& var, const std::string& desc) {
    setters_[name] = [&var](const Json& j) { var = j.get<bool>(); };
    return app->add_flag("--" + name, var, desc);
  }
  void config_option(CLI::App* app) { app->add_option("--config", config_, "JSON config; overrides flags"); }

  void apply() const {
    if (config_.empty()) return;
    const Json cfg = parse_json(read_text(resolve_input(config_)), "config");
    if (!cfg.is_object()) throw Error(ErrorCode::kSchema, "config: expected an object");
    if (!cfg.contains(section_)) return;
    const Json& sec = cfg[section_];
    if (!sec.is_object()) throw Error(ErrorCode::kSchema, "config: section '" + section_ + "' must be an object");
    for (const auto& [key, value] : sec.items()) {
      const auto it = setters_.find(key);
      if (it == setters_.end()) throw Error(ErrorCode::kSchema, "config: unknown option '" + section_ + "." + key + "'");
      try {
        it->second(value);
      } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::kSchema, "config: wrong type for '" + section_ + "." + key + "'");
      }
    }
  }

 private:
  std::string section_;
  std::string config_;
  std::map<std::string, std::function<void(const Json&)>> setters_;
};

struct ExportFlags {
  bool peract_only = false;
  bool imagebc_only = false;
  int stride = 1;
  double resolution = 0.01;
  double rot_bin = 5.0;
  unsigned threads = 1;

  void bind(Bindings& b, CLI::App* app) {
    CLI::Option* p = b.flag(app, "peract-only", peract_only, "write voxel samples only");
    b.flag(app, "imagebc-only", imagebc_only, "write composited frames only")->excludes(p);
    b.option(app, "stride", stride, "Image-BC trajectory stride");
    b.option(app, "resolution", resolution, "voxel size (m)");
    b.option(app, "rot-bin", rot_bin, "rotation bin (deg)");
    b.option(app, "threads", threads, "worker threads (0 = all cores)");
  }
  void check() const {
    if (peract_only && imagebc_only) throw Error(ErrorCode::kInvalidArgument, "--peract-only and --imagebc-only exclude each other");
  }
};

KinematicChain load_chain(const std::string& path) {
  return KinematicChain::load(path.empty() ? data_root() / "franka_style.chain.json" : resolve_input(path));
}

void print_report(const ValidationReport& r, bool json) {
  if (json) {
    std::cout << dump_pretty(r.to_json());
    return;
  }
  for (const std::string& e : r.errors) std::cout << "error: " << e << "\n";
  std::cout << (r.ok() ? "ok" : "FAILED") << " (" << r.errors.size() << " errors)\n";
}

// Replay keeps unmasked hand frames instead of failing on them.
class ReplaySource final : public FrameSource {
 public:
  explicit ReplaySource(const FrameSource& inner) : inner_(inner) {}
  std::size_t size() const override { return inner_.size(); }
  double timestamp(std::size_t i) const override { return inner_.timestamp(i); }
  SceneFrame load(std::size_t i) const override {
    SceneFrame f = inner_.load(i);
    if (f.mask.empty()) f.hand_present = false;
    return f;
  }
  std::vector<std::uint8_t> background_plate() const override { return inner_.background_plate(); }

 private:
  const FrameSource& inner_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"demoforge: demonstration capture, retargeting and dataset export"};
  app.require_subcommand(1);
  std::vector<std::function<void()>> actions;

  // validate
  auto* validate = app.add_subcommand("validate", "check a session archive or dataset directory");
  std::string validate_path_arg;
  bool validate_json = false;
  validate->add_option("path", validate_path_arg, "archive or dataset directory")->required();
  validate->add_flag("--json", validate_json, "print the report as JSON");
  int exit_code = 0;
  validate->callback([&] {
    const ValidationReport r = demoforge::validate_path(resolve_input(validate_path_arg));
    print_report(r, validate_json);
    exit_code = r.ok() ? 0 : 1;
  });

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "write an analytic tabletop session archive");
  Bindings gen_b("gen-synthetic");
  std::string gen_out, gen_chain;
  SyntheticOptions so;
  bool no_masks = false, no_plate = false;
  gen->add_option("out", gen_out, "output directory")->required();
  gen_b.option(gen, "chain", gen_chain, "chain file (default: data root)");
  gen_b.option(gen, "width", so.width, "image width");
  gen_b.option(gen, "height", so.height, "image height");
  gen_b.option(gen, "rate", so.rate, "frame rate (Hz)");
  gen_b.option(gen, "hold", so.hold, "frames at rest at start and end");
  gen_b.option(gen, "move", so.move, "frames per move");
  gen_b.option(gen, "grasp-hold", so.grasp_hold, "frames at rest at pick and place");
  gen_b.option(gen, "gripper-delay", so.gripper_delay, "frames into a grasp hold before the gripper changes");
  gen_b.option(gen, "goal", so.language_goal, "language goal");
  gen_b.flag(gen, "no-masks", no_masks, "omit hand masks");
  gen_b.flag(gen, "no-plate", no_plate, "omit the background plate");
  gen_b.config_option(gen);
  gen->callback([&] {
    gen_b.apply();
    so.masks = !no_masks;
    so.plate = !no_plate;
    if (fs::exists(gen_out) && !fs::is_empty(gen_out)) {
      throw Error(ErrorCode::kIo, "output directory " + gen_out + " is not empty");
    }
    const SyntheticPlan plan = write_synthetic_session(gen_out, load_chain(gen_chain), so);
    std::cout << dump(Json{{"archive", gen_out}, {"frames", plan.path.size()}, {"gripper_changes", plan.gripper_changes}});
  });

  // process
  auto* process = app.add_subcommand("process", "run the kinesthetic pipeline and export a dataset");
  Bindings proc_b("process");
  std::string proc_in, proc_out, proc_chain;
  ExportFlags proc_x;
  bool no_smooth = false;
  ProcessOptions po;
  process->add_option("archive", proc_in, "session archive")->required();
  proc_b.option(process, "out", proc_out, "dataset directory")->required();
  proc_b.option(process, "chain", proc_chain, "chain file (default: data root)");
  proc_x.bind(proc_b, process);
  proc_b.flag(process, "no-smooth", no_smooth, "skip hand-track smoothing");
  proc_b.option(process, "alpha", po.smoothing.alpha, "smoothing weight of new samples");
  proc_b.option(process, "conf-min", po.lift.conf_min, "minimum keypoint confidence");
  proc_b.option(process, "vel-eps", po.keyframes.vel_eps, "keyframe rest threshold (rad/s)");
  proc_b.option(process, "min-gap", po.keyframes.min_gap, "minimum samples between rest keyframes");
  proc_b.config_option(process);
  process->callback([&] {
    proc_b.apply();
    proc_x.check();
    const SessionArchive archive = SessionArchive::open(resolve_input(proc_in));
    po.smooth = !no_smooth;
    po.peract = !proc_x.imagebc_only;
    po.imagebc = !proc_x.peract_only;
    po.threads = proc_x.threads;
    po.peract_opts.resolution = proc_x.resolution;
    po.peract_opts.rot_bin_deg = proc_x.rot_bin;
    po.imagebc_opts.stride = proc_x.stride;
    const ProcessResult r = process_session(archive, load_chain(proc_chain), po);
    write_dataset(proc_out, r.demo, r.peract, r.imagebc, {proc_x.rot_bin, proc_x.stride});
    std::cout << dump(Json{{"dataset", proc_out},
                           {"trajectory_samples", r.demo.trajectory.size()},
                           {"invalid_hand_samples", r.stats.invalid},
                           {"collisions", r.demo.trajectory.collision_count()},
                           {"keyframes", r.demo.keyframes.size()},
                           {"peract_samples", r.peract.size()},
                           {"imagebc_samples", r.imagebc.size()}});
  });

  // export
  auto* exp = app.add_subcommand("export", "export a stored demonstration against its scene archive");
  Bindings exp_b("export");
  std::string exp_demo, exp_scene, exp_out, exp_chain;
  ExportFlags exp_x;
  exp->add_option("demonstration", exp_demo, "demonstration.json")->required();
  exp_b.option(exp, "scene", exp_scene, "session archive")->required();
  exp_b.option(exp, "out", exp_out, "dataset directory")->required();
  exp_b.option(exp, "chain", exp_chain, "chain file (default: data root)");
  exp_x.bind(exp_b, exp);
  exp_b.config_option(exp);
  exp->callback([&] {
    exp_b.apply();
    exp_x.check();
    const Demonstration demo = demonstration_from_json(parse_json(read_text(resolve_input(exp_demo)), "demonstration"));
    const SessionArchive archive = SessionArchive::open(resolve_input(exp_scene));
    const KinematicChain chain = load_chain(exp_chain).with_base(demo.base_pose);
    std::vector<PerActSample> pa;
    std::vector<ImageBcSample> ib;
    PerActOptions pao;
    pao.resolution = exp_x.resolution;
    pao.rot_bin_deg = exp_x.rot_bin;
    pao.threads = exp_x.threads;
    ImageBcOptions ibo;
    ibo.stride = exp_x.stride;
    ibo.threads = exp_x.threads;
    if (!exp_x.imagebc_only) pa = export_peract(chain, demo, archive, pao);
    if (!exp_x.peract_only) ib = export_imagebc(chain, demo, archive, ibo);
    write_dataset(exp_out, demo, pa, ib, {exp_x.rot_bin, exp_x.stride});
    std::cout << dump(Json{{"dataset", exp_out}, {"peract_samples", pa.size()}, {"imagebc_samples", ib.size()}});
  });

  // replay
  auto* replay = app.add_subcommand("replay", "render a demonstration over its scene frames");
  Bindings rep_b("replay");
  std::string rep_demo, rep_scene, rep_out, rep_chain;
  int rep_stride = 1;
  unsigned rep_threads = 1;
  replay->add_option("demonstration", rep_demo, "demonstration.json")->required();
  rep_b.option(replay, "scene", rep_scene, "session archive")->required();
  rep_b.option(replay, "out", rep_out, "output directory")->required();
  rep_b.option(replay, "chain", rep_chain, "chain file (default: data root)");
  rep_b.option(replay, "stride", rep_stride, "trajectory stride");
  rep_b.option(replay, "threads", rep_threads, "worker threads (0 = all cores)");
  rep_b.config_option(replay);
  replay->callback([&] {
    rep_b.apply();
    const Demonstration demo = demonstration_from_json(parse_json(read_text(resolve_input(rep_demo)), "demonstration"));
    const SessionArchive archive = SessionArchive::open(resolve_input(rep_scene));
    const KinematicChain chain = load_chain(rep_chain).with_base(demo.base_pose);
    const ReplaySource source(archive);
    ImageBcOptions ibo;
    ibo.stride = rep_stride;
    ibo.threads = rep_threads;
    const auto frames = export_imagebc(chain, demo, source, ibo);
    write_frames(rep_out, frames);
    std::cout << dump(Json{{"replay", rep_out}, {"frames", frames.size()}});
  });

  // bench
  auto* bench = app.add_subcommand("bench", "measure lift + smoothing + IK throughput");
  Bindings bench_b("bench");
  std::string bench_in, bench_chain, bench_out;
  BenchOptions bo;
  bench->add_option("archive", bench_in, "session archive")->required();
  bench_b.option(bench, "chain", bench_chain, "chain file (default: data root)");
  bench_b.option(bench, "threads", bo.threads, "threads for the parallel run (0 = all cores)");
  bench_b.option(bench, "repeats", bo.repeats, "timed runs; the best is reported");
  bench_b.option(bench, "out", bench_out, "also write the report here");
  bench_b.config_option(bench);
  bench->callback([&] {
    bench_b.apply();
    const SessionArchive archive = SessionArchive::open(resolve_input(bench_in));
    const std::string text = dump_pretty(bench_session(archive, load_chain(bench_chain), bo).to_json());
    if (!bench_out.empty()) write_text(bench_out, text);
    std::cout << text;
  });

  // serve
  auto* serve = app.add_subcommand("serve", "serve the session API over HTTP");
  Bindings serve_b("serve");
  std::string host = "127.0.0.1", serve_chain, serve_data, serve_output = "datasets";
  int port = 8080;
  serve_b.option(serve, "host", host, "bind address");
  serve_b.option(serve, "port", port, "port");
  serve_b.option(serve, "chain", serve_chain, "chain file (default: data root)");
  serve_b.option(serve, "data-root", serve_data, "scene lookup root (default: data root)");
  serve_b.option(serve, "output-root", serve_output, "dataset output root");
  serve_b.config_option(serve);
  serve->callback([&] {
    serve_b.apply();
    ServiceOptions opts;
    opts.data_root = serve_data.empty() ? data_root() : fs::path(serve_data);
    opts.output_root = serve_output;
    SessionService service(load_chain(serve_chain), opts);
    HttpServer server(service);
    std::cerr << "serving on http://" << host << ":" << port << "/v1\n";
    server.run(host, port);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
