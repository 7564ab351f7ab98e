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

// Drives the command-line binary end to end.

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sys/wait.h>

#include "demoforge/serialize.hpp"

namespace demoforge {
namespace {

namespace fs = std::filesystem;

const std::string kCli = DEMOFORGE_CLI;
const std::string kData = DEMOFORGE_DATA_DIR;
const std::string kSample = kData + "/sample_session";

struct CmdResult {
  int code = -1;
  std::string out;
};

CmdResult run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + kCli + " " + args + " 2>&1";
  CmdResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("demoforge_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path copy_sample(const fs::path& dir) {
  const fs::path dst = dir / "session";
  fs::copy(kSample, dst, fs::copy_options::recursive);
  return dst;
}

// Every regular file under `root`, relative path -> bytes.
std::map<std::string, std::vector<std::uint8_t>> tree(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

std::size_t count_png(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ".png";
  return n;
}

TEST(Cli, Usage) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("validate").code, 2);
  EXPECT_EQ(run("process " + kSample + " --out").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, ValidateBundled) {
  const CmdResult r = run("validate " + kSample);
  EXPECT_EQ(r.code, 0) << r.out;
  const CmdResult j = run("validate --json " + kSample);
  ASSERT_EQ(j.code, 0) << j.out;
  const Json report = parse_json(j.out, "report");
  EXPECT_TRUE(report["ok"].get<bool>());
  EXPECT_EQ(report["frames_checked"], 142);
  EXPECT_EQ(run("validate /nonexistent/place").code, 1);
}

TEST(Cli, ValidateNamesCorruptFrame) {
  const fs::path s = copy_sample(scratch("corrupt"));
  auto bytes = read_file(s / "frames/000005.rgb.z");
  bytes[bytes.size() / 2] ^= 0x40;
  write_file(s / "frames/000005.rgb.z", bytes);
  const CmdResult r = run("validate " + s.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("frame 5"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("checksum"), std::string::npos) << r.out;
}

TEST(Cli, ValidateNamesOutOfOrderFrame) {
  const fs::path s = copy_sample(scratch("order"));
  Json m = parse_json(read_text(s / "manifest.json"), "manifest");
  m["frames"][10]["timestamp"] = m["frames"][9]["timestamp"];
  write_text(s / "manifest.json", dump_pretty(m));
  const CmdResult r = run("validate " + s.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("frame 10"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("timestamp"), std::string::npos) << r.out;
}

TEST(Cli, ProcessIsDeterministic) {
  const fs::path dir = scratch("process");
  const CmdResult a = run("process " + kSample + " --out " + (dir / "a").string() + " --stride 3");
  ASSERT_EQ(a.code, 0) << a.out;
  const CmdResult b = run("process " + kSample + " --out " + (dir / "b").string() + " --stride 3");
  ASSERT_EQ(b.code, 0) << b.out;
  const auto ta = tree(dir / "a"), tb = tree(dir / "b");
  EXPECT_GT(ta.size(), 10u);
  EXPECT_TRUE(ta == tb);
  const Json summary = parse_json(a.out, "summary");
  EXPECT_EQ(summary["peract_samples"].get<int>(), summary["keyframes"].get<int>() - 1);
  EXPECT_EQ(summary["imagebc_samples"], (142 + 2) / 3);
  EXPECT_EQ(run("validate " + (dir / "a").string()).code, 0);
}

TEST(Cli, PeractOnly) {
  const fs::path dir = scratch("peract_only");
  ASSERT_EQ(run("process " + kSample + " --peract-only --out " + (dir / "d").string()).code, 0);
  EXPECT_TRUE(fs::exists(dir / "d/peract"));
  EXPECT_FALSE(fs::exists(dir / "d/imagebc"));
  EXPECT_EQ(run("process " + kSample + " --peract-only --imagebc-only --out " + (dir / "e").string()).code, 2);
}

TEST(Cli, ImageBcNeedsMasks) {
  const fs::path dir = scratch("nomask");
  const fs::path s = dir / "s";
  ASSERT_EQ(run("gen-synthetic " + s.string() + " --width 64 --height 48 --hold 4 --move 8 --grasp-hold 6 "
                "--gripper-delay 3 --no-masks").code, 0);
  const CmdResult r = run("process " + s.string() + " --out " + (dir / "d").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("MissingMask"), std::string::npos) << r.out;
  EXPECT_EQ(run("process " + s.string() + " --peract-only --out " + (dir / "p").string()).code, 0);
}

TEST(Cli, RefusesForeignOutput) {
  const fs::path dir = scratch("foreign");
  write_text(dir / "keep.txt", "x");
  EXPECT_EQ(run("process " + kSample + " --peract-only --out " + dir.string()).code, 1);
  EXPECT_TRUE(fs::exists(dir / "keep.txt"));
  EXPECT_EQ(run("gen-synthetic " + dir.string()).code, 1);
}

TEST(Cli, ReplayStride) {
  const fs::path dir = scratch("replay");
  ASSERT_EQ(run("process " + kSample + " --peract-only --out " + (dir / "d").string()).code, 0);
  Json demo = parse_json(read_text(dir / "d/demonstration.json"), "demo");
  demo["trajectory"]["samples"].erase(demo["trajectory"]["samples"].begin() + 100, demo["trajectory"]["samples"].end());
  Json kept = Json::array();
  for (const Json& k : demo["keyframes"]) {
    if (k["index"].get<int>() < 100) kept.push_back(k);
  }
  demo["keyframes"] = kept;
  write_text(dir / "demo100.json", dump_pretty(demo));
  const std::string in = (dir / "demo100.json").string() + " --scene " + kSample;

  ASSERT_EQ(run("replay " + in + " --out " + (dir / "r1").string()).code, 0);
  EXPECT_EQ(count_png(dir / "r1/frames"), 100u);
  ASSERT_EQ(run("replay " + in + " --stride 4 --out " + (dir / "r4").string()).code, 0);
  EXPECT_EQ(count_png(dir / "r4/frames"), 25u);
  ASSERT_EQ(run("replay " + in + " --stride 4 --threads 2 --out " + (dir / "r4b").string()).code, 0);
  EXPECT_TRUE(tree(dir / "r4") == tree(dir / "r4b"));
  EXPECT_EQ(run("validate " + (dir / "r4").string()).code, 0);
  auto bytes = read_file(dir / "r4/frames/frame_000003.png");
  bytes[bytes.size() / 2] ^= 1;
  write_file(dir / "r4/frames/frame_000003.png", bytes);
  const CmdResult bad = run("validate " + (dir / "r4").string());
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("replay frame 3"), std::string::npos) << bad.out;
}

TEST(Cli, Export) {
  const fs::path dir = scratch("export");
  ASSERT_EQ(run("process " + kSample + " --peract-only --out " + (dir / "d").string()).code, 0);
  const CmdResult r = run("export " + (dir / "d/demonstration.json").string() + " --scene " + kSample + " --imagebc-only --stride 10 --out " +
                    (dir / "e").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(count_png(dir / "e/imagebc"), 15u);
  EXPECT_EQ(run("validate " + (dir / "e").string()).code, 0);
}

TEST(Cli, BenchReport) {
  const fs::path dir = scratch("bench");
  const CmdResult r = run("bench " + kSample + " --repeats 1 --threads 2 --out " + (dir / "b.json").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const Json b = parse_json(read_text(dir / "b.json"), "bench");
  EXPECT_EQ(b["format"], "demoforge.bench");
  EXPECT_EQ(b["frames"], 142);
  EXPECT_EQ(b["width"], 160);
  EXPECT_GT(b["single_thread"]["frames_per_second"].get<double>(), 0.0);
  EXPECT_EQ(b["parallel"]["threads"], 2);
  EXPECT_EQ(parse_json(r.out, "stdout"), b);
}

TEST(Cli, ConfigOverridesFlags) {
  const fs::path dir = scratch("config");
  write_text(dir / "cfg.json", R"({"process": {"stride": 4}})");
  const CmdResult r = run("process " + kSample + " --imagebc-only --stride 2 --config " + (dir / "cfg.json").string() + " --out " +
                    (dir / "d").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const Json m = parse_json(read_text(dir / "d/manifest.json"), "manifest");
  EXPECT_EQ(m["imagebc"]["stride"], 4);
  write_text(dir / "bad.json", R"({"process": {"strid": 4}})");
  EXPECT_EQ(run("process " + kSample + " --config " + (dir / "bad.json").string() + " --out " + (dir / "e").string()).code, 1);
}

TEST(Cli, DataRootFromEnvironment) {
  EXPECT_EQ(run("validate sample_session", "cd / && DEMOFORGE_DATA=" + kData).code, 0);
  EXPECT_EQ(run("validate sample_session", "cd / && DEMOFORGE_DATA=/nonexistent").code, 1);
}

}  // namespace
}  // namespace demoforge
