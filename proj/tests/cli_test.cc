// Copyright 2026 The SSLAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sslam/cli.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_util.h"

namespace sslam::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(call({"--help"}).code, kExitOk);
  EXPECT_EQ(call({"pretrain-stage2", "--help"}).code, kExitOk);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(call({}).code, kExitUsage);
  EXPECT_EQ(call({"no-such-command"}).code, kExitUsage);
  EXPECT_EQ(call({"synth-data", "--out-dir", "x", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(call({"pretrain-stage2", "--manifest", "m", "--run-dir", "r", "--variant", "XX"}).code,
            kExitUsage);
}

TEST(Cli, StageTwoNeedsInitCheckpoint) {
  const Result r = call({"pretrain-stage2", "--manifest", "m.jsonl", "--run-dir",
                         testing::scratch_dir("cli_noinit").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("--init-checkpoint"), std::string::npos) << r.err;
}

TEST(Cli, MissingManifestIsDataError) {
  const Result r = call({"pretrain-stage1", "--manifest", "/nonexistent/manifest.jsonl",
                         "--run-dir", testing::scratch_dir("cli_nomanifest").string()});
  EXPECT_EQ(r.code, kExitData) << r.err;
}

TEST(Cli, AnalyzeOntologyOnFixture) {
  const fs::path report = testing::scratch_dir("cli_onto") / "poly.json";
  const Result r = call({"analyze-ontology", "--ontology",
                         std::string(SSLAM_TEST_DATA) + "/ontology_fixture.json", "--labels",
                         std::string(SSLAM_TEST_DATA) + "/fixture_labels.jsonl", "--report",
                         report.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("L=1 polyphonic=60.0000%"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("L=4 polyphonic=40.0000%"), std::string::npos) << r.out;
  std::ifstream in(report);
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["clips"], 10);
  EXPECT_DOUBLE_EQ(j["levels"][1]["polyphonic_percent"].get<double>(), 50.0);
}

TEST(Cli, ToyPipelineEndToEnd) {
  const fs::path dir = testing::scratch_dir("cli_pipeline");
  const std::string data = (dir / "data").string();
  {
    std::ofstream cfg(dir / "small.toml");
    cfg << "[data]\nclip_seconds = 1.28\ntarget_frames = 128\n";
  }
  const std::string cfg = (dir / "small.toml").string();
  const std::string manifest = data + "/manifest.jsonl";
  ASSERT_EQ(call({"synth-data", "--out-dir", data, "--n-clips", "6", "--clip-seconds", "1.28"})
                .code,
            kExitOk);
  const std::vector<std::string> tiny = {"--config", cfg,       "--depth",      "2",
                                         "--width",  "8",       "--heads",      "2",
                                         "--steps",  "2",       "--batch-size", "2",
                                         "--clone-batch", "2"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), tiny.begin(), tiny.end());
    return a;
  };
  Result r = call(with({"pretrain-stage1", "--manifest", manifest, "--run-dir",
                        (dir / "s1").string()}));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("step=2"), std::string::npos) << r.out;
  ASSERT_TRUE(fs::exists(dir / "s1" / "final.ckpt"));

  r = call(with({"pretrain-stage2", "--manifest", manifest, "--run-dir", (dir / "s2").string(),
                 "--init-checkpoint", (dir / "s1" / "final.ckpt").string(), "--variant",
                 "SSLAM"}));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("loss_srl="), std::string::npos) << r.out;
  ASSERT_TRUE(fs::exists(dir / "s2" / "final.ckpt"));

  r = call({"probe", "--checkpoint", (dir / "s2" / "final.ckpt").string(), "--train-manifest",
            manifest, "--eval-manifest", manifest, "--run-dir", (dir / "probe").string(),
            "--epochs", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream in(dir / "probe" / "report.json");
  const auto report = nlohmann::json::parse(in);
  EXPECT_EQ(report["n_eval"], 6);
  EXPECT_EQ(report["per_class_ap"].size(), 16u);
  EXPECT_GE(report["value"].get<double>(), 0.0);
  EXPECT_LE(report["value"].get<double>(), 1.0);

  const fs::path eval_report = dir / "eval.json";
  r = call({"eval", "--checkpoint", (dir / "s2" / "final.ckpt").string(), "--head",
            (dir / "probe" / "probe_head.json").string(), "--manifest", manifest, "--report",
            eval_report.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream ein(eval_report);
  const auto ej = nlohmann::json::parse(ein);
  EXPECT_NEAR(ej["value"].get<double>(), report["value"].get<double>(), 1e-12);

  r = call({"dump-spectrogram", "--wav", data + "/clips/clip_00000.wav", "--out",
            (dir / "clip0.spec").string(), "--config", cfg});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("128x128"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace sslam::cli
