// Copyright 2026 The Pathforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Runs the pathforge binary as a subprocess and checks exit codes and outputs.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pathforge/api.hpp"

namespace pathforge {
namespace {

namespace fs = std::filesystem;
using io::json;

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("pathforge_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    ASSERT_EQ(run("gen-tasks --templates 3 --variants 3 --seed 1 --out " + path("s.json")), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  // Exit status of `pathforge args`; stdout lands in out.txt.
  static int run(const std::string& args) {
    const std::string cmd = std::string(PATHFORGE_CLI) + " " + args + " > " + path("out.txt") +
                            " 2> " + path("err.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  static std::string output() {
    std::ifstream in(path("out.txt"));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static inline fs::path dir_;
};

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("gen-tasks --templates 3"), 1);
  EXPECT_EQ(run("eval --suite " + path("s.json") + " --setting sideways"), 1);
  EXPECT_EQ(run("solve --suite " + path("s.json") + " --task 00009:000 --replay 0.5,0.5,0.5"), 1);
  EXPECT_EQ(run("solve --suite " + path("s.json") + " --task 00000:000 --replay 0.5,0.5"), 1);
  EXPECT_EQ(run("solve --suite " + path("s.json") + " --task 00000:000 --replay 0.5,1.5,0"), 1);
  EXPECT_EQ(run("solve --suite " + path("s.json") + " --task 00000:000"), 1);
  EXPECT_EQ(run("gen-tasks --templates 99 --out " + path("x.json")), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, DataErrorsExitTwo) {
  EXPECT_EQ(run("gen-data --suite " + path("missing.json") + " --out " + path("d.pfrd")), 2);
  std::ofstream(path("junk.pfrd")) << "not a dataset";
  EXPECT_EQ(run("train --data " + path("junk.pfrd") + " --out " + path("m.pfwt")), 2);
  EXPECT_EQ(run("solve --suite " + path("junk.pfrd") + " --task 00000:000 --replay 0.5,0.5,0.5"),
            2);
  EXPECT_EQ(run("eval --suite " + path("s.json") + " --setting cross --agent random"), 2);
}

TEST_F(Cli, ReplayVerdictMatchesApi) {
  const auto suite = io::load_suite(path("s.json"));
  api::Service svc(Model(ModelConfig{32, 16, 0}), suite);
  for (const auto& t : suite.tasks) {
    const std::string id = task_id(t.task);
    for (const ActionVector& a : {t.witness, ActionVector{0.5, 0.9, 0.0},
                                  ActionVector{0.0, 0.5, 1.0}}) {
      char action[96];
      std::snprintf(action, sizeof action, "%.17g,%.17g,%.17g", a.x, a.y, a.r);
      ASSERT_EQ(run("solve --suite " + path("s.json") + " --task " + id + " --replay " + action), 0);
      const json cli = json::parse(output());
      const json req{{"action", io::to_json(a)}};
      const json api = svc.simulate(id, req.dump()).body;
      EXPECT_EQ(cli["valid"], api["valid"]) << id;
      EXPECT_EQ(cli["solved"], api["solved"]) << id;
      EXPECT_EQ(cli["solve_step"], api["solve_step"]) << id;
    }
  }
}

TEST_F(Cli, GenerateTrainEvaluateSolve) {
  ASSERT_EQ(run("gen-data --suite " + path("s.json") +
                " --rollouts-per-task 2 --resolution 32 --out " + path("d.pfrd")),
            0);
  EXPECT_EQ(io::load_dataset(path("d.pfrd")).size(), 18u);
  ASSERT_EQ(run("train --data " + path("d.pfrd") + " --epochs 1 --batch 4 --suite " +
                path("s.json") + " --folds 3 --fold 1 --out " + path("m1.pfwt")),
            0);
  EXPECT_EQ(io::load_checkpoint(path("m1.pfwt")).config.resolution, 32);
  ASSERT_EQ(run("eval --model " + path("m{fold}.pfwt") + " --suite " + path("s.json") +
                " --folds 3 --fold-ids 1 --max-attempts 5 --out " + path("r.json")),
            0);
  std::ifstream in(path("r.json"));
  const json rep = json::parse(in);
  EXPECT_EQ(rep["fold_reports"].size(), 1u);
  EXPECT_EQ(rep["fold_reports"][0]["fold_id"], 1);
  EXPECT_TRUE(fs::exists(path("r.txt")));
  EXPECT_NE(output().find("auc."), std::string::npos);

  // Fold 0's checkpoint was never written.
  EXPECT_EQ(run("eval --model " + path("m{fold}.pfwt") + " --suite " + path("s.json") +
                " --folds 3 --fold-ids 0"),
            2);
  ASSERT_EQ(run("solve --model " + path("m1.pfwt") + " --suite " + path("s.json") +
                " --task 00000:001 --max-attempts 4"),
            0);
  const json solve = json::parse(output());
  EXPECT_LE(solve["attempts"].size(), 4u);
}

}  // namespace
}  // namespace pathforge
