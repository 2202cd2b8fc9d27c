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


#include "pathforge/api.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <thread>

namespace pathforge::api {
namespace {

class ApiTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    io::Suite suite;
    suite.config.n_templates = 10;
    suite.config.variants_per_template = 4;
    suite.config.seed = 1;
    suite.tasks = build_task_suite(suite.config);
    service_ = new Service(Model(ModelConfig{64, 16, 5}), std::move(suite));
  }
  static void TearDownTestSuite() {
    delete service_;
    service_ = nullptr;
  }
  static const Service& svc() { return *service_; }
  static const SuiteTask& task(int i) { return svc().suite().tasks.at(i); }

  static json simulate_body(const ActionVector& a, int stride = 1) {
    return {{"action", {{"x", a.x}, {"y", a.y}, {"r", a.r}}}, {"frame_stride", stride}};
  }

 private:
  static inline Service* service_ = nullptr;
};

TEST_F(ApiTest, ListsEveryTask) {
  const Response r = svc().list_tasks();
  EXPECT_EQ(r.status, 200);
  ASSERT_EQ(r.body["tasks"].size(), 40u);
  EXPECT_EQ(r.body["tasks"][0], "00000:000");
  EXPECT_EQ(r.body["tasks"][39], "00009:003");
}

TEST_F(ApiTest, GetTaskMirrorsScene) {
  const auto id = task_id(task(5).task);
  const Response r = svc().get_task(id);
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["id"], id);
  EXPECT_EQ(r.body["resolution"], 64);
  EXPECT_EQ(io::task_from_json(r.body), task(5).task);
  EXPECT_EQ(svc().get_task("00042:000").status, 404);
}

TEST_F(ApiTest, SimulateWitnessSolves) {
  const auto& t = task(3);
  const Response r = svc().simulate(task_id(t.task), simulate_body(t.witness).dump());
  ASSERT_EQ(r.status, 200);
  EXPECT_TRUE(r.body["valid"]);
  EXPECT_TRUE(r.body["solved"]);
  ASSERT_TRUE(r.body["solve_step"].is_number_integer());
  const int solve_step = r.body["solve_step"];
  // stride 1: one frame per step plus the initial one.
  EXPECT_EQ(r.body["frames"].size(), static_cast<std::size_t>(solve_step + 2));
  EXPECT_EQ(r.body["frames"][0]["poses"].size(), t.task.scene.bodies.size() + 1);
}

TEST_F(ApiTest, SimulateIsPure) {
  const auto& t = task(17);
  const std::string body = simulate_body({0.4, 0.8, 0.3}, 4).dump();
  const Response a = svc().simulate(task_id(t.task), body);
  const Response b = svc().simulate(task_id(t.task), body);
  EXPECT_EQ(a.status, 200);
  EXPECT_EQ(a.body.dump(), b.body.dump());
}

TEST_F(ApiTest, PlacementInsideWallIsInvalidNotAnError) {
  const Response r = svc().simulate(task_id(task(0).task), simulate_body({0.0, 0.5, 0.5}).dump());
  ASSERT_EQ(r.status, 200);
  EXPECT_FALSE(r.body["valid"]);
  EXPECT_FALSE(r.body["solved"]);
  EXPECT_TRUE(r.body["frames"].empty());
}

TEST_F(ApiTest, SimulateErrors) {
  const auto id = task_id(task(0).task);
  EXPECT_EQ(svc().simulate(id, simulate_body({0.5, 1.2, 0.5}).dump()).status, 422);
  EXPECT_EQ(svc().simulate(id, simulate_body({-0.1, 0.5, 0.5}).dump()).status, 422);
  EXPECT_EQ(svc().simulate(id, simulate_body({0.5, 0.5, 0.5}, 0).dump()).status, 422);
  EXPECT_EQ(svc().simulate(id, "{not json").status, 400);
  EXPECT_EQ(svc().simulate(id, R"({"action": {"x": 0.5}})").status, 400);
  EXPECT_EQ(svc().simulate("nope", simulate_body({0.5, 0.5, 0.5}).dump()).status, 404);
}

TEST_F(ApiTest, SimulateMatchesReplay) {
  for (int i : {0, 9, 21, 38}) {
    const auto& t = task(i);
    for (const ActionVector a : {t.witness, ActionVector{0.5, 0.9, 0.1}}) {
      const Replay rep = replay_action(t.task, a);
      const Response r = svc().simulate(task_id(t.task), simulate_body(a).dump());
      EXPECT_EQ(r.body["valid"], rep.valid);
      EXPECT_EQ(r.body["solved"], rep.solved);
    }
  }
}

TEST_F(ApiTest, PredictReturnsMapsAndProposals) {
  const auto id = task_id(task(12).task);
  const Response r = svc().predict(id);
  ASSERT_EQ(r.status, 200);
  for (const char* k : {"base", "target", "action", "placement"}) {
    const json& m = r.body[k];
    EXPECT_EQ(m["height"], 64);
    ASSERT_EQ(m["data"].size(), 64u * 64u) << k;
    for (const auto& v : m["data"]) {
      const double d = v.get<double>();
      ASSERT_TRUE(std::isfinite(d) && d >= 0.0 && d <= 1.0);
    }
  }
  const json& props = r.body["proposals"];
  ASSERT_EQ(props.size(), 5u);
  for (std::size_t i = 1; i < props.size(); ++i)
    EXPECT_GE(props[i - 1]["score"].get<double>(), props[i]["score"].get<double>());
  EXPECT_EQ(svc().predict(id).body.dump(), r.body.dump());
  EXPECT_EQ(svc().predict("00000:999").status, 404);
}

TEST_F(ApiTest, ServesOverHttp) {
  httplib::Server srv;
  svc().mount(srv);
  const int port = srv.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  auto list = cli.Get("/api/tasks");
  ASSERT_TRUE(list);
  EXPECT_EQ(list->status, 200);
  EXPECT_EQ(json::parse(list->body)["tasks"].size(), 40u);
  EXPECT_EQ(cli.Get("/api/tasks/99999:000")->status, 404);

  const auto& t = task(3);
  const std::string path = "/api/tasks/" + task_id(t.task);
  auto sim = cli.Post(path + "/simulate", simulate_body(t.witness, 10).dump(), "application/json");
  ASSERT_TRUE(sim);
  EXPECT_EQ(sim->status, 200);
  EXPECT_TRUE(json::parse(sim->body)["solved"]);
  auto bad = cli.Post(path + "/simulate", simulate_body({2, 0, 0}).dump(), "application/json");
  EXPECT_EQ(bad->status, 422);
  auto pred = cli.Post(path + "/predict", "", "application/json");
  ASSERT_TRUE(pred);
  EXPECT_EQ(json::parse(pred->body)["proposals"].size(), 5u);

  srv.stop();
  th.join();
}

}  // namespace
}  // namespace pathforge::api
