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


#pragma once

// HTTP API over a fixed checkpoint and task suite. Handlers are plain
// functions of (id, body) so they can be exercised without a socket; `mount`
// wires them into an httplib server.

#include <map>
#include <memory>
#include <string>

#include "pathforge/json_io.hpp"
// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro.
#include "httplib.h"

namespace pathforge::api {

using io::json;

inline constexpr int kDefaultFrameStride = 3;

// Outcome of placing an action and rolling the task forward. Shared by the
// API and `solve --replay`.
struct Replay {
  bool valid = false;
  bool solved = false;
  std::optional<int> solve_step;
  Rollout rollout;
};

inline Replay replay_action(const TaskSpec& task, const ActionVector& a,
                            int frame_stride = kDefaultFrameStride) {
  if (!action_in_range(a)) throw std::invalid_argument("action outside [0,1]^3");
  Replay out;
  auto placed = place_action_ball(task.scene, a);
  if (!placed) return out;
  out.valid = true;
  out.rollout = simulate_rollout(*placed, kDefaultMaxSteps, frame_stride);
  out.solved = out.rollout.solved;
  out.solve_step = out.rollout.solve_step;
  return out;
}

inline json to_json(const Replay& r) {
  json j{{"valid", r.valid},
         {"solved", r.solved},
         {"solve_step", r.solve_step ? json(*r.solve_step) : json(nullptr)}};
  j["frames"] = r.valid ? io::frames_json(r.rollout) : json::array();
  if (r.valid) j["body_ids"] = r.rollout.body_ids;
  return j;
}

struct Response {
  int status = 200;
  json body;
};

inline Response error_response(int status, const std::string& kind, const std::string& what) {
  return {status, {{"error", kind}, {"message", what}}};
}

class Service {
 public:
  // Proposal sampling seed; fixed so /predict is a pure function of the task.
  static constexpr std::uint64_t kPredictSeed = 0;

  Service(Model model, io::Suite suite) : model_(std::move(model)), suite_(std::move(suite)) {
    for (const auto& t : suite_.tasks) index_.emplace(task_id(t.task), &t.task);
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const Model& model() const { return model_; }
  const io::Suite& suite() const { return suite_; }

  Response list_tasks() const {
    json ids = json::array();
    for (const auto& t : suite_.tasks) ids.push_back(task_id(t.task));
    return {200, {{"tasks", ids}}};
  }

  Response get_task(const std::string& id) const {
    const TaskSpec* t = find(id);
    if (!t) return unknown(id);
    json j = io::to_json(*t);
    j["resolution"] = model_.config.resolution;
    return {200, j};
  }

  Response simulate(const std::string& id, const std::string& body) const {
    const TaskSpec* t = find(id);
    if (!t) return unknown(id);
    ActionVector a;
    int stride = kDefaultFrameStride;
    try {
      const json req = json::parse(body);
      a = io::action_from_json(req.at("action"));
      stride = req.value("frame_stride", kDefaultFrameStride);
    } catch (const json::exception& e) {
      return error_response(400, "BadRequest", e.what());
    }
    if (!action_in_range(a)) return error_response(422, "ActionOutOfRange", "action outside [0,1]^3");
    if (stride < 1) return error_response(422, "BadFrameStride", "frame_stride must be >= 1");
    return {200, to_json(replay_action(*t, a, stride))};
  }

  Response predict(const std::string& id) const {
    const TaskSpec* t = find(id);
    if (!t) return unknown(id);
    // Inference only reads parameters.
    auto& m = const_cast<Model&>(model_);
    const SolvePlan plan = plan_actions(m, *t, kPredictSeed);
    json props = json::array();
    for (const auto& p : plan.proposals) props.push_back(io::to_json(p));
    return {200,
            {{"base", io::to_json(plan.prediction.base)},
             {"target", io::to_json(plan.prediction.target)},
             {"action", io::to_json(plan.prediction.action)},
             {"placement", io::to_json(plan.prediction.placement)},
             {"proposals", props}}};
  }

  void mount(httplib::Server& srv) const {
    auto send = [](httplib::Response& res, const Response& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    srv.Get("/api/tasks", [=, this](const httplib::Request&, httplib::Response& res) {
      send(res, list_tasks());
    });
    srv.Get(R"(/api/tasks/([^/]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_task(req.matches[1]));
    });
    srv.Post(R"(/api/tasks/([^/]+)/simulate)",
             [=, this](const httplib::Request& req, httplib::Response& res) {
               send(res, simulate(req.matches[1], req.body));
             });
    srv.Post(R"(/api/tasks/([^/]+)/predict)",
             [=, this](const httplib::Request& req, httplib::Response& res) {
               send(res, predict(req.matches[1]));
             });
    srv.set_exception_handler(
        [=](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            send(res, error_response(500, "Internal", e.what()));
          }
        });
  }

 private:
  const TaskSpec* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : it->second;
  }
  static Response unknown(const std::string& id) {
    return error_response(404, "UnknownTask", "no task " + id);
  }

  Model model_;
  io::Suite suite_;
  std::map<std::string, const TaskSpec*> index_;
};

}  // namespace pathforge::api
