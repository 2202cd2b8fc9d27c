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

// JSON mirrors of scenes, rollouts, maps, proposals and reports; the suite
// manifest; and the plain-text report table.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pathforge/eval.hpp"
#include "pathforge/io.hpp"

namespace pathforge::io {

using json = nlohmann::json;

inline json to_json(const Body& b) {
  json j{{"id", b.id},
         {"class", class_name(b.cls)},
         {"pos", {b.pos.x, b.pos.y}},
         {"angle", b.angle},
         {"vel", {b.vel.x, b.vel.y}},
         {"ang_vel", b.ang_vel},
         {"static", b.is_static},
         {"restitution", b.restitution},
         {"friction", b.friction},
         {"density", b.density}};
  if (auto* c = std::get_if<Circle>(&b.shape))
    j["shape"] = {{"type", "circle"}, {"radius", c->radius}};
  else {
    const auto& x = std::get<Box>(b.shape);
    j["shape"] = {{"type", "box"}, {"half_w", x.half_w}, {"half_h", x.half_h}};
  }
  return j;
}

inline Body body_from_json(const json& j) {
  Body b;
  b.id = j.at("id").get<int>();
  const auto cls = class_from_name(j.at("class").get<std::string>());
  if (!cls) throw DataError("BadScene", "unknown body class " + j.at("class").dump());
  b.cls = *cls;
  b.pos = {j.at("pos").at(0).get<double>(), j.at("pos").at(1).get<double>()};
  b.angle = j.value("angle", 0.0);
  if (j.contains("vel")) b.vel = {j["vel"].at(0).get<double>(), j["vel"].at(1).get<double>()};
  b.ang_vel = j.value("ang_vel", 0.0);
  b.is_static = j.value("static", class_is_static(b.cls));
  b.restitution = j.value("restitution", b.restitution);
  b.friction = j.value("friction", b.friction);
  b.density = j.value("density", b.density);
  const json& s = j.at("shape");
  const auto type = s.at("type").get<std::string>();
  if (type == "circle")
    b.shape = Circle{s.at("radius").get<double>()};
  else if (type == "box")
    b.shape = Box{s.at("half_w").get<double>(), s.at("half_h").get<double>()};
  else
    throw DataError("BadScene", "unknown shape type " + type);
  return b;
}

inline json to_json(const Scene& s) {
  json bodies = json::array();
  for (const auto& b : s.bodies) bodies.push_back(to_json(b));
  return {{"gravity", s.gravity}, {"walls", s.walls}, {"bodies", bodies}};
}

inline Scene scene_from_json(const json& j) {
  Scene s;
  s.gravity = j.value("gravity", kDefaultGravity);
  s.walls = j.value("walls", true);
  for (const auto& b : j.at("bodies")) s.bodies.push_back(body_from_json(b));
  return s;
}

inline json to_json(const ActionVector& a) { return {{"x", a.x}, {"y", a.y}, {"r", a.r}}; }
inline ActionVector action_from_json(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("r").get<double>()};
}

inline json to_json(const PathMap& m) {
  return {{"height", m.height}, {"width", m.width}, {"data", m.data}};
}

inline json to_json(const Proposal& p) {
  return {{"action", to_json(p.action)}, {"score", p.score}, {"low_confidence", p.low_confidence}};
}

inline json frames_json(const Rollout& r) {
  json frames = json::array();
  for (const auto& f : r.frames) {
    json poses = json::array();
    for (std::size_t i = 0; i < f.poses.size(); ++i)
      poses.push_back({{"id", r.body_ids[i]},
                       {"pos", {f.poses[i].pos.x, f.poses[i].pos.y}},
                       {"angle", f.poses[i].angle}});
    frames.push_back({{"step", f.step}, {"poses", poses}});
  }
  return frames;
}

inline json to_json(const TaskSpec& t) {
  return {{"id", task_id(t)},
          {"template_id", t.template_id},
          {"template", get_template(t.template_id).name},
          {"variant_index", t.variant_index},
          {"variant_seed", t.variant_seed},
          {"target_id", t.target_id},
          {"goal_id", t.goal_id},
          {"scene", to_json(t.scene)}};
}

inline TaskSpec task_from_json(const json& j) {
  TaskSpec t;
  t.template_id = j.at("template_id").get<int>();
  t.variant_index = j.at("variant_index").get<int>();
  t.variant_seed = j.at("variant_seed").get<std::uint64_t>();
  t.target_id = j.at("target_id").get<int>();
  t.goal_id = j.at("goal_id").get<int>();
  t.scene = scene_from_json(j.at("scene"));
  return t;
}

// ---------------------------------------------------------------------------
// Suite manifest

struct Suite {
  SuiteConfig config;
  std::vector<SuiteTask> tasks;

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& t : tasks) out.push_back(task_id(t.task));
    return out;
  }
  const SuiteTask* find(const std::string& id) const {
    for (const auto& t : tasks)
      if (task_id(t.task) == id) return &t;
    return nullptr;
  }
  std::map<std::string, TaskSpec> by_id() const {
    std::map<std::string, TaskSpec> out;
    for (const auto& t : tasks) out.emplace(task_id(t.task), t.task);
    return out;
  }
};

inline json to_json(const Suite& s) {
  json tasks = json::array();
  for (const auto& t : s.tasks) {
    json j = to_json(t.task);
    j["witness"] = to_json(t.witness);
    tasks.push_back(std::move(j));
  }
  return {{"format", "pathforge-suite"},
          {"version", 1},
          {"seed", s.config.seed},
          {"templates", s.config.n_templates},
          {"variants", s.config.variants_per_template},
          {"search_budget", s.config.search_budget},
          {"tasks", tasks}};
}

inline Suite suite_from_json(const json& j) {
  if (j.value("format", "") != "pathforge-suite") throw BadMagic("not a task-suite manifest");
  if (j.value("version", 0) != 1) throw VersionUnsupported("suite version " + j["version"].dump());
  Suite s;
  s.config.seed = j.at("seed").get<std::uint64_t>();
  s.config.n_templates = j.at("templates").get<int>();
  s.config.variants_per_template = j.at("variants").get<int>();
  s.config.search_budget = j.value("search_budget", kDefaultSearchBudget);
  for (const auto& t : j.at("tasks"))
    s.tasks.push_back({task_from_json(t), action_from_json(t.at("witness"))});
  return s;
}

inline void save_suite(const std::string& path, const Suite& s) {
  const std::string text = to_json(s).dump(1);
  write_file(path, Bytes(text.begin(), text.end()));
}

inline Suite load_suite(const std::string& path) {
  const Bytes b = read_file(path);
  json j;
  try {
    j = json::parse(b.begin(), b.end());
    return suite_from_json(j);
  } catch (const json::exception& e) {
    throw DataError("BadManifest", path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const EvalReport& r) {
  json per = json::object();
  for (const auto& [tid, s] : r.per_template)
    per[std::to_string(tid)] = {
        {"auccess", s.auccess}, {"solved_within_10", s.solved_within_10}, {"n_tasks", s.n_tasks}};
  json j{{"setting", setting_name(r.setting)},
         {"agent", r.agent},
         {"per_template", per},
         {"mean_auccess", r.mean_auccess},
         {"mean_solved_within_10", r.mean_solved_within_10}};
  if (r.fold_id >= 0) j["fold_id"] = r.fold_id;
  return j;
}

// Rows auc. / perc., one column per template plus the mean; templates absent
// from every test split print "-".
inline std::string report_table(const EvalReport& r, int n_templates) {
  std::ostringstream out;
  char buf[32];
  out << r.agent << " (" << setting_name(r.setting) << ")\n";
  out << "         ";
  for (int t = 0; t < n_templates; ++t) {
    std::snprintf(buf, sizeof buf, "%7d", t);
    out << buf;
  }
  out << "   mean\n";
  for (int row = 0; row < 2; ++row) {
    out << (row == 0 ? "auc.     " : "perc.    ");
    for (int t = 0; t < n_templates; ++t) {
      const auto it = r.per_template.find(t);
      if (it == r.per_template.end()) {
        out << "      -";
        continue;
      }
      std::snprintf(buf, sizeof buf, "%7.1f",
                    row == 0 ? it->second.auccess : it->second.solved_within_10);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%7.1f\n", row == 0 ? r.mean_auccess : r.mean_solved_within_10);
    out << buf;
  }
  return out.str();
}

}  // namespace pathforge::io
