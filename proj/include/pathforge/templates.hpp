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

// Parameterized single-ball puzzle templates and the random-search oracle
// that finds solving actions for sampled variants.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pathforge/physics.hpp"
#include "pathforge/util.hpp"

namespace pathforge {

// Thinnest static obstacle the templates may emit. Suite speeds stay below
// ~4.5 units/s, i.e. < 0.075 units per step.
inline constexpr double kMinStaticThickness = 0.08;
inline constexpr int kMaxRejections = 1000;
inline constexpr int kDefaultSearchBudget = 5000;

struct TaskSpec {
  int template_id = 0;
  std::uint64_t variant_seed = 0;
  int variant_index = 0;
  Scene scene;
  int target_id = 0;
  int goal_id = 0;

  bool operator==(const TaskSpec&) const = default;
};

// "TTTTT:VVV", the task id used by manifests, folds and the HTTP API.
inline std::string task_id(int template_id, int variant_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d:%03d", template_id, variant_index);
  return buf;
}
inline std::string task_id(const TaskSpec& t) { return task_id(t.template_id, t.variant_index); }

struct TemplateDef {
  int template_id = 0;
  std::string name;
  std::string description;
  std::function<Scene(CounterRng&)> build;
};

// ---------------------------------------------------------------------------
// Scene validation

// Returns an error message when the scene violates a structural invariant.
inline std::optional<std::string> check_scene(const Scene& scene) {
  int targets = 0, goals = 0, actions = 0;
  for (const auto& b : scene.bodies) {
    targets += b.cls == BodyClass::Target;
    goals += b.cls == BodyClass::GoalDynamic || b.cls == BodyClass::GoalStatic;
    actions += b.cls == BodyClass::Action;
    if (b.is_static != class_is_static(b.cls)) return "static flag disagrees with class";
    if (b.is_static && (b.vel != Vec2{} || b.ang_vel != 0.0)) return "static body is moving";
    if (auto* c = std::get_if<Circle>(&b.shape); c && !(c->radius > 0.0))
      return "non-positive radius";
    if (auto* x = std::get_if<Box>(&b.shape); x && !(x->half_w > 0.0 && x->half_h > 0.0))
      return "non-positive box extent";
    if (!std::isfinite(b.pos.x) || !std::isfinite(b.pos.y)) return "non-finite position";
  }
  if (targets != 1) return "scene needs exactly one target";
  if (goals != 1) return "scene needs exactly one goal";
  if (actions > 1) return "scene has more than one action body";
  for (std::size_t i = 0; i < scene.bodies.size(); ++i)
    for (std::size_t j = i + 1; j < scene.bodies.size(); ++j) {
      const auto& a = scene.bodies[i];
      const auto& b = scene.bodies[j];
      if (auto m = collide(a, b, 0.0); m && min_separation(*m) < -1e-6)
        return "bodies " + std::to_string(a.id) + " and " + std::to_string(b.id) + " overlap";
    }
  return std::nullopt;
}

// Structurally valid, target and goal present, and not solved without an action.
inline bool validate_task(const TaskSpec& task) {
  if (check_scene(task.scene)) return false;
  if (find_body(task.scene, BodyClass::Action)) return false;
  const auto target = find_body(task.scene, BodyClass::Target);
  const auto goal = find_goal(task.scene);
  if (!target || !goal || *target != task.target_id || *goal != task.goal_id) return false;
  for (const auto& b : task.scene.bodies) {
    Vec2 lo, hi;
    detail::bounding_box(b, lo, hi);
    if (lo.x < -1e-9 || lo.y < -1e-9 || hi.x > 1 + 1e-9 || hi.y > 1 + 1e-9) return false;
  }
  return !simulate_rollout(task.scene, kDefaultMaxSteps, kDefaultMaxSteps).solved;
}

// ---------------------------------------------------------------------------
// Template library

namespace templates {

class Builder {
 public:
  int ball(BodyClass cls, double x, double y, double r) {
    Body b;
    b.id = next_++;
    b.shape = Circle{r};
    b.cls = cls;
    b.pos = {x, y};
    b.is_static = class_is_static(cls);
    scene_.bodies.push_back(b);
    return b.id;
  }
  int box(BodyClass cls, double cx, double cy, double hw, double hh, double angle = 0.0) {
    Body b;
    b.id = next_++;
    b.shape = Box{hw, hh};
    b.cls = cls;
    b.pos = {cx, cy};
    b.angle = angle;
    b.is_static = class_is_static(cls);
    scene_.bodies.push_back(b);
    return b.id;
  }
  // Axis-aligned box given by its extents.
  int span(BodyClass cls, double x0, double x1, double y0, double y1) {
    return box(cls, 0.5 * (x0 + x1), 0.5 * (y0 + y1), 0.5 * (x1 - x0), 0.5 * (y1 - y0));
  }
  Scene take() { return std::move(scene_); }

 private:
  Scene scene_;
  int next_ = 0;
};

constexpr double kSlab = kMinStaticThickness;  // floor slab top
using C = BodyClass;

// Target rests near the left end of a ledge; the goal strip is the floor under
// the left side. Knock the target off to the left.
inline Scene ball_falls_to_floor_goal(CounterRng& g) {
  Builder b;
  const double gw = g.uniform(0.2, 0.34);
  const double hy = g.uniform(0.35, 0.6);
  const double lx = gw + g.uniform(0.04, 0.14);
  const double len = g.uniform(0.25, 0.4);
  const double r = g.uniform(0.035, 0.06);
  b.span(C::GoalStatic, 0.0, gw, 0.0, kSlab);
  b.span(C::BlackStatic, gw, 1.0, 0.0, kSlab);
  b.span(C::BlackStatic, lx, std::min(lx + len, 0.95), hy - kSlab, hy);
  b.ball(C::Target, lx + r + g.uniform(0.01, 0.08), hy + r, r);
  return b.take();
}

// Target sits on the left of a long ledge. Roll it right off the far end so it
// lands and rolls onto the goal strip against the right wall.
inline Scene roll_along_ledge(CounterRng& g) {
  Builder b;
  const double gw = g.uniform(0.2, 0.32);
  const double hy = g.uniform(0.3, 0.55);
  const double lx = g.uniform(0.05, 0.15);
  const double rx = g.uniform(0.5, 0.65);
  const double r = g.uniform(0.035, 0.055);
  b.span(C::BlackStatic, 0.0, 1.0 - gw, 0.0, kSlab);
  b.span(C::GoalStatic, 1.0 - gw, 1.0, 0.0, kSlab);
  b.span(C::BlackStatic, lx, rx, hy - kSlab, hy);
  // A stop at the ledge's left end keeps leftward pushes from succeeding.
  b.span(C::BlackStatic, lx, lx + kSlab, hy, hy + g.uniform(0.1, 0.18));
  b.ball(C::Target, lx + kSlab + r + g.uniform(0.02, 0.1), hy + r, r);
  return b.take();
}

// Target falls straight onto a black floor. Deflect it mid-fall so it ends up
// rolling onto the goal strip on one side.
inline Scene deflect_falling(CounterRng& g) {
  Builder b;
  const bool right = g.coin();
  const double gw = g.uniform(0.22, 0.35);
  const double r = g.uniform(0.035, 0.06);
  const double tx = right ? g.uniform(0.2, 0.45) : g.uniform(0.55, 0.8);
  const double ty = g.uniform(0.6, 0.85);
  if (right) {
    b.span(C::BlackStatic, 0.0, 1.0 - gw, 0.0, kSlab);
    b.span(C::GoalStatic, 1.0 - gw, 1.0, 0.0, kSlab);
  } else {
    b.span(C::GoalStatic, 0.0, gw, 0.0, kSlab);
    b.span(C::BlackStatic, gw, 1.0, 0.0, kSlab);
  }
  // Bumper on the far side stops the target from reaching the goal by rebound.
  const double bx = right ? g.uniform(0.03, 0.1) : g.uniform(0.82, 0.89);
  b.span(C::BlackStatic, bx, bx + kSlab, kSlab, kSlab + g.uniform(0.08, 0.15));
  b.ball(C::Target, tx, ty, r);
  return b.take();
}

// Target drops just left of a low wall; the goal is the floor right of it.
inline Scene deflect_around_wall(CounterRng& g) {
  Builder b;
  const double wx = g.uniform(0.42, 0.6);
  const double wh = g.uniform(0.1, 0.2);
  const double r = g.uniform(0.035, 0.055);
  b.span(C::BlackStatic, 0.0, wx, 0.0, kSlab);
  b.span(C::BlackStatic, wx, wx + kSlab, kSlab, kSlab + wh);
  b.span(C::GoalStatic, wx, 1.0, 0.0, kSlab);
  b.ball(C::Target, wx - r - g.uniform(0.02, 0.08), g.uniform(0.6, 0.85), r);
  return b.take();
}

// The dynamic goal rests on a ledge; the target sits in a pit to the left.
// Knock the goal ball off so it ends up in the pit with the target.
inline Scene goal_into_valley(CounterRng& g) {
  Builder b;
  const double rt = g.uniform(0.035, 0.05);
  const double rg = g.uniform(0.035, 0.05);
  const double top = 0.18;
  const double px = g.uniform(0.08, 0.3);
  const double pw = 2 * rt + 2 * rg + g.uniform(0.0, 0.04);
  b.span(C::BlackStatic, 0.0, px, 0.0, top);
  b.span(C::BlackStatic, px, px + pw, 0.0, kSlab);
  b.span(C::BlackStatic, px + pw, 1.0, 0.0, top);
  b.ball(C::Target, px + rt + g.uniform(0.0, 0.02), kSlab + rt, rt);
  const double ledge_y = g.uniform(0.45, 0.65);
  const double lx = g.uniform(0.55, 0.7);
  b.span(C::BlackStatic, lx, std::min(lx + 0.3, 0.97), ledge_y - kSlab, ledge_y);
  b.ball(C::GoalDynamic, lx + rg + g.uniform(0.01, 0.06), ledge_y + rg, rg);
  return b.take();
}

// Target rests on the floor left of a pit whose bottom is the goal.
inline Scene push_into_pit(CounterRng& g) {
  Builder b;
  const double px = g.uniform(0.5, 0.7);
  const double pw = g.uniform(0.12, 0.18);
  const double top = 0.2;
  b.span(C::BlackStatic, 0.0, px, 0.0, top);
  b.span(C::GoalStatic, px, px + pw, 0.0, kSlab);
  b.span(C::BlackStatic, px + pw, 1.0, 0.0, top);
  const double r = g.uniform(0.035, 0.055);
  b.ball(C::Target, g.uniform(0.1, px - 0.15), top + r, r);
  // Kerb against the left wall.
  b.span(C::BlackStatic, 0.0, kSlab, top, top + g.uniform(0.08, 0.1));
  return b.take();
}

// Target balances on a grey pillar; the goal strip lies on the floor to one side.
inline Scene topple_tower(CounterRng& g) {
  Builder b;
  const bool right = g.coin();
  const double gw = g.uniform(0.2, 0.3);
  if (right) {
    b.span(C::BlackStatic, 0.0, 1.0 - gw, 0.0, kSlab);
    b.span(C::GoalStatic, 1.0 - gw, 1.0, 0.0, kSlab);
  } else {
    b.span(C::GoalStatic, 0.0, gw, 0.0, kSlab);
    b.span(C::BlackStatic, gw, 1.0, 0.0, kSlab);
  }
  const double tx = right ? g.uniform(0.25, 0.5) : g.uniform(0.5, 0.75);
  const double pw = g.uniform(0.03, 0.05);
  const double ph = g.uniform(0.12, 0.22);
  b.box(C::GreyDynamic, tx, kSlab + ph, pw, ph);
  const double r = g.uniform(0.035, 0.05);
  b.ball(C::Target, tx, kSlab + 2 * ph + r, r);
  // Keep the target from rolling off on the far side.
  const double sx = right ? tx - g.uniform(0.2, 0.3) : tx + g.uniform(0.2, 0.3);
  b.span(C::BlackStatic, sx - kSlab / 2, sx + kSlab / 2, kSlab, kSlab + g.uniform(0.08, 0.12));
  return b.take();
}

// Target rolls down a ramp toward a shallow gap and drops in. Fill the gap so
// it rolls across onto the goal platform.
inline Scene bridge_a_gap(CounterRng& g) {
  Builder b;
  const double top = 0.25;
  const double gap0 = g.uniform(0.45, 0.55);
  const double gap = g.uniform(0.1, 0.14);
  const double depth = g.uniform(0.07, 0.1);
  b.span(C::BlackStatic, 0.0, gap0, 0.0, top);
  b.span(C::BlackStatic, gap0, gap0 + gap, 0.0, top - depth);
  b.span(C::BlackStatic, gap0 + gap, gap0 + gap + kSlab, 0.0, top);
  b.span(C::BlackStatic, gap0 + gap + kSlab, 1.0, 0.0, top - kSlab);
  b.span(C::GoalStatic, gap0 + gap + kSlab, 1.0, top - kSlab, top);
  // Ramp hovering just above the platform, descending to the right.
  const double ang = g.uniform(0.15, 0.25);
  const double len = 0.3;
  const double h = kMinStaticThickness / 2;
  const double c = std::cos(ang), s = std::sin(ang);
  const double foot = g.uniform(0.32, gap0 - 0.06);  // x of the ramp's lower end
  // Lowest corner sits 0.01 above the platform.
  const double cx = foot - len / 2 * c;
  const double cy = top + 0.01 + len / 2 * s + h * c + h * s * 0.0;
  b.box(C::BlackStatic, cx, cy + h * s, len / 2, h, -ang);
  const double r = g.uniform(0.035, 0.05);
  const double along = g.uniform(0.04, 0.1);  // from the ramp center toward its top
  const Vec2 n{s, c};
  const Vec2 up_slope{-c, s};
  const Vec2 surf = Vec2{cx, cy + h * s} + n * h + up_slope * along;
  b.ball(C::Target, surf.x + n.x * r, surf.y + n.y * r, r);
  return b.take();
}

// Grey bar on a pivot with the target on its low end; drop weight on the high
// end to throw the target toward the goal basket.
inline Scene seesaw(CounterRng& g) {
  Builder b;
  const double px = g.uniform(0.3, 0.45);
  const double ph = g.uniform(0.12, 0.18);
  b.span(C::BlackStatic, 0.0, 1.0, 0.0, kSlab);
  b.span(C::BlackStatic, px - 0.04, px + 0.04, kSlab, kSlab + ph);
  const double half = g.uniform(0.17, 0.22);
  const double bar_h = 0.015;
  b.box(C::GreyDynamic, px, kSlab + ph + bar_h, half, bar_h);
  const double r = g.uniform(0.035, 0.05);
  b.ball(C::Target, px - half + r + 0.01, kSlab + ph + 2 * bar_h + r, r);
  // Basket on the right: walls with the goal as its floor.
  const double bx = g.uniform(0.65, 0.75);
  const double bw = g.uniform(0.16, 0.22);
  const double wall_h = g.uniform(0.1, 0.16);
  b.span(C::BlackStatic, bx, bx + kSlab, kSlab, kSlab + wall_h);
  b.span(C::GoalStatic, bx + kSlab, std::min(bx + kSlab + bw, 0.92), kSlab, 2 * kSlab);
  b.span(C::BlackStatic, std::min(bx + kSlab + bw, 0.92), std::min(bx + kSlab + bw, 0.92) + kSlab,
         kSlab, kSlab + wall_h);
  return b.take();
}

// Target on a high ledge; the goal is the floor of a basket to the right.
inline Scene ledge_to_basket(CounterRng& g) {
  Builder b;
  const double hy = g.uniform(0.45, 0.7);
  const double rx = g.uniform(0.3, 0.45);
  b.span(C::BlackStatic, 0.0, 1.0, 0.0, kSlab);
  b.span(C::BlackStatic, 0.0, rx, hy - kSlab, hy);
  const double r = g.uniform(0.035, 0.05);
  b.ball(C::Target, rx - r - g.uniform(0.02, 0.12), hy + r, r);
  const double bx = rx + g.uniform(0.0, 0.08);
  const double bw = g.uniform(0.2, 0.28);
  const double wall_h = g.uniform(0.06, 0.1);
  b.span(C::BlackStatic, bx, bx + kSlab, kSlab, kSlab + wall_h);
  b.span(C::GoalStatic, bx + kSlab, bx + kSlab + bw, kSlab, 2 * kSlab);
  b.span(C::BlackStatic, bx + kSlab + bw, bx + 2 * kSlab + bw, kSlab, kSlab + wall_h);
  return b.take();
}

}  // namespace templates

inline const std::vector<TemplateDef>& template_registry() {
  static const std::vector<TemplateDef> registry = [] {
    using namespace templates;
    std::vector<TemplateDef> r;
    auto add = [&](std::string name, std::string desc, std::function<Scene(CounterRng&)> fn) {
      r.push_back({static_cast<int>(r.size()), std::move(name), std::move(desc), std::move(fn)});
    };
    add("ball-falls-to-floor-goal", "knock the target off a ledge onto the goal floor",
        ball_falls_to_floor_goal);
    add("roll-along-ledge", "start the target rolling along a ledge toward the goal side",
        roll_along_ledge);
    add("deflect-falling", "deflect a falling target onto the goal floor", deflect_falling);
    add("deflect-around-wall", "send a falling target over a wall", deflect_around_wall);
    add("goal-into-valley", "knock the dynamic goal into the target's valley", goal_into_valley);
    add("push-into-pit", "get the target past a block into the goal pit", push_into_pit);
    add("topple-tower", "topple the pillar the target balances on", topple_tower);
    add("bridge-a-gap", "release the target down a ramp and across a gap", bridge_a_gap);
    add("seesaw", "throw the target into a basket with a seesaw", seesaw);
    add("ledge-to-basket", "push the target off a ledge into a basket", ledge_to_basket);
    return r;
  }();
  return registry;
}

inline const TemplateDef& get_template(int template_id) {
  const auto& reg = template_registry();
  if (template_id < 0 || template_id >= static_cast<int>(reg.size()))
    throw std::out_of_range("unknown template id " + std::to_string(template_id));
  return reg[template_id];
}

// ---------------------------------------------------------------------------
// Task generation

inline TaskSpec instantiate_task(const TemplateDef& tmpl, std::uint64_t seed,
                                 int variant_index = 0) {
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    CounterRng rng(hash_combine(hash_combine(static_cast<std::uint64_t>(tmpl.template_id), seed),
                                static_cast<std::uint64_t>(attempt)));
    TaskSpec t;
    t.template_id = tmpl.template_id;
    t.variant_seed = seed;
    t.variant_index = variant_index;
    t.scene = tmpl.build(rng);
    const auto target = find_body(t.scene, BodyClass::Target);
    const auto goal = find_goal(t.scene);
    if (!target || !goal) continue;
    t.target_id = *target;
    t.goal_id = *goal;
    if (validate_task(t)) return t;
  }
  throw GenerationExhausted("template " + tmpl.name + " rejected " +
                            std::to_string(kMaxRejections) + " samples for seed " +
                            std::to_string(seed));
}

inline bool action_solves(const Scene& scene, const ActionVector& a) {
  auto placed = place_action_ball(scene, a);
  return placed && simulate_rollout(*placed, kDefaultMaxSteps, kDefaultMaxSteps).solved;
}

// Uniform random search. `budget` counts rollouts of valid placements; invalid
// draws are skipped (capped at 20 per rollout of budget).
inline std::vector<ActionVector> find_solving_actions(const TaskSpec& task, int n_wanted,
                                                      int budget, std::uint64_t seed) {
  std::vector<ActionVector> found;
  if (n_wanted < 1) throw std::invalid_argument("find_solving_actions: n_wanted must be >= 1");
  CounterRng rng(hash_combine(seed, hash_combine(task.template_id, task.variant_seed)));
  int rollouts = 0;
  const long max_draws = 20L * budget;
  for (long draw = 0; draw < max_draws && rollouts < budget; ++draw) {
    ActionVector a{rng.uniform(), rng.uniform(), rng.uniform()};
    auto placed = place_action_ball(task.scene, a);
    if (!placed) continue;
    ++rollouts;
    if (simulate_rollout(*placed, kDefaultMaxSteps, kDefaultMaxSteps).solved) {
      found.push_back(a);
      if (static_cast<int>(found.size()) == n_wanted) break;
    }
  }
  return found;
}

struct SuiteTask {
  TaskSpec task;
  ActionVector witness;
};

struct SuiteConfig {
  int n_templates = 10;
  int variants_per_template = 40;
  std::uint64_t seed = 0;
  int search_budget = kDefaultSearchBudget;
  // Extra variant seeds tried per slot when a variant has no solution in budget.
  int max_skips = 20;
};

inline std::uint64_t variant_seed(std::uint64_t suite_seed, int template_id, int slot) {
  return hash_combine(hash_combine(suite_seed, 0x7e3a1eULL + template_id),
                      static_cast<std::uint64_t>(slot));
}

// templates x variants tasks ordered by (template, variant). Every task is
// validated and has a witness action that replays to solved.
inline std::vector<SuiteTask> build_task_suite(const SuiteConfig& cfg) {
  if (cfg.variants_per_template < 1)
    throw std::invalid_argument("build_task_suite: variants_per_template must be >= 1");
  if (cfg.n_templates < 1 || cfg.n_templates > static_cast<int>(template_registry().size()))
    throw std::invalid_argument("build_task_suite: template count out of range");
  const int total = cfg.n_templates * cfg.variants_per_template;
  std::vector<SuiteTask> out(total);
  parallel_for(total, [&](int i) {
    const int tid = i / cfg.variants_per_template;
    const int v = i % cfg.variants_per_template;
    const auto& tmpl = get_template(tid);
    for (int skip = 0; skip <= cfg.max_skips; ++skip) {
      // Slot numbering keeps retries disjoint from other variants' seeds.
      const auto seed = variant_seed(cfg.seed, tid, v + skip * cfg.variants_per_template);
      TaskSpec t = instantiate_task(tmpl, seed, v);
      auto sol = find_solving_actions(t, 1, cfg.search_budget, seed);
      if (!sol.empty()) {
        out[i] = {std::move(t), sol.front()};
        return;
      }
    }
    throw GenerationExhausted("no solvable variant for " + task_id(tid, v));
  });
  return out;
}

}  // namespace pathforge
