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

// Scene and trajectory rasterization. Cell (row, col) covers the square whose
// center is ((col + 0.5) / W, 1 - (row + 0.5) / H): row 0 is the top (y = 1).
// A cell is set iff its center lies inside the shape.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pathforge/physics.hpp"

namespace pathforge {

inline constexpr int kDefaultResolution = 64;
inline constexpr int kSceneChannels = 5;

// H x W grid of values in [0, 1]; binary for ground truth, probabilities for
// predictions.
struct PathMap {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  PathMap() = default;
  PathMap(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0.0f) {}

  float& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  float at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
  std::size_t size() const { return data.size(); }

  double sum() const {
    double s = 0.0;
    for (float v : data) s += v;
    return s;
  }
  int popcount() const {
    int n = 0;
    for (float v : data) n += v > 0.5f;
    return n;
  }
  bool operator==(const PathMap&) const = default;
};

// Five binary channels in class order [Target, GoalDynamic, GoalStatic,
// GreyDynamic, BlackStatic].
struct SceneRaster {
  int resolution = 0;
  std::array<PathMap, kSceneChannels> channels;

  const PathMap& channel(BodyClass c) const { return channels[static_cast<int>(c)]; }
  bool operator==(const SceneRaster&) const = default;
};

inline void check_resolution(int resolution) {
  if (resolution < 2 || (resolution & (resolution - 1)) != 0)
    throw std::invalid_argument("resolution must be a power of two >= 2");
}

inline bool point_in_body(const Body& b, Vec2 p) {
  const Vec2 d = p - b.pos;
  if (auto* c = std::get_if<Circle>(&b.shape)) return dot(d, d) <= c->radius * c->radius;
  const auto& box = std::get<Box>(b.shape);
  const Vec2 local = Rot::from_angle(b.angle).apply_inv(d);
  return std::abs(local.x) <= box.half_w && std::abs(local.y) <= box.half_h;
}

inline Vec2 cell_center(int row, int col, int h, int w) {
  return {(col + 0.5) / w, 1.0 - (row + 0.5) / h};
}

// Calls fn(row, col) for every cell of an h x w grid covered by `b`, visiting
// only its bounding box.
template <class Fn>
void for_each_covered_cell(const Body& b, int h, int w, Fn&& fn) {
  Vec2 lo, hi;
  detail::bounding_box(b, lo, hi);
  const int c0 = std::max(0, static_cast<int>(std::floor(lo.x * w - 0.5)));
  const int c1 = std::min(w - 1, static_cast<int>(std::ceil(hi.x * w - 0.5)));
  const int r0 = std::max(0, static_cast<int>(std::floor((1.0 - hi.y) * h - 0.5)));
  const int r1 = std::min(h - 1, static_cast<int>(std::ceil((1.0 - lo.y) * h - 0.5)));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      if (point_in_body(b, cell_center(r, c, h, w))) fn(r, c);
}

inline void draw_body(PathMap& map, const Body& b) {
  for_each_covered_cell(b, map.height, map.width, [&](int r, int c) { map.at(r, c) = 1.0f; });
}

inline SceneRaster rasterize_scene(const Scene& scene, int resolution = kDefaultResolution) {
  check_resolution(resolution);
  SceneRaster out;
  out.resolution = resolution;
  for (auto& ch : out.channels) ch = PathMap(resolution, resolution);
  for (const auto& b : scene.bodies) {
    if (b.cls == BodyClass::Action) continue;
    draw_body(out.channels[static_cast<int>(b.cls)], b);
  }
  return out;
}

// Union of the body's footprint over every recorded frame.
inline PathMap rasterize_path(const Rollout& rollout, const Scene& initial, int body_id,
                              int resolution = kDefaultResolution) {
  check_resolution(resolution);
  const int idx = rollout.body_index(body_id);
  const Body* proto = initial.find(body_id);
  if (idx < 0 || proto == nullptr)
    throw std::invalid_argument("rasterize_path: body " + std::to_string(body_id) +
                                " not in rollout");
  if (rollout.frames.empty()) throw std::invalid_argument("rasterize_path: rollout has no frames");
  PathMap map(resolution, resolution);
  Body b = *proto;
  for (const auto& f : rollout.frames) {
    b.pos = f.poses[idx].pos;
    b.angle = f.poses[idx].angle;
    draw_body(map, b);
  }
  return map;
}

inline PathMap render_ball_map(const ActionVector& action, int resolution = kDefaultResolution) {
  check_resolution(resolution);
  PathMap map(resolution, resolution);
  draw_body(map, make_action_ball(action, 0));
  return map;
}

}  // namespace pathforge
