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

// Fixed-timestep 2D rigid body simulation for circles and oriented boxes.
//
// The solver is a small sequential-impulse scheme:
//   1. narrow phase on the pre-step poses (contacts sorted by body id pair)
//   2. gravity, then 8 velocity iterations with restitution and friction
//   3. position integration
//   4. Baumgarte-style positional projection against freshly detected contacts
//
// Everything runs in double precision on a single thread, so identical input
// bits produce identical output bits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pathforge {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
constexpr Vec2 cross(double w, Vec2 v) { return {-w * v.y, w * v.x}; }
inline double length(Vec2 v) { return std::sqrt(dot(v, v)); }

struct Rot {
  double c = 1.0;
  double s = 0.0;

  static Rot from_angle(double a) { return {std::cos(a), std::sin(a)}; }
  constexpr Vec2 apply(Vec2 v) const { return {c * v.x - s * v.y, s * v.x + c * v.y}; }
  constexpr Vec2 apply_inv(Vec2 v) const { return {c * v.x + s * v.y, -s * v.x + c * v.y}; }
};

// Channel order of the first five classes is the raster channel order.
enum class BodyClass : std::uint8_t {
  Target = 0,
  GoalDynamic = 1,
  GoalStatic = 2,
  GreyDynamic = 3,
  BlackStatic = 4,
  Action = 5,
};

inline constexpr bool class_is_static(BodyClass c) {
  return c == BodyClass::GoalStatic || c == BodyClass::BlackStatic;
}

inline const char* class_name(BodyClass c) {
  switch (c) {
    case BodyClass::Target: return "target";
    case BodyClass::GoalDynamic: return "goal_dynamic";
    case BodyClass::GoalStatic: return "goal_static";
    case BodyClass::GreyDynamic: return "grey_dynamic";
    case BodyClass::BlackStatic: return "black_static";
    case BodyClass::Action: return "action";
  }
  return "unknown";
}

inline std::optional<BodyClass> class_from_name(const std::string& name) {
  for (int i = 0; i <= 5; ++i) {
    auto c = static_cast<BodyClass>(i);
    if (name == class_name(c)) return c;
  }
  return std::nullopt;
}

struct Circle {
  double radius = 0.0;
  bool operator==(const Circle&) const = default;
};

struct Box {
  double half_w = 0.0;
  double half_h = 0.0;
  bool operator==(const Box&) const = default;
};

using Shape = std::variant<Circle, Box>;

struct Body {
  int id = 0;
  Shape shape = Circle{0.05};
  BodyClass cls = BodyClass::GreyDynamic;
  Vec2 pos;
  Vec2 vel;
  double angle = 0.0;
  double ang_vel = 0.0;
  bool is_static = false;
  double restitution = 0.2;
  double friction = 0.5;
  double density = 1.0;

  bool operator==(const Body&) const = default;

  bool is_circle() const { return std::holds_alternative<Circle>(shape); }

  double area() const {
    if (auto* c = std::get_if<Circle>(&shape)) return M_PI * c->radius * c->radius;
    const auto& b = std::get<Box>(shape);
    return 4.0 * b.half_w * b.half_h;
  }

  double mass() const { return is_static ? 0.0 : density * area(); }

  double inertia() const {
    if (is_static) return 0.0;
    double m = mass();
    if (auto* c = std::get_if<Circle>(&shape)) return 0.5 * m * c->radius * c->radius;
    const auto& b = std::get<Box>(shape);
    return m * (4.0 * b.half_w * b.half_w + 4.0 * b.half_h * b.half_h) / 12.0;
  }

  double inv_mass() const { return is_static ? 0.0 : 1.0 / mass(); }
  double inv_inertia() const { return is_static ? 0.0 : 1.0 / inertia(); }
};

// Conventional scene constants. Scenes span the unit square with y pointing up.
struct PhysicsParams {
  double dt = 1.0 / 60.0;
  int velocity_iterations = 8;
  int max_position_passes = 30;
  double baumgarte = 0.8;
  double slop = 1e-3;
  double max_correction = 0.1;
  // Approach speeds below this are treated as resting (no bounce).
  double restitution_threshold = 0.5;
};

inline constexpr double kDefaultGravity = -10.0;
inline constexpr int kGoalContactSteps = 180;  // 3 s at 60 Hz
inline constexpr int kDefaultMaxSteps = 1020;  // 17 s
inline constexpr double kActionRadiusMin = 0.02;
inline constexpr double kActionRadiusMax = 0.125;
inline constexpr double kWallThickness = 0.1;

struct Scene {
  std::vector<Body> bodies;
  double gravity = kDefaultGravity;  // along y
  bool walls = true;                 // static box walls just outside [0,1]^2

  bool operator==(const Scene&) const = default;

  const Body* find(int id) const {
    for (const auto& b : bodies)
      if (b.id == id) return &b;
    return nullptr;
  }
  Body* find(int id) {
    for (auto& b : bodies)
      if (b.id == id) return &b;
    return nullptr;
  }
  int index_of(int id) const {
    for (std::size_t i = 0; i < bodies.size(); ++i)
      if (bodies[i].id == id) return static_cast<int>(i);
    return -1;
  }
  int next_id() const {
    int m = -1;
    for (const auto& b : bodies) m = std::max(m, b.id);
    return m + 1;
  }
};

// Walls carry negative ids so they sort ahead of scene bodies.
inline std::array<Body, 4> make_walls() {
  const double t = kWallThickness;
  auto wall = [&](int id, Vec2 c, double hw, double hh) {
    Body b;
    b.id = id;
    b.shape = Box{hw, hh};
    b.cls = BodyClass::BlackStatic;
    b.pos = c;
    b.is_static = true;
    return b;
  };
  return {wall(-4, {0.5, -t / 2}, 0.5 + t, t / 2),      // floor
          wall(-3, {-t / 2, 0.5}, t / 2, 0.5 + t),      // left
          wall(-2, {1.0 + t / 2, 0.5}, t / 2, 0.5 + t), // right
          wall(-1, {0.5, 1.0 + t / 2}, 0.5 + t, t / 2)};// ceiling
}

// ---------------------------------------------------------------------------
// Narrow phase

struct ManifoldPoint {
  Vec2 point;  // world space, midway between the two surfaces
  double separation = 0.0;
};

struct Manifold {
  Vec2 normal;  // from body a towards body b
  int count = 0;
  std::array<ManifoldPoint, 2> points{};
};

namespace detail {

struct Poly {
  std::array<Vec2, 4> v;  // world-space vertices, CCW
  std::array<Vec2, 4> n;  // world-space outward normals, n[i] for edge v[i]->v[i+1]
};

inline Poly box_poly(const Body& b) {
  const auto& box = std::get<Box>(b.shape);
  Rot q = Rot::from_angle(b.angle);
  const double w = box.half_w, h = box.half_h;
  const std::array<Vec2, 4> lv{Vec2{-w, -h}, Vec2{w, -h}, Vec2{w, h}, Vec2{-w, h}};
  const std::array<Vec2, 4> ln{Vec2{0, -1}, Vec2{1, 0}, Vec2{0, 1}, Vec2{-1, 0}};
  Poly p;
  for (int i = 0; i < 4; ++i) {
    p.v[i] = b.pos + q.apply(lv[i]);
    p.n[i] = q.apply(ln[i]);
  }
  return p;
}

inline void bounding_box(const Body& b, Vec2& lo, Vec2& hi) {
  if (auto* c = std::get_if<Circle>(&b.shape)) {
    lo = b.pos - Vec2{c->radius, c->radius};
    hi = b.pos + Vec2{c->radius, c->radius};
    return;
  }
  const auto& box = std::get<Box>(b.shape);
  const double c = std::abs(std::cos(b.angle)), s = std::abs(std::sin(b.angle));
  const Vec2 e{c * box.half_w + s * box.half_h, s * box.half_w + c * box.half_h};
  lo = b.pos - e;
  hi = b.pos + e;
}

inline std::optional<Manifold> circle_circle(const Body& a, const Body& b, double margin) {
  const double ra = std::get<Circle>(a.shape).radius;
  const double rb = std::get<Circle>(b.shape).radius;
  const Vec2 d = b.pos - a.pos;
  const double dist = length(d);
  const double sep = dist - ra - rb;
  if (sep > margin) return std::nullopt;
  Manifold m;
  // Coincident centers: push along +y.
  m.normal = dist > 1e-12 ? d * (1.0 / dist) : Vec2{0.0, 1.0};
  m.count = 1;
  m.points[0] = {a.pos + m.normal * (ra + 0.5 * sep), sep};
  return m;
}

// Box a against circle b; normal points from the box to the circle.
inline std::optional<Manifold> box_circle(const Body& a, const Body& b, double margin) {
  const double r = std::get<Circle>(b.shape).radius;
  const Poly p = box_poly(a);
  const Vec2 c = b.pos;

  int face = 0;
  double best = -1e300;
  for (int i = 0; i < 4; ++i) {
    const double s = dot(p.n[i], c - p.v[i]);
    if (s > best) {
      best = s;
      face = i;
    }
  }
  if (best - r > margin) return std::nullopt;

  Manifold m;
  m.count = 1;
  const Vec2 v1 = p.v[face];
  const Vec2 v2 = p.v[(face + 1) % 4];
  if (best < 1e-12) {
    // Center inside the box: least-penetration face.
    m.normal = p.n[face];
    const double sep = best - r;
    m.points[0] = {c - m.normal * (r + 0.5 * sep), sep};
    return m;
  }
  const double u1 = dot(c - v1, v2 - v1);
  const double u2 = dot(c - v2, v1 - v2);
  auto vertex_contact = [&](Vec2 v) -> std::optional<Manifold> {
    const Vec2 d = c - v;
    const double dist = length(d);
    const double sep = dist - r;
    if (sep > margin) return std::nullopt;
    m.normal = dist > 1e-12 ? d * (1.0 / dist) : p.n[face];
    m.points[0] = {c - m.normal * (r + 0.5 * sep), sep};
    return m;
  };
  if (u1 <= 0.0) return vertex_contact(v1);
  if (u2 <= 0.0) return vertex_contact(v2);
  m.normal = p.n[face];
  const double sep = best - r;
  m.points[0] = {c - m.normal * (r + 0.5 * sep), sep};
  return m;
}

// Largest separation of poly b along the face normals of poly a.
inline double max_separation(const Poly& a, const Poly& b, int& edge) {
  double best = -1e300;
  edge = 0;
  for (int i = 0; i < 4; ++i) {
    double si = 1e300;
    for (int j = 0; j < 4; ++j) si = std::min(si, dot(a.n[i], b.v[j] - a.v[i]));
    if (si > best) {
      best = si;
      edge = i;
    }
  }
  return best;
}

struct ClipVertex {
  Vec2 v;
};

// Sutherland-Hodgman clip of a segment against the half plane dot(n, x) <= offset.
inline int clip_segment(const std::array<ClipVertex, 2>& in, std::array<ClipVertex, 2>& out,
                        Vec2 n, double offset) {
  int count = 0;
  const double d0 = dot(n, in[0].v) - offset;
  const double d1 = dot(n, in[1].v) - offset;
  if (d0 <= 0.0) out[count++] = in[0];
  if (d1 <= 0.0) out[count++] = in[1];
  if (d0 * d1 < 0.0) {
    const double t = d0 / (d0 - d1);
    out[count++] = {in[0].v + (in[1].v - in[0].v) * t};
  }
  return count;
}

inline std::optional<Manifold> box_box(const Body& a, const Body& b, double margin) {
  const Poly pa = box_poly(a);
  const Poly pb = box_poly(b);
  int edge_a = 0, edge_b = 0;
  const double sep_a = max_separation(pa, pb, edge_a);
  if (sep_a > margin) return std::nullopt;
  const double sep_b = max_separation(pb, pa, edge_b);
  if (sep_b > margin) return std::nullopt;

  // Prefer a as the reference unless b's axis is clearly better.
  const bool flip = sep_b > sep_a + 0.1 * 1e-3;
  const Poly& ref = flip ? pb : pa;
  const Poly& inc = flip ? pa : pb;
  const int ref_edge = flip ? edge_b : edge_a;
  const Vec2 n = ref.n[ref_edge];

  int inc_edge = 0;
  double min_dot = 1e300;
  for (int i = 0; i < 4; ++i) {
    const double d = dot(n, inc.n[i]);
    if (d < min_dot) {
      min_dot = d;
      inc_edge = i;
    }
  }
  std::array<ClipVertex, 2> incident{ClipVertex{inc.v[inc_edge]},
                                     ClipVertex{inc.v[(inc_edge + 1) % 4]}};

  const Vec2 v1 = ref.v[ref_edge];
  const Vec2 v2 = ref.v[(ref_edge + 1) % 4];
  Vec2 tangent = v2 - v1;
  tangent = tangent * (1.0 / length(tangent));

  std::array<ClipVertex, 2> clip1{}, clip2{};
  if (clip_segment(incident, clip1, -tangent, -dot(tangent, v1)) < 2) return std::nullopt;
  if (clip_segment(clip1, clip2, tangent, dot(tangent, v2)) < 2) return std::nullopt;

  Manifold m;
  m.normal = flip ? -n : n;
  const double front = dot(n, v1);
  for (const auto& cv : clip2) {
    const double sep = dot(n, cv.v) - front;
    if (sep <= margin) m.points[m.count++] = {cv.v - n * (0.5 * sep), sep};
  }
  if (m.count == 0) return std::nullopt;
  return m;
}

}  // namespace detail

// Contact manifold between two bodies, or nothing when they are farther apart
// than `margin`. The normal points from `a` to `b`.
inline std::optional<Manifold> collide(const Body& a, const Body& b, double margin) {
  Vec2 alo, ahi, blo, bhi;
  detail::bounding_box(a, alo, ahi);
  detail::bounding_box(b, blo, bhi);
  if (alo.x > bhi.x + margin || blo.x > ahi.x + margin || alo.y > bhi.y + margin ||
      blo.y > ahi.y + margin)
    return std::nullopt;

  const bool ca = a.is_circle(), cb = b.is_circle();
  if (ca && cb) return detail::circle_circle(a, b, margin);
  if (!ca && cb) return detail::box_circle(a, b, margin);
  if (ca && !cb) {
    auto m = detail::box_circle(b, a, margin);
    if (m) m->normal = -m->normal;
    return m;
  }
  return detail::box_box(a, b, margin);
}

inline double min_separation(const Manifold& m) {
  double s = m.points[0].separation;
  for (int i = 1; i < m.count; ++i) s = std::min(s, m.points[i].separation);
  return s;
}

// ---------------------------------------------------------------------------
// Stepping

struct ContactPair {
  int a = 0;  // indices into the working body array
  int b = 0;
  Manifold manifold;
};

namespace detail {

// Bodies of the scene plus walls, ordered by id.
struct WorkingSet {
  std::vector<Body> bodies;
  std::vector<int> scene_index;  // -1 for walls
};

inline WorkingSet make_working_set(const Scene& scene) {
  WorkingSet ws;
  if (scene.walls)
    for (const auto& w : make_walls()) {
      ws.bodies.push_back(w);
      ws.scene_index.push_back(-1);
    }
  std::vector<int> order(scene.bodies.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int l, int r) { return scene.bodies[l].id < scene.bodies[r].id; });
  for (int i : order) {
    ws.bodies.push_back(scene.bodies[i]);
    ws.scene_index.push_back(i);
  }
  return ws;
}

// Pairs come out in ascending (min id, max id) order because bodies are id-sorted.
inline std::vector<ContactPair> find_contacts(const std::vector<Body>& bodies, double margin) {
  std::vector<ContactPair> out;
  const int n = static_cast<int>(bodies.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (bodies[i].is_static && bodies[j].is_static) continue;
      if (auto m = collide(bodies[i], bodies[j], margin)) out.push_back({i, j, *m});
    }
  return out;
}

struct VelocityPoint {
  Vec2 ra, rb;
  double normal_mass = 0.0;
  double tangent_mass = 0.0;
  double bias = 0.0;
  double normal_impulse = 0.0;
  double tangent_impulse = 0.0;
};

struct VelocityConstraint {
  int a = 0, b = 0;
  Vec2 normal;
  double friction = 0.0;
  int count = 0;
  std::array<VelocityPoint, 2> points{};
};

inline void solve_velocities(std::vector<Body>& bodies, const std::vector<ContactPair>& contacts,
                             double gravity, const PhysicsParams& p) {
  std::vector<VelocityConstraint> cs;
  cs.reserve(contacts.size());
  for (const auto& c : contacts) {
    const Body& A = bodies[c.a];
    const Body& B = bodies[c.b];
    VelocityConstraint vc;
    vc.a = c.a;
    vc.b = c.b;
    vc.normal = c.manifold.normal;
    vc.friction = std::sqrt(A.friction * B.friction);
    const double e = std::max(A.restitution, B.restitution);
    const double ima = A.inv_mass(), imb = B.inv_mass();
    const double iia = A.inv_inertia(), iib = B.inv_inertia();
    const Vec2 n = vc.normal;
    const Vec2 t{n.y, -n.x};
    vc.count = c.manifold.count;
    for (int k = 0; k < vc.count; ++k) {
      const auto& mp = c.manifold.points[k];
      VelocityPoint& vp = vc.points[k];
      vp.ra = mp.point - A.pos;
      vp.rb = mp.point - B.pos;
      const double rna = cross(vp.ra, n), rnb = cross(vp.rb, n);
      const double kn = ima + imb + iia * rna * rna + iib * rnb * rnb;
      vp.normal_mass = kn > 0.0 ? 1.0 / kn : 0.0;
      const double rta = cross(vp.ra, t), rtb = cross(vp.rb, t);
      const double kt = ima + imb + iia * rta * rta + iib * rtb * rtb;
      vp.tangent_mass = kt > 0.0 ? 1.0 / kt : 0.0;
      // Restitution uses the approach speed from before this step's gravity
      // and removes half a step of relative gravity, which keeps rebound
      // heights on the e^2 law under semi-implicit integration.
      const Vec2 dv = B.vel + cross(B.ang_vel, vp.rb) - A.vel - cross(A.ang_vel, vp.ra);
      const double vn = dot(dv, n);
      const double gn = (B.is_static ? 0.0 : gravity) - (A.is_static ? 0.0 : gravity);
      const double vn_pre = vn - gn * n.y * p.dt;
      if (vn_pre < -p.restitution_threshold)
        vp.bias = std::max(-e * vn_pre + 0.5 * gn * n.y * p.dt, 0.0);
      else if (mp.separation > 0.0)
        vp.bias = -mp.separation / p.dt;
    }
    cs.push_back(vc);
  }

  for (int it = 0; it < p.velocity_iterations; ++it) {
    for (auto& vc : cs) {
      Body& A = bodies[vc.a];
      Body& B = bodies[vc.b];
      const double ima = A.inv_mass(), imb = B.inv_mass();
      const double iia = A.inv_inertia(), iib = B.inv_inertia();
      const Vec2 n = vc.normal;
      const Vec2 t{n.y, -n.x};
      for (int k = 0; k < vc.count; ++k) {
        VelocityPoint& vp = vc.points[k];
        // Friction first, bounded by the current normal impulse.
        {
          const Vec2 dv = B.vel + cross(B.ang_vel, vp.rb) - A.vel - cross(A.ang_vel, vp.ra);
          const double vt = dot(dv, t);
          double lambda = -vp.tangent_mass * vt;
          const double max_f = vc.friction * vp.normal_impulse;
          const double next = std::clamp(vp.tangent_impulse + lambda, -max_f, max_f);
          lambda = next - vp.tangent_impulse;
          vp.tangent_impulse = next;
          const Vec2 P = t * lambda;
          A.vel -= P * ima;
          A.ang_vel -= iia * cross(vp.ra, P);
          B.vel += P * imb;
          B.ang_vel += iib * cross(vp.rb, P);
        }
        {
          const Vec2 dv = B.vel + cross(B.ang_vel, vp.rb) - A.vel - cross(A.ang_vel, vp.ra);
          const double vn = dot(dv, n);
          double lambda = -vp.normal_mass * (vn - vp.bias);
          const double next = std::max(vp.normal_impulse + lambda, 0.0);
          lambda = next - vp.normal_impulse;
          vp.normal_impulse = next;
          const Vec2 P = n * lambda;
          A.vel -= P * ima;
          A.ang_vel -= iia * cross(vp.ra, P);
          B.vel += P * imb;
          B.ang_vel += iib * cross(vp.rb, P);
        }
      }
    }
  }
}

inline void correct_positions(std::vector<Body>& bodies, const PhysicsParams& p) {
  for (int pass = 0; pass < p.max_position_passes; ++pass) {
    const auto contacts = find_contacts(bodies, p.slop);
    double worst = 0.0;
    for (const auto& c : contacts) worst = std::min(worst, min_separation(c.manifold));
    if (worst >= -1.5 * p.slop) return;

    for (const auto& c : contacts) {
      Body& A = bodies[c.a];
      Body& B = bodies[c.b];
      // Earlier pairs in this pass may have moved A or B.
      const auto fresh = collide(A, B, p.slop);
      if (!fresh) continue;
      const double ima = A.inv_mass(), imb = B.inv_mass();
      const double iia = A.inv_inertia(), iib = B.inv_inertia();
      const Vec2 n = fresh->normal;
      for (int k = 0; k < fresh->count; ++k) {
        const auto& mp = fresh->points[k];
        const double C =
            std::clamp(p.baumgarte * (mp.separation + p.slop), -p.max_correction, 0.0);
        if (C >= 0.0) continue;
        const Vec2 ra = mp.point - A.pos;
        const Vec2 rb = mp.point - B.pos;
        const double rna = cross(ra, n), rnb = cross(rb, n);
        const double K = ima + imb + iia * rna * rna + iib * rnb * rnb;
        if (K <= 0.0) continue;
        const Vec2 P = n * (-C / K);
        A.pos -= P * ima;
        A.angle -= iia * cross(ra, P);
        B.pos += P * imb;
        B.angle += iib * cross(rb, P);
      }
    }
  }
}

}  // namespace detail

// Advances the scene by one step. Returns the contacts detected on the
// pre-step poses (ids, not indices) so callers can track touching pairs.
inline std::vector<std::pair<int, int>> step_in_place(Scene& scene, double dt,
                                                      const PhysicsParams& params = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  PhysicsParams p = params;
  p.dt = dt;

  auto ws = detail::make_working_set(scene);
  auto& bodies = ws.bodies;

  const auto contacts = detail::find_contacts(bodies, p.slop);
  std::vector<std::pair<int, int>> touching;
  touching.reserve(contacts.size());
  for (const auto& c : contacts) touching.emplace_back(bodies[c.a].id, bodies[c.b].id);

  for (auto& b : bodies)
    if (!b.is_static) b.vel.y += scene.gravity * dt;

  detail::solve_velocities(bodies, contacts, scene.gravity, p);

  for (auto& b : bodies) {
    if (b.is_static) continue;
    b.pos += b.vel * dt;
    b.angle += b.ang_vel * dt;
  }

  detail::correct_positions(bodies, p);

  for (std::size_t i = 0; i < bodies.size(); ++i)
    if (ws.scene_index[i] >= 0) scene.bodies[ws.scene_index[i]] = bodies[i];
  return touching;
}

inline Scene step(Scene scene, double dt, const PhysicsParams& params = {}) {
  step_in_place(scene, dt, params);
  return scene;
}

// ---------------------------------------------------------------------------
// Rollouts and the goal condition

struct Pose {
  Vec2 pos;
  double angle = 0.0;
  bool operator==(const Pose&) const = default;
};

struct Frame {
  int step = 0;  // number of steps simulated before this frame was taken
  std::vector<Pose> poses;  // parallel to Rollout::body_ids
  bool operator==(const Frame&) const = default;
};

struct Rollout {
  std::vector<int> body_ids;
  std::vector<Frame> frames;
  bool solved = false;
  std::optional<int> solve_step;
  int n_steps = 0;

  int body_index(int id) const {
    for (std::size_t i = 0; i < body_ids.size(); ++i)
      if (body_ids[i] == id) return static_cast<int>(i);
    return -1;
  }
};

// True iff the history contains a run of kGoalContactSteps consecutive contacts.
inline bool goal_satisfied(std::span<const bool> contact_history,
                           int required = kGoalContactSteps) {
  int run = 0;
  for (bool c : contact_history) {
    run = c ? run + 1 : 0;
    if (run >= required) return true;
  }
  return false;
}

inline std::optional<int> find_body(const Scene& scene, BodyClass cls) {
  for (const auto& b : scene.bodies)
    if (b.cls == cls) return b.id;
  return std::nullopt;
}

inline std::optional<int> find_goal(const Scene& scene) {
  for (const auto& b : scene.bodies)
    if (b.cls == BodyClass::GoalDynamic || b.cls == BodyClass::GoalStatic) return b.id;
  return std::nullopt;
}

namespace detail {
inline Frame snapshot(const Scene& s, int step) {
  Frame f;
  f.step = step;
  f.poses.reserve(s.bodies.size());
  for (const auto& b : s.bodies) f.poses.push_back({b.pos, b.angle});
  return f;
}
}  // namespace detail

// Steps until the target has touched the goal for kGoalContactSteps
// consecutive steps, or max_steps is reached. The contact flag of step k is
// taken from the contacts detected at the start of step k.
inline Rollout simulate_rollout(Scene scene, int max_steps = kDefaultMaxSteps,
                                int frame_stride = 3, const PhysicsParams& params = {}) {
  if (max_steps < 1) throw std::invalid_argument("simulate_rollout: max_steps must be >= 1");
  if (frame_stride < 1) throw std::invalid_argument("simulate_rollout: frame_stride must be >= 1");
  const auto target = find_body(scene, BodyClass::Target);
  const auto goal = find_goal(scene);
  const int lo = target && goal ? std::min(*target, *goal) : 0;
  const int hi = target && goal ? std::max(*target, *goal) : 0;

  Rollout r;
  for (const auto& b : scene.bodies) r.body_ids.push_back(b.id);
  r.frames.push_back(detail::snapshot(scene, 0));

  int run = 0;
  int k = 0;
  for (; k < max_steps; ++k) {
    const auto touching = step_in_place(scene, params.dt, params);
    bool contact = false;
    if (target && goal)
      for (const auto& [a, b] : touching)
        if (a == lo && b == hi) contact = true;
    run = contact ? run + 1 : 0;
    const bool last = run >= kGoalContactSteps || k + 1 == max_steps;
    if ((k + 1) % frame_stride == 0 || last) r.frames.push_back(detail::snapshot(scene, k + 1));
    if (run >= kGoalContactSteps) {
      r.solved = true;
      r.solve_step = k;
      ++k;
      break;
    }
  }
  r.n_steps = k;
  return r;
}

// ---------------------------------------------------------------------------
// Action placement

struct ActionVector {
  double x = 0.0;
  double y = 0.0;
  double r = 0.0;
  bool operator==(const ActionVector&) const = default;
};

inline bool action_in_range(const ActionVector& a) {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  return ok(a.x) && ok(a.y) && ok(a.r);
}

inline double action_radius(double r) {
  return kActionRadiusMin + r * (kActionRadiusMax - kActionRadiusMin);
}

inline Body make_action_ball(const ActionVector& a, int id) {
  Body b;
  b.id = id;
  b.shape = Circle{action_radius(a.r)};
  b.cls = BodyClass::Action;
  b.pos = {a.x, a.y};
  return b;
}

// Adds the action ball, or returns nothing if the disc leaves the unit square
// or overlaps an existing body.
inline std::optional<Scene> place_action_ball(const Scene& scene, const ActionVector& action) {
  if (!action_in_range(action))
    throw std::invalid_argument("place_action_ball: action outside [0,1]^3");
  const Body ball = make_action_ball(action, scene.next_id());
  const double rad = action_radius(action.r);
  if (action.x - rad < 0.0 || action.x + rad > 1.0 || action.y - rad < 0.0 ||
      action.y + rad > 1.0)
    return std::nullopt;
  for (const auto& b : scene.bodies)
    if (auto m = collide(b, ball, 0.0); m && min_separation(*m) < 0.0) return std::nullopt;
  Scene out = scene;
  out.bodies.push_back(ball);
  return out;
}

// Deepest penetration over all touching pairs, reported as a positive depth.
inline double max_penetration(const Scene& scene) {
  auto ws = detail::make_working_set(scene);
  double worst = 0.0;
  for (const auto& c : detail::find_contacts(ws.bodies, 0.0))
    worst = std::max(worst, -min_separation(c.manifold));
  return worst;
}

}  // namespace pathforge
