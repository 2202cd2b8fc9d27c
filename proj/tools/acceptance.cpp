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


// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. The fast set runs by default; --e2e runs the
// desk-scale generate/train/evaluate experiment.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "pathforge/io.hpp"
#include "pathforge/json_io.hpp"
#include "pathforge/nn/gradcheck.hpp"

namespace pf = pathforge;
namespace nn = pathforge::nn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void progress(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

struct Result {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

// ---------------------------------------------------------------------------
// Physics

pf::Body make_ball(int id, pf::Vec2 pos, double r, pf::BodyClass cls = pf::BodyClass::GreyDynamic) {
  pf::Body b;
  b.id = id;
  b.shape = pf::Circle{r};
  b.cls = cls;
  b.pos = pos;
  b.is_static = pf::class_is_static(cls);
  return b;
}

Result physics_determinism() {
  const auto t0 = Clock::now();
  Result res;
  int compared = 0;
  for (int i = 0; i < 100; ++i) {
    const auto task = pf::instantiate_task(pf::get_template(i % 10), 9000 + i, i);
    pf::CounterRng rng(i);
    pf::Scene scene = task.scene;
    for (int k = 0; k < 50; ++k) {
      if (auto placed = pf::place_action_ball(task.scene, {rng.uniform(), rng.uniform(),
                                                           rng.uniform()})) {
        scene = *placed;
        break;
      }
    }
    const auto a = pf::simulate_rollout(scene, pf::kDefaultMaxSteps, 1);
    const auto b = pf::simulate_rollout(scene, pf::kDefaultMaxSteps, 1);
    res.require(a.frames == b.frames && a.solved == b.solved, "task " + std::to_string(i));
    ++compared;
  }
  const double secs = seconds_since(t0);
  res.require(secs < 30.0, fmt("runtime %.1f s >= 30 s", secs));
  res.detail = fmt("%d tasks x 2 rollouts bit-identical, %.1f s", compared, secs) +
               (res.detail.empty() ? "" : " | " + res.detail);
  return res;
}

Result physics_correctness() {
  Result res;
  constexpr double dt = 1.0 / 60.0;
  double ff_err = 0.0;
  {
    pf::Scene s;
    s.walls = false;
    s.bodies = {make_ball(0, {0.5, 0.5}, 0.05)};
    for (int n = 1; n <= 100; ++n) {
      pf::step_in_place(s, dt);
      const double expected = 0.5 + s.gravity * dt * dt * n * (n + 1) / 2.0;
      ff_err = std::max(ff_err, std::abs(s.bodies[0].pos.y - expected));
    }
  }
  res.require(ff_err <= 1e-9, fmt("free fall error %.3g", ff_err));

  std::string apex_detail;
  for (double e : {0.3, 0.5, 0.8}) {
    pf::Scene s;
    const double r = 0.03, h = 0.5;
    pf::Body b = make_ball(0, {0.5, h + r}, r);
    b.restitution = e;
    s.bodies = {b};
    double apex = 0.0, prev_vy = 0.0;
    bool bounced = false;
    for (int i = 0; i < 200; ++i) {
      pf::step_in_place(s, dt);
      const pf::Body& cur = s.bodies[0];
      if (prev_vy < 0.0 && cur.vel.y > 0.0) bounced = true;
      if (bounced) apex = std::max(apex, cur.pos.y - r);
      if (bounced && cur.vel.y < 0.0) break;
      prev_vy = cur.vel.y;
    }
    const double ratio = apex / (e * e * h);
    apex_detail += fmt(" e=%.1f:%.3f", e, ratio);
    res.require(bounced && ratio <= 1.02, fmt("apex/e^2h = %.4f at e=%.1f", ratio, e));
  }

  pf::Scene s;
  s.walls = false;
  s.gravity = 0.0;
  pf::Body a = make_ball(0, {0.45, 0.5}, 0.05), b = make_ball(1, {0.55, 0.5}, 0.05);
  a.vel = {1.5, 0.0};
  b.vel = {-1.5, 0.0};
  a.restitution = b.restitution = 1.0;
  a.friction = b.friction = 0.0;
  s.bodies = {a, b};
  pf::step_in_place(s, dt);
  const double swap_err =
      std::max(std::abs(s.bodies[0].vel.x + 1.5), std::abs(s.bodies[1].vel.x - 1.5));
  res.require(swap_err <= 1e-6, fmt("elastic swap error %.3g", swap_err));
  res.detail = fmt("free fall %.2g, swap %.2g, apex ratio", ff_err, swap_err) + apex_detail +
               (res.pass ? "" : " | " + res.detail);
  return res;
}

// ---------------------------------------------------------------------------
// Networks

nn::Tensor<double> random_tensor(nn::Shape s, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  nn::Tensor<double> t(std::move(s));
  for (auto& x : t.data) x = u(rng);
  return t;
}

Result gradient_suite() {
  const auto t0 = Clock::now();
  Result res;
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> small(1, 3);
  double worst = 0.0;
  int shapes = 0;
  auto record = [&](const char* op, const nn::Shape& s, double e) {
    ++shapes;
    worst = std::max(worst, e);
    if (!(e < 1e-4)) res.require(false, fmt("%s %s rel err %.3g", op, nn::shape_str(s).c_str(), e));
  };
  using Ids = std::vector<int>;
  for (int trial = 0; trial < 5; ++trial) {
    const int n = small(rng), cin = small(rng), cout = small(rng), h = 2 * small(rng) + 2 * trial;
    const nn::Shape xs{n, cin, h, h};
    auto c1 = random_tensor({n, cout, h / 2, h / 2}, rng);
    record("conv", xs,
           nn::gradcheck({random_tensor(xs, rng), random_tensor({cout, cin, 4, 4}, rng),
                          random_tensor({cout}, rng)},
                         [&](nn::Graph<double>& g, const Ids& in) {
                           return g.dot(g.conv(in[0], in[1], in[2]), c1);
                         }));
    auto c2 = random_tensor({n, cout, 2 * h, 2 * h}, rng);
    record("deconv", xs,
           nn::gradcheck({random_tensor(xs, rng), random_tensor({cin, cout, 4, 4}, rng),
                          random_tensor({cout}, rng)},
                         [&](nn::Graph<double>& g, const Ids& in) {
                           return g.dot(g.deconv(in[0], in[1], in[2]), c2);
                         }));
    const nn::Shape s{n, cin, h + 1, h + 3};
    auto c = random_tensor(s, rng);
    auto x = random_tensor(s, rng, 0.05, 1.0);
    for (std::size_t i = 0; i < x.size(); i += 2) x.data[i] = -x.data[i];
    record("relu", s, nn::gradcheck({x}, [&](nn::Graph<double>& g, const Ids& in) {
             return g.dot(g.relu(in[0]), c);
           }));
    record("sigmoid", s,
           nn::gradcheck({random_tensor(s, rng, -4, 4)}, [&](nn::Graph<double>& g, const Ids& in) {
             return g.dot(g.sigmoid(in[0]), c);
           }));
    auto t = random_tensor(s, rng, 0, 1);
    for (auto& v : t.data) v = v > 0.5 ? 1.0 : 0.0;
    record("pixel-bce", s,
           nn::gradcheck({random_tensor(s, rng, 0.05, 0.95)},
                         [&](nn::Graph<double>& g, const Ids& in) { return g.bce(in[0], t); },
                         1e-5));
  }
  const double secs = seconds_since(t0);
  res.require(shapes >= 20, fmt("only %d shapes", shapes));
  res.require(secs < 60.0, fmt("runtime %.1f s >= 60 s", secs));
  res.detail = fmt("%d shapes, worst relative error %.2e, %.1f s", shapes, worst, secs) +
               (res.pass ? "" : " | " + res.detail);
  return res;
}

pf::SceneRaster random_scene(int res, std::uint64_t seed) {
  pf::CounterRng rng(seed);
  pf::SceneRaster s;
  s.resolution = res;
  for (auto& c : s.channels) {
    c = pf::PathMap(res, res);
    for (auto& v : c.data) v = rng.uniform() < 0.2 ? 1.0f : 0.0f;
  }
  return s;
}

pf::PathMap random_binary_map(int res, pf::CounterRng& rng) {
  pf::PathMap m(res, res);
  for (auto& v : m.data) v = rng.uniform() < 0.1 ? 1.0f : 0.0f;
  return m;
}

Result architecture() {
  Result res;
  constexpr int H = 64;
  pf::Model m(pf::ModelConfig{H, 16, 7});
  int layers = 0;
  for (auto* net : m.nets()) {
    nn::Graph<float> g(false);
    const int x = g.input(nn::Tensor<float>({1, net->in_channels(), H, H}, 0.5f));
    const int y = net->forward(g, x);
    res.require(g.value(y).shape == nn::Shape({1, 1, H, H}), "output shape " +
                                                                 nn::shape_str(g.value(y).shape));
    bool bottleneck = false;
    for (std::size_t i = 0; i < g.size(); ++i)
      bottleneck = bottleneck || g.value(static_cast<int>(i)).shape == nn::Shape{1, 256, 1, 1};
    res.require(bottleneck, "no (256,1,1) encoding");
    // Each down layer halves, each up layer doubles.
    int side = H;
    for (const auto& l : net->down()) {
      res.require(l.weight.value.dim(2) == 4 && l.weight.value.dim(3) == 4, "down kernel not 4x4");
      side /= 2;
      ++layers;
    }
    res.require(side == 1, "down stack does not reach 1x1");
    for (const auto& l : net->up()) {
      res.require(l.weight.value.dim(2) == 4 && l.weight.value.dim(3) == 4, "up kernel not 4x4");
      side *= 2;
      ++layers;
    }
    res.require(side == H, "up stack does not restore H");
  }
  res.require(nn::kKernel == 4 && nn::kStride == 2 && nn::kPad == 1, "conv geometry not 4/2/1");

  const auto p = pf::predict(m, random_scene(H, 3));
  float lo = 1.0f, hi = 0.0f;
  for (const pf::PathMap* map : {&p.base, &p.target, &p.action, &p.placement})
    for (float v : map->data) lo = std::min(lo, v), hi = std::max(hi, v);
  res.require(lo > 0.0f && hi < 1.0f, fmt("outputs span [%g, %g]", lo, hi));

  // Action and placement losses only; gradient must still reach the base net.
  pf::CounterRng rng(11);
  std::vector<pf::SceneRaster> scenes{random_scene(H, 1), random_scene(H, 2)};
  std::vector<pf::PathMap> act{random_binary_map(H, rng), random_binary_map(H, rng)};
  std::vector<pf::PathMap> place{random_binary_map(H, rng), random_binary_map(H, rng)};
  nn::Graph<float> g;
  std::vector<const pf::SceneRaster*> sp{&scenes[0], &scenes[1]};
  const auto n = pf::forward_pipeline(m, g, g.input(pf::scene_tensor<float>(sp)));
  std::vector<const pf::PathMap*> ap{&act[0], &act[1]}, pp{&place[0], &place[1]};
  const int la = g.bce(n.action, pf::map_tensor<float>(ap));
  const int lp = g.bce(n.placement, pf::map_tensor<float>(pp));
  m.zero_grad();
  g.backward(g.weighted_sum({{la, 1.0f}, {lp, 1.0f}}));
  double norm = 0.0;
  for (auto* prm : m.base.parameters())
    for (float v : prm->grad.data) norm += double(v) * v;
  res.require(norm > 0.0, "d(L_act + L_place)/d(base) is zero");
  res.detail = fmt("4 nets, %d 4/2/1 layers, (256,1,1) bottleneck, outputs in [%.2g, %.2g], "
                   "|grad base| = %.3g",
                   layers, lo, hi, std::sqrt(norm)) +
               (res.pass ? "" : " | " + res.detail);
  return res;
}

// ---------------------------------------------------------------------------
// Metric

pf::AttemptRecord record_at(std::optional<int> k) {
  pf::AttemptRecord r;
  r.task_id = "00000:000";
  r.attempts.resize(k.value_or(pf::kMaxAttempts));
  if (k) r.attempts.back().solved = true;
  r.first_solve_attempt = k;
  return r;
}

// Recomputes s_k from the records for every k.
double auccess_oracle(const std::vector<pf::AttemptRecord>& recs) {
  double num = 0, den = 0;
  for (int k = 1; k <= 100; ++k) {
    int solved = 0;
    for (const auto& r : recs) solved += r.first_solve_attempt && *r.first_solve_attempt <= k;
    const double w = std::log(k + 1.0) - std::log(static_cast<double>(k));
    num += w * solved / recs.size();
    den += w;
  }
  return 100 * num / den;
}

Result auccess_checks() {
  Result res;
  const double all1 = pf::auccess(std::vector<pf::AttemptRecord>(7, record_at(1)));
  const double never = pf::auccess(std::vector<pf::AttemptRecord>(7, record_at(std::nullopt)));
  const std::vector<pf::AttemptRecord> fifty{record_at(50)};
  const double at50 = pf::auccess(fifty), oracle50 = auccess_oracle(fifty);
  res.require(std::abs(all1 - 100.0) < 1e-9, fmt("all-at-1 = %.6f", all1));
  res.require(std::abs(never) < 1e-9, fmt("never = %.6f", never));
  res.require(std::abs(at50 - 15.235) <= 1e-3 && std::abs(oracle50 - 15.235) <= 1e-3,
              fmt("solved-at-50 = %.5f (oracle %.5f)", at50, oracle50));

  pf::CounterRng rng(42);
  int monotone = 0;
  double worst_oracle = 0.0;
  for (int set = 0; set < 100; ++set) {
    std::vector<pf::AttemptRecord> recs;
    const int n = rng.uniform_int(1, 30);
    for (int i = 0; i < n; ++i)
      recs.push_back(rng.uniform() < 0.3 ? record_at(std::nullopt)
                                         : record_at(rng.uniform_int(1, pf::kMaxAttempts)));
    const double before = pf::auccess(recs);
    worst_oracle = std::max(worst_oracle, std::abs(before - auccess_oracle(recs)));
    auto& r = recs[rng.uniform_int(0, n - 1)];
    const int k = r.first_solve_attempt.value_or(pf::kMaxAttempts + 1);
    if (k > 1) r = record_at(rng.uniform_int(1, k - 1));
    monotone += pf::auccess(recs) >= before;
  }
  res.require(monotone == 100, fmt("%d/100 sets monotone", monotone));
  res.require(worst_oracle < 1e-9, fmt("oracle mismatch %.3g", worst_oracle));
  res.detail = fmt("1->%.3f, never->%.3f, at-50->%.4f (oracle %.4f), %d/100 monotone", all1,
                   never, at50, oracle50, monotone) +
               (res.pass ? "" : " | " + res.detail);
  return res;
}

// ---------------------------------------------------------------------------
// Action synthesis

// Rounds used for the exact-disc recovery check; the solver default stays at
// pf::kRefineUpdates.
constexpr int kRecoveryRounds = 200;

Result action_synthesis() {
  Result res;
  constexpr int H = 64;
  pf::CounterRng rng(77);
  int decreased = 0;
  for (int i = 0; i < 1000; ++i) {
    pf::PathMap m(H, H);
    const double density = rng.uniform(0.02, 0.3);
    for (auto& v : m.data) v = static_cast<float>(rng.uniform() < density ? rng.uniform() : 0.0);
    const pf::ActionVector a{rng.uniform(), rng.uniform(), rng.uniform()};
    const pf::Proposal p{a, pf::overlap_score(a, m), false};
    decreased += pf::refine_proposal(p, m, pf::kRefineUpdates, i).score < p.score;
  }
  res.require(decreased == 0, fmt("%d/1000 refinements decreased the score", decreased));

  int discs = 0, below = 0, below_default = 0;
  double worst = 1.0;
  for (std::uint64_t i = 0; discs < 1000; ++i) {
    pf::CounterRng r(i);
    const pf::ActionVector a{r.uniform(0.15, 0.85), r.uniform(0.15, 0.85), r.uniform()};
    if (pf::action_radius(a.r) * H < 3.0) continue;
    ++discs;
    const pf::PathMap m = pf::render_ball_map(a, H);
    const double best = pf::propose_actions(m, i, pf::kProposals, kRecoveryRounds)[0].score;
    worst = std::min(worst, best);
    below += best < 0.9;
    below_default += pf::propose_actions(m, i)[0].score < 0.9;
  }
  res.require(below == 0, fmt("%d/%d disc maps below 0.9", below, discs));

  const pf::PathMap blob = pf::render_ball_map({0.4, 0.6, 0.5}, H);
  const auto props = pf::propose_actions(blob, 3);
  const pf::NoiseSchedule sched;
  const pf::AttemptStream stream(props, sched, 5);
  bool first_five = true;
  for (int t = 1; t <= pf::kProposals; ++t)
    first_five = first_five && stream.candidate(t) == props[t - 1].action;
  res.require(first_five, "first 5 attempts are not the refined proposals");
  res.require(std::abs(sched.sigma(6) - 0.02) < 1e-15, fmt("sigma(6) = %g", sched.sigma(6)));
  const auto task = pf::instantiate_task(pf::get_template(2), 5);
  const auto rec = pf::run_attempts(task, [&](int t, int k) { return stream.candidate(t, k); });
  res.require(stream.size() <= 100 && rec.attempts.size() <= 100,
              fmt("stream length %zu", rec.attempts.size()));
  res.detail = fmt("hill-climb 0 decreases/1000; exact discs r>=3px: worst best-of-5 %.3f with %d "
                   "rounds (%d/%d below 0.9 at the %d-round default); sigma(6)=%.3f; %zu attempts",
                   worst, kRecoveryRounds, below_default, discs, pf::kRefineUpdates,
                   sched.sigma(6), rec.attempts.size()) +
               (res.pass ? "" : " | " + res.detail);
  return res;
}

// ---------------------------------------------------------------------------
// Training health and formats

// 10 solving rollouts per task, drawn round-robin over the templates; 22
// tasks leave room for a couple that fall short of 10 solutions.
const std::vector<pf::TrainSample>& overfit_samples() {
  static const std::vector<pf::TrainSample> samples = [] {
    std::vector<pf::TaskSpec> tasks;
    for (int v = 0; tasks.size() < 22; ++v)
      for (int t = 0; t < 10 && tasks.size() < 22; ++t)
        tasks.push_back(pf::instantiate_task(pf::get_template(t), 500 + 10 * v + t, v));
    std::vector<pf::TrainSample> out;
    pf::DatasetStats st;
    out = pf::generate_dataset(tasks, 10, pf::kDefaultSearchBudget, 3, 64, &st);
    progress(fmt("overfit set: %zu samples from %d tasks", out.size(), st.tasks_used));
    return out;
  }();
  return samples;
}

double full_loss(pf::Model& m, std::span<const pf::TrainSample> data) {
  double sum = 0.0;
  for (std::size_t lo = 0; lo < data.size(); lo += 32) {
    std::vector<const pf::TrainSample*> batch;
    for (std::size_t i = lo; i < std::min(data.size(), lo + 32); ++i) batch.push_back(&data[i]);
    sum += pf::batch_losses(m, std::span<const pf::TrainSample* const>(batch)).total *
           batch.size();
  }
  return sum / data.size();
}

Result overfit() {
  Result res;
  const auto t0 = Clock::now();
  auto samples = overfit_samples();
  res.require(samples.size() >= 200, fmt("only %zu samples", samples.size()));
  if (samples.size() > 200) samples.resize(200);
  pf::Model m(pf::ModelConfig{64, 16, 1});
  pf::TrainConfig cfg;
  cfg.seed = 1;
  const int per_epoch = pf::batches_per_epoch(samples.size(), cfg.batch_size);
  cfg.epochs = (200 + per_epoch - 1) / per_epoch;
  const double before = full_loss(m, samples);
  // Stop after exactly 200 optimizer steps.
  nn::Adam<float> opt(nn::AdamConfig{.lr = cfg.lr});
  std::vector<std::size_t> order(samples.size());
  int steps = 0;
  for (int epoch = 0; steps < 200; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    pf::CounterRng rng(pf::hash_combine(cfg.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_u64() % i]);
    for (std::size_t lo = 0; lo < order.size() && steps < 200; lo += cfg.batch_size, ++steps) {
      std::vector<const pf::TrainSample*> batch;
      for (std::size_t i = lo; i < std::min(order.size(), lo + cfg.batch_size); ++i)
        batch.push_back(&samples[order[i]]);
      pf::joint_train_step(m, opt, std::span<const pf::TrainSample* const>(batch), cfg);
    }
  }
  const double after = full_loss(m, samples);
  res.require(after < 0.5 * before, fmt("loss ratio %.3f", after / before));
  res.detail = fmt("%zu samples at 64x64, %d steps: total loss %.4f -> %.4f (ratio %.3f), %.0f s",
                   samples.size(), steps, before, after, after / before, seconds_since(t0)) +
               (res.pass ? "" : " | " + res.detail);
  return res;
}

Result formats() {
  Result res;
  const auto& samples = overfit_samples();
  const pf::io::Bytes data = pf::io::encode_dataset(samples);
  const auto decoded = pf::io::decode_dataset(data);
  res.require(decoded.size() == samples.size(), "sample count changed");
  res.require(pf::io::encode_dataset(decoded) == data, "dataset re-encode differs");
  res.require(data.size() == pf::io::dataset_bytes(samples.size(), 64, 64),
              "dataset size does not match closed form");
  bool equal = decoded.size() == samples.size();
  for (std::size_t i = 0; equal && i < samples.size(); ++i) {
    const auto& a = decoded[i];
    const auto& b = samples[i];
    equal = a.template_id == b.template_id && a.variant_seed == b.variant_seed &&
            a.scene == b.scene && a.gt_base == b.gt_base && a.gt_target == b.gt_target &&
            a.gt_action == b.gt_action && a.gt_placement == b.gt_placement &&
            a.action.x == static_cast<double>(static_cast<float>(b.action.x)) &&
            a.action.y == static_cast<double>(static_cast<float>(b.action.y)) &&
            a.action.r == static_cast<double>(static_cast<float>(b.action.r));
  }
  res.require(equal, "decoded samples differ");

  pf::Model m(pf::ModelConfig{64, 16, 9});
  const pf::io::Bytes ck = pf::io::encode_checkpoint(m);
  pf::Model back = pf::io::decode_checkpoint(ck);
  res.require(pf::io::encode_checkpoint(back) == ck, "checkpoint re-encode differs");
  const auto scene = random_scene(64, 4);
  const auto p1 = pf::predict(m, scene), p2 = pf::predict(back, scene);
  res.require(p1.base == p2.base && p1.target == p2.target && p1.action == p2.action &&
                  p1.placement == p2.placement,
              "forward outputs differ after reload");
  const int batches = pf::batches_per_epoch(20000, 32);
  res.require(batches == 625, fmt("20000/32 -> %d batches", batches));
  res.detail = fmt("dataset %zu samples / %zu bytes and checkpoint %zu bytes byte-exact; "
                   "20000/32 = %d batches",
                   samples.size(), data.size(), ck.size(), batches) +
               (res.pass ? "" : " | " + res.detail);
  return res;
}

// ---------------------------------------------------------------------------
// Desk-scale experiment

struct E2eOptions {
  std::string work = "acceptance_e2e";
  std::uint64_t suite_seed = 1;
  int within_seeds = 3;
  int cross_seeds = 1;
  int folds_used = 3;
  bool reuse = false;
};

struct E2eOutcome {
  double within_model = 0, within_random = 0, cross_model = 0, cross_random = 0;
  double within_sw10 = 0, cross_sw10 = 0;
  double seconds = 0;
};

pf::EvalReport mean_over(const std::vector<pf::EvalReport>& reps) { return pf::mean_report(reps); }

E2eOutcome run_e2e(const E2eOptions& opt, std::vector<std::string>& log_lines) {
  const auto t0 = Clock::now();
  fs::create_directories(opt.work);
  const std::string suite_path = (fs::path(opt.work) / "suite.json").string();
  const std::string data_path = (fs::path(opt.work) / "data.pfrd").string();

  pf::io::Suite suite;
  if (opt.reuse && fs::exists(suite_path)) {
    suite = pf::io::load_suite(suite_path);
  } else {
    suite.config.n_templates = 10;
    suite.config.variants_per_template = 40;
    suite.config.seed = opt.suite_seed;
    suite.tasks = pf::build_task_suite(suite.config);
    pf::io::save_suite(suite_path, suite);
  }
  progress(fmt("suite: %zu tasks (%.0f s)", suite.tasks.size(), seconds_since(t0)));

  std::vector<pf::TrainSample> data;
  if (opt.reuse && fs::exists(data_path)) {
    data = pf::io::load_dataset(data_path);
  } else {
    std::vector<pf::TaskSpec> tasks;
    for (const auto& t : suite.tasks) tasks.push_back(t.task);
    pf::DatasetStats st;
    data = pf::generate_dataset(tasks, 5, pf::kDefaultSearchBudget, opt.suite_seed, 64, &st);
    for (const auto& id : st.excluded) log_lines.push_back("excluded " + id);
    pf::io::save_dataset(data_path, data);
  }
  progress(fmt("dataset: %zu samples (%.0f s)", data.size(), seconds_since(t0)));

  const auto by_id = suite.by_id();
  E2eOutcome out;
  auto run_setting = [&](pf::Setting setting, int n_seeds, double& model_auc, double& random_auc,
                         double& model_sw10) {
    auto folds = pf::make_folds(suite.ids(), pf::kDefaultFolds, setting, opt.suite_seed);
    folds.resize(opt.folds_used);
    double m_sum = 0, r_sum = 0, sw_sum = 0;
    for (int seed = 0; seed < n_seeds; ++seed) {
      std::vector<pf::EvalReport> model_reps, random_reps;
      for (const auto& fold : folds) {
        const auto train_set = pf::fold_train_samples(data, fold, by_id);
        pf::Model model(pf::ModelConfig{64, 16, static_cast<std::uint64_t>(seed)});
        pf::TrainConfig cfg;
        cfg.seed = seed;
        const auto tr = pf::train(model, train_set, cfg);
        const auto one = std::vector<pf::FoldSplit>{fold};
        const auto mr = pf::evaluate(
            one, by_id,
            [&](const pf::FoldSplit&, const pf::TaskSpec& t, std::uint64_t s) {
              return pf::solve_task(model, t, pf::kMaxAttempts, s);
            },
            seed, "model");
        const auto rr = pf::evaluate(
            one, by_id,
            [](const pf::FoldSplit&, const pf::TaskSpec& t, std::uint64_t s) {
              return pf::solve_task_random(t, pf::kMaxAttempts, s);
            },
            seed, "random");
        model_reps.push_back(mr[0]);
        random_reps.push_back(rr[0]);
        const std::string line =
            fmt("%s seed %d fold %d: %zu train samples, loss %.3f -> %.3f, model %.1f, random "
                "%.1f (%.0f s)",
                pf::setting_name(setting), seed, fold.fold_id, train_set.size(),
                tr.epoch_loss.front(), tr.epoch_loss.back(), mr[0].mean_auccess,
                rr[0].mean_auccess, seconds_since(t0));
        progress(line);
        log_lines.push_back(line);
      }
      const auto mm = mean_over(model_reps), rm = mean_over(random_reps);
      m_sum += mm.mean_auccess;
      r_sum += rm.mean_auccess;
      sw_sum += mm.mean_solved_within_10;
    }
    model_auc = m_sum / n_seeds;
    random_auc = r_sum / n_seeds;
    model_sw10 = sw_sum / n_seeds;
  };
  run_setting(pf::Setting::Within, opt.within_seeds, out.within_model, out.within_random,
              out.within_sw10);
  run_setting(pf::Setting::Cross, opt.cross_seeds, out.cross_model, out.cross_random,
              out.cross_sw10);
  out.seconds = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------

void report(const std::string& name, const Result& r, int& failures) {
  std::cout << (r.pass ? "PASS " : "FAIL ") << name << ": " << r.detail << std::endl;
  failures += !r.pass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pathforge acceptance checks"};
  bool e2e = false;
  std::vector<std::string> only;
  E2eOptions eo;
  app.add_flag("--e2e", e2e, "Run the desk-scale experiment instead of the fast checks");
  app.add_option("--only", only, "Run only these checks");
  app.add_option("--work", eo.work, "Working directory for --e2e artifacts");
  app.add_flag("--reuse", eo.reuse, "Reuse suite and dataset found in --work");
  app.add_option("--within-seeds", eo.within_seeds)->capture_default_str();
  app.add_option("--cross-seeds", eo.cross_seeds)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](const std::string& n) {
    return only.empty() || std::find(only.begin(), only.end(), n) != only.end();
  };
  int failures = 0;
  auto check = [&](const std::string& name, Result (*fn)()) {
    if (!wanted(name)) return;
    Result r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    report(name, r, failures);
  };

  if (!e2e) {
    check("physics-determinism", physics_determinism);
    check("physics-correctness", physics_correctness);
    check("gradient-suite", gradient_suite);
    check("architecture", architecture);
    check("auccess-oracle", auccess_checks);
    check("action-synthesis", action_synthesis);
    check("overfit", overfit);
    check("formats", formats);
    return failures == 0 ? 0 : 1;
  }

  std::vector<std::string> lines;
  Result desk, reference;
  try {
    const E2eOutcome o = run_e2e(eo, lines);
    const double margin = o.within_model - o.within_random;
    desk.require(margin >= 5.0, fmt("within margin over random %.2f < 5", margin));
    desk.require(o.cross_model <= o.within_model + 5.0,
                 fmt("cross %.2f > within %.2f + 5", o.cross_model, o.within_model));
    desk.require(o.seconds < 7200.0, fmt("runtime %.0f s >= 2 h", o.seconds));
    desk.detail = fmt("within auccess %.2f vs random %.2f (margin %.2f, %d seeds x %d folds); "
                      "cross %.2f (random %.2f); total %.1f min",
                      o.within_model, o.within_random, margin, eo.within_seeds, eo.folds_used,
                      o.cross_model, o.cross_random, o.seconds / 60.0) +
                  (desk.pass ? "" : " | " + desk.detail);
    // Reference figures come from a different simulator and template set.
    reference.require(std::abs(o.within_model - 62) < 1 && std::abs(o.within_sw10 - 66) < 1 &&
                      std::abs(o.cross_model - 31) < 1 && std::abs(o.cross_sw10 - 31) < 1,
                  "reference means not reproduced");
    reference.detail = fmt("measured within %.1f/%.1f, cross %.1f/%.1f vs reference 62/66, 31/31 "
                       "(auc./perc.)",
                       o.within_model, o.within_sw10, o.cross_model, o.cross_sw10);
  } catch (const std::exception& e) {
    desk.pass = reference.pass = false;
    desk.detail = reference.detail = std::string("exception: ") + e.what();
  }
  for (const auto& l : lines) std::cerr << "  " << l << std::endl;
  report("reference-scale-means", reference, failures);
  report("desk-scale-e2e", desk, failures);
  return failures == 0 ? 0 : 1;
}
