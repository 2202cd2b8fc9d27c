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


#include "pathforge/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace pathforge {
namespace {

TrainSample synthetic_sample(int res, std::uint64_t seed) {
  CounterRng rng(seed);
  TrainSample s;
  s.scene.resolution = res;
  for (auto& c : s.scene.channels) {
    c = PathMap(res, res);
    for (auto& v : c.data) v = rng.uniform() < 0.2 ? 1.0f : 0.0f;
  }
  for (auto* m : {&s.gt_base, &s.gt_target, &s.gt_action, &s.gt_placement}) {
    *m = PathMap(res, res);
    const int r0 = rng.uniform_int(0, res / 2), c0 = rng.uniform_int(0, res / 2);
    for (int r = r0; r < r0 + res / 3; ++r)
      for (int c = c0; c < c0 + res / 3; ++c) m->at(r, c) = 1.0f;
  }
  return s;
}

std::vector<const TrainSample*> ptrs(const std::vector<TrainSample>& v) {
  std::vector<const TrainSample*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

double total_loss(Model& m, const std::vector<const TrainSample*>& batch) {
  nn::Graph<float> g;
  Model copy = m;
  return accumulate_gradients(copy, g, batch, {1, 1, 1, 1}).total;
}

TEST(Hourglass, ArchitectureAt64) {
  ModelConfig cfg;
  EXPECT_EQ(cfg.down_widths(), (std::vector<int>{16, 32, 64, 128, 256, 256}));
  Model m(cfg);
  for (auto* net : m.nets()) {
    EXPECT_EQ(net->depth(), 6);
    ASSERT_EQ(net->up().size(), 6u);
    for (const auto& l : net->down()) {
      EXPECT_EQ(l.weight.value.dim(2), 4);
      EXPECT_EQ(l.weight.value.dim(3), 4);
    }
    EXPECT_EQ(net->up().front().weight.value.shape, (nn::Shape{256, 256, 4, 4}));
    EXPECT_EQ(net->up().back().weight.value.shape, (nn::Shape{16, 1, 4, 4}));
  }
  EXPECT_EQ(m.base.in_channels(), 5);
  EXPECT_EQ(m.action1.in_channels(), 7);
  EXPECT_EQ(m.action2.in_channels(), 7);
}

TEST(Hourglass, BottleneckIs256At1x1) {
  for (int res : {4, 16, 64}) {
    ModelConfig cfg{res, 16, 1};
    HourglassNet<float> net("n", 5, 1, cfg);
    nn::Graph<float> g(false);
    const int x = g.input(nn::Tensor<float>({2, 5, res, res}, 1.0f));
    const int y = net.forward(g, x);
    EXPECT_EQ(g.value(y).shape, (nn::Shape{2, 1, res, res}));
    // Node after the last down ReLU.
    bool found = false;
    for (std::size_t i = 0; i < g.size(); ++i)
      found = found || g.value(static_cast<int>(i)).shape == nn::Shape{2, 256, 1, 1};
    EXPECT_TRUE(found) << res;
  }
}

TEST(Hourglass, RejectsWrongInputShape) {
  HourglassNet<float> net("n", 5, 1, ModelConfig{16, 16, 1});
  nn::Graph<float> g(false);
  EXPECT_THROW(net.forward(g, g.input(nn::Tensor<float>({1, 5, 32, 32}))), ShapeMismatch);
  EXPECT_THROW(net.forward(g, g.input(nn::Tensor<float>({1, 4, 16, 16}))), ShapeMismatch);
}

TEST(Pipeline, OutputsStrictlyInUnitIntervalAndDeterministic) {
  Model m(ModelConfig{64, 16, 3});
  const auto s = synthetic_sample(64, 9);
  const Prediction a = predict(m, s.scene);
  const Prediction b = predict(m, s.scene);
  for (const PathMap* p : {&a.base, &a.target, &a.action, &a.placement}) {
    ASSERT_EQ(p->height, 64);
    for (float v : p->data) {
      ASSERT_GT(v, 0.0f);
      ASSERT_LT(v, 1.0f);
    }
  }
  EXPECT_EQ(a.placement, b.placement);
  EXPECT_EQ(a.base, b.base);
  Model m2(ModelConfig{64, 16, 3});
  EXPECT_EQ(predict(m2, s.scene).placement, a.placement);
}

TEST(Pipeline, ResolutionMismatchThrows) {
  Model m(ModelConfig{16, 16, 0});
  EXPECT_THROW(predict(m, synthetic_sample(32, 1).scene), ShapeMismatch);
}

TEST(Pipeline, ActionLossesReachBaseNet) {
  Model m(ModelConfig{16, 16, 5});
  std::vector<TrainSample> data{synthetic_sample(16, 1), synthetic_sample(16, 2)};
  const auto batch = ptrs(data);
  nn::Graph<float> g;
  std::vector<const SceneRaster*> scenes{&data[0].scene, &data[1].scene};
  const auto n = forward_pipeline(m, g, g.input(scene_tensor<float>(scenes)));
  std::vector<const PathMap*> act{&data[0].gt_action, &data[1].gt_action};
  std::vector<const PathMap*> place{&data[0].gt_placement, &data[1].gt_placement};
  const int la = g.bce(n.action, map_tensor<float>(act));
  const int lp = g.bce(n.placement, map_tensor<float>(place));
  g.backward(g.weighted_sum({{la, 1.0f}, {lp, 1.0f}}));
  double norm = 0.0;
  for (auto* p : m.base.parameters())
    for (float v : p->grad.data) norm += double(v) * v;
  EXPECT_GT(norm, 0.0);
}

TEST(Pipeline, DuplicateBatchMatchesSingleSample) {
  Model m(ModelConfig{16, 16, 2});
  const auto s = synthetic_sample(16, 3);
  std::vector<const TrainSample*> one{&s}, many{&s, &s, &s, &s};
  Model a = m, b = m;
  nn::Graph<float> ga, gb;
  const Losses la = accumulate_gradients(a, ga, one, {1, 1, 1, 1});
  const Losses lb = accumulate_gradients(b, gb, many, {1, 1, 1, 1});
  EXPECT_NEAR(la.base, lb.base, 1e-5);
  EXPECT_NEAR(la.target, lb.target, 1e-5);
  EXPECT_NEAR(la.action, lb.action, 1e-5);
  EXPECT_NEAR(la.placement, lb.placement, 1e-5);
}

TEST(Pipeline, OneStepDescendsInMostTrials) {
  int descended = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Model m(ModelConfig{16, 16, static_cast<std::uint64_t>(trial)});
    std::vector<TrainSample> data{synthetic_sample(16, 100 + trial),
                                  synthetic_sample(16, 200 + trial)};
    const auto batch = ptrs(data);
    const double before = total_loss(m, batch);
    nn::Adam<float> opt;
    joint_train_step(m, opt, std::span<const TrainSample* const>(batch), TrainConfig{});
    descended += total_loss(m, batch) < before;
  }
  EXPECT_GE(descended, 95);
}

TEST(Train, BatchArithmetic) {
  EXPECT_EQ(batches_per_epoch(20000, 32), 625);
  EXPECT_EQ(batches_per_epoch(2000, 32), 63);
  EXPECT_EQ(batches_per_epoch(1, 32), 1);
}

TEST(Train, ZeroEpochsLeavesModel) {
  Model m(ModelConfig{16, 16, 1});
  const Model before = m;
  std::vector<TrainSample> data{synthetic_sample(16, 1)};
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto res = train(m, std::span<const TrainSample>(data), cfg);
  EXPECT_TRUE(res.epoch_loss.empty());
  for (std::size_t i = 0; i < m.parameters().size(); ++i)
    EXPECT_EQ(m.parameters()[i]->value, const_cast<Model&>(before).parameters()[i]->value);
}

TEST(Train, EmptyDatasetThrows) {
  Model m(ModelConfig{16, 16, 1});
  EXPECT_THROW(train(m, std::span<const TrainSample>(), TrainConfig{}), EmptyDataset);
}

TEST(Train, RejectsBadConfig) {
  Model m(ModelConfig{16, 16, 1});
  std::vector<TrainSample> data{synthetic_sample(16, 1)};
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(train(m, std::span<const TrainSample>(data), cfg), std::invalid_argument);
  cfg = {};
  cfg.loss_weights[2] = 0.0;
  EXPECT_THROW(train(m, std::span<const TrainSample>(data), cfg), std::invalid_argument);
}

TEST(Train, DeterministicAndLossDecreases) {
  std::vector<TrainSample> data;
  for (int i = 0; i < 12; ++i) data.push_back(synthetic_sample(16, 50 + i));
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 8;
  cfg.seed = 3;
  Model a(ModelConfig{16, 16, 4}), b(ModelConfig{16, 16, 4});
  const auto ra = train(a, std::span<const TrainSample>(data), cfg);
  const auto rb = train(b, std::span<const TrainSample>(data), cfg);
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  EXPECT_EQ(ra.batches_per_epoch, 3);
  EXPECT_EQ(ra.steps, 24);
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    ASSERT_EQ(a.parameters()[i]->value, b.parameters()[i]->value);
  EXPECT_LT(ra.epoch_loss.back(), ra.epoch_loss.front());
}

class TrainingSamples : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    task_ = instantiate_task(get_template(0), 11);
    actions_ = find_solving_actions(task_, 10, 5000, 1);
  }
  static inline TaskSpec task_;
  static inline std::vector<ActionVector> actions_;
};

TEST_F(TrainingSamples, OnePerActionSharingBasePath) {
  ASSERT_EQ(actions_.size(), 10u);
  const auto samples = make_training_samples(task_, actions_, 64);
  ASSERT_EQ(samples.size(), 10u);
  EXPECT_GT(samples[0].gt_base.popcount(), 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    EXPECT_EQ(s.gt_base, samples[0].gt_base);
    EXPECT_EQ(s.scene, samples[0].scene);
    EXPECT_EQ(s.gt_placement.popcount(), render_ball_map(actions_[i], 64).popcount());
    EXPECT_EQ(s.action, actions_[i]);
    EXPECT_GT(s.gt_action.popcount(), 0);
  }
}

TEST_F(TrainingSamples, TargetPathTouchesGoal) {
  const auto samples = make_training_samples(task_, actions_, 64);
  // Footprint of the goal, grown by one cell since contact is edge-to-edge.
  const Body* goal = task_.scene.find(task_.goal_id);
  ASSERT_NE(goal, nullptr);
  Body grown = *goal;
  if (auto* b = std::get_if<Box>(&grown.shape)) {
    b->half_w += 1.5 / 64;
    b->half_h += 1.5 / 64;
  } else {
    std::get<Circle>(grown.shape).radius += 1.5 / 64;
  }
  PathMap goal_map(64, 64);
  draw_body(goal_map, grown);
  for (const auto& s : samples) {
    int overlap = 0;
    for (std::size_t i = 0; i < goal_map.size(); ++i)
      overlap += goal_map.data[i] > 0.5f && s.gt_target.data[i] > 0.5f;
    EXPECT_GT(overlap, 0);
  }
}

TEST_F(TrainingSamples, NonSolvingActionFailsReplay) {
  std::vector<ActionVector> bad;
  CounterRng rng(4);
  while (bad.empty()) {
    ActionVector a{rng.uniform(), rng.uniform(), rng.uniform()};
    auto placed = place_action_ball(task_.scene, a);
    if (placed && !simulate_rollout(*placed).solved) bad.push_back(a);
  }
  EXPECT_THROW(make_training_samples(task_, bad, 64), ReplayFailed);
}

TEST_F(TrainingSamples, DatasetDropsTasksShortOfSolutions) {
  const std::vector<TaskSpec> tasks{task_, instantiate_task(get_template(0), 12)};
  DatasetStats st;
  const auto none = generate_dataset(tasks, 2, 0, 1, 32, &st);
  EXPECT_TRUE(none.empty());
  EXPECT_EQ(st.tasks_used, 0);
  EXPECT_EQ(st.excluded.size(), 2u);

  const auto data = generate_dataset(tasks, 2, 5000, 1, 32, &st);
  EXPECT_EQ(st.tasks_used, 2);
  ASSERT_EQ(data.size(), 4u);
  EXPECT_EQ(data[0].variant_seed, tasks[0].variant_seed);
  EXPECT_EQ(data[3].variant_seed, tasks[1].variant_seed);
  EXPECT_EQ(generate_dataset(tasks, 2, 5000, 1, 32), data);
}

}  // namespace
}  // namespace pathforge
