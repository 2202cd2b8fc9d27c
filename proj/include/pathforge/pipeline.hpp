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

// The four hourglass networks and their joint training.
//
//   base      : scene(5)                          -> target path without action
//   target    : scene(5)                          -> target path in a solving rollout
//   action1   : scene(5) + base + target          -> action-ball path
//   action2   : scene(5) + target + action path   -> action-ball placement
//
// Downstream nets always consume the upstream predictions, and gradients flow
// back through them.

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pathforge/nn/optim.hpp"
#include "pathforge/raster.hpp"
#include "pathforge/templates.hpp"

namespace pathforge {

struct ReplayFailed : Error {
  explicit ReplayFailed(const std::string& w) : Error("ReplayFailed", w) {}
};
struct EmptyDataset : Error {
  explicit EmptyDataset(const std::string& w) : Error("EmptyDataset", w) {}
};

inline constexpr int kBottleneck = 256;

struct ModelConfig {
  int resolution = kDefaultResolution;
  int base_width = 16;
  std::uint64_t seed = 0;

  // Output widths of the down stack; the last is always the bottleneck.
  std::vector<int> down_widths() const {
    check_resolution(resolution);
    const int depth = static_cast<int>(std::lround(std::log2(resolution)));
    std::vector<int> w;
    for (int i = 0; i < depth; ++i) w.push_back(std::min(base_width << i, kBottleneck));
    w.back() = kBottleneck;
    return w;
  }
  bool operator==(const ModelConfig&) const = default;
};

template <class T>
struct ConvLayer {
  nn::Parameter<T> weight;
  nn::Parameter<T> bias;
};

template <class T>
class HourglassNet {
 public:
  HourglassNet() = default;
  HourglassNet(std::string name, int in_ch, int out_ch, const ModelConfig& cfg)
      : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), resolution_(cfg.resolution) {
    const auto widths = cfg.down_widths();
    int c = in_ch;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      down_.push_back(make_layer("down" + std::to_string(i), {widths[i], c, 4, 4}, widths[i]));
      c = widths[i];
    }
    // Mirror: widths[D-2], ..., widths[0], then out_ch.
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const int next = i + 1 < widths.size() ? widths[widths.size() - 2 - i] : out_ch;
      up_.push_back(make_layer("up" + std::to_string(i), {c, next, 4, 4}, next));
      c = next;
    }
  }

  const std::string& name() const { return name_; }
  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  int depth() const { return static_cast<int>(down_.size()); }
  const std::vector<ConvLayer<T>>& down() const { return down_; }
  const std::vector<ConvLayer<T>>& up() const { return up_; }

  void init(CounterRng& rng) {
    for (auto& l : down_) init_layer(l, l.weight.value.dim(1), rng);
    for (auto& l : up_) init_layer(l, l.weight.value.dim(0), rng);
  }

  // Records the net on `g`; returns the sigmoid output node.
  int forward(nn::Graph<T>& g, int x) {
    const Shape s = g.value(x).shape;
    if (s.size() != 4 || s[1] != in_ch_ || s[2] != resolution_ || s[3] != resolution_)
      throw ShapeMismatch(name_ + ": expected (N," + std::to_string(in_ch_) + "," +
                          std::to_string(resolution_) + "," + std::to_string(resolution_) +
                          "), got " + nn::shape_str(s));
    int h = x;
    for (auto& l : down_) h = g.relu(g.conv(h, g.param(l.weight), g.param(l.bias)));
    if (g.value(h).shape != Shape{s[0], kBottleneck, 1, 1})
      throw ShapeMismatch(name_ + ": bottleneck is " + nn::shape_str(g.value(h).shape));
    for (std::size_t i = 0; i < up_.size(); ++i) {
      h = g.deconv(h, g.param(up_[i].weight), g.param(up_[i].bias));
      h = i + 1 < up_.size() ? g.relu(h) : g.sigmoid(h);
    }
    return h;
  }

  std::vector<nn::Parameter<T>*> parameters() {
    std::vector<nn::Parameter<T>*> out;
    for (auto* stack : {&down_, &up_})
      for (auto& l : *stack) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
      }
    return out;
  }

 private:
  using Shape = nn::Shape;

  ConvLayer<T> make_layer(const std::string& tag, Shape wshape, int out) {
    return {nn::Parameter<T>(name_ + "." + tag + ".weight", nn::Tensor<T>(wshape)),
            nn::Parameter<T>(name_ + "." + tag + ".bias", nn::Tensor<T>({out}))};
  }
  static void init_layer(ConvLayer<T>& l, int in_ch, CounterRng& rng) {
    nn::init_uniform(l.weight.value, in_ch, rng);
    nn::init_uniform(l.bias.value, in_ch, rng);
  }

  std::string name_;
  int in_ch_ = 0, out_ch_ = 0, resolution_ = 0;
  std::vector<ConvLayer<T>> down_, up_;
};

template <class T>
struct PipelineModel {
  ModelConfig config;
  HourglassNet<T> base, target, action1, action2;

  PipelineModel() = default;
  explicit PipelineModel(const ModelConfig& cfg)
      : config(cfg),
        base("base", kSceneChannels, 1, cfg),
        target("target", kSceneChannels, 1, cfg),
        action1("action1", kSceneChannels + 2, 1, cfg),
        action2("action2", kSceneChannels + 2, 1, cfg) {
    CounterRng rng(hash_combine(cfg.seed, 0x1417ULL));
    for (auto* net : nets()) net->init(rng);
  }

  std::array<HourglassNet<T>*, 4> nets() { return {&base, &target, &action1, &action2}; }

  std::vector<nn::Parameter<T>*> parameters() {
    std::vector<nn::Parameter<T>*> out;
    for (auto* net : nets())
      for (auto* p : net->parameters()) out.push_back(p);
    return out;
  }
  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }
};

using Model = PipelineModel<float>;

struct PipelineNodes {
  int base = -1, target = -1, action = -1, placement = -1;
};

template <class T>
PipelineNodes forward_pipeline(PipelineModel<T>& m, nn::Graph<T>& g, int scene) {
  PipelineNodes out;
  out.base = m.base.forward(g, scene);
  out.target = m.target.forward(g, scene);
  out.action = m.action1.forward(g, g.concat({scene, out.base, out.target}));
  out.placement = m.action2.forward(g, g.concat({scene, out.target, out.action}));
  return out;
}

// ---------------------------------------------------------------------------
// Tensors from rasters

template <class T = float>
nn::Tensor<T> scene_tensor(std::span<const SceneRaster* const> scenes) {
  if (scenes.empty()) throw ShapeMismatch("scene_tensor: empty batch");
  const int h = scenes[0]->resolution;
  nn::Tensor<T> t({static_cast<int>(scenes.size()), kSceneChannels, h, h});
  const std::size_t plane = static_cast<std::size_t>(h) * h;
  for (std::size_t b = 0; b < scenes.size(); ++b) {
    if (scenes[b]->resolution != h) throw ShapeMismatch("scene_tensor: mixed resolutions");
    for (int c = 0; c < kSceneChannels; ++c)
      std::copy(scenes[b]->channels[c].data.begin(), scenes[b]->channels[c].data.end(),
                t.data.begin() + (b * kSceneChannels + c) * plane);
  }
  return t;
}

template <class T = float>
nn::Tensor<T> map_tensor(std::span<const PathMap* const> maps) {
  if (maps.empty()) throw ShapeMismatch("map_tensor: empty batch");
  const int h = maps[0]->height, w = maps[0]->width;
  nn::Tensor<T> t({static_cast<int>(maps.size()), 1, h, w});
  for (std::size_t b = 0; b < maps.size(); ++b) {
    if (maps[b]->height != h || maps[b]->width != w) throw ShapeMismatch("map_tensor: mixed sizes");
    std::copy(maps[b]->data.begin(), maps[b]->data.end(), t.data.begin() + b * h * w);
  }
  return t;
}

template <class T>
PathMap tensor_map(const nn::Tensor<T>& t, int index) {
  PathMap m(t.dim(2), t.dim(3));
  const std::size_t plane = m.size();
  for (std::size_t i = 0; i < plane; ++i)
    m.data[i] = static_cast<float>(t.data[static_cast<std::size_t>(index) * plane + i]);
  return m;
}

struct Prediction {
  PathMap base, target, action, placement;
};

// Inference on one scene.
template <class T>
Prediction predict(PipelineModel<T>& m, const SceneRaster& scene) {
  if (scene.resolution != m.config.resolution)
    throw ShapeMismatch("predict: scene resolution " + std::to_string(scene.resolution) +
                        " vs model " + std::to_string(m.config.resolution));
  nn::Graph<T> g(false);
  const SceneRaster* one[] = {&scene};
  const auto n = forward_pipeline(m, g, g.input(scene_tensor<T>(one)));
  return {tensor_map(g.value(n.base), 0), tensor_map(g.value(n.target), 0),
          tensor_map(g.value(n.action), 0), tensor_map(g.value(n.placement), 0)};
}

// ---------------------------------------------------------------------------
// Training data

struct TrainSample {
  int template_id = 0;
  std::uint64_t variant_seed = 0;
  ActionVector action;
  SceneRaster scene;
  PathMap gt_base, gt_target, gt_action, gt_placement;

  bool operator==(const TrainSample&) const = default;
};

// One sample per solving action; all share the action-free target path.
inline std::vector<TrainSample> make_training_samples(const TaskSpec& task,
                                                      std::span<const ActionVector> actions,
                                                      int resolution = kDefaultResolution) {
  TrainSample proto;
  proto.template_id = task.template_id;
  proto.variant_seed = task.variant_seed;
  proto.scene = rasterize_scene(task.scene, resolution);
  const Rollout free = simulate_rollout(task.scene, kDefaultMaxSteps, 1);
  proto.gt_base = rasterize_path(free, task.scene, task.target_id, resolution);

  std::vector<TrainSample> out;
  for (const auto& a : actions) {
    const auto placed = place_action_ball(task.scene, a);
    if (!placed)
      throw ReplayFailed(task_id(task) + ": action placement is no longer valid");
    const Rollout r = simulate_rollout(*placed, kDefaultMaxSteps, 1);
    if (!r.solved) throw ReplayFailed(task_id(task) + ": action no longer solves the task");
    TrainSample s = proto;
    s.action = a;
    s.gt_target = rasterize_path(r, *placed, task.target_id, resolution);
    s.gt_action = rasterize_path(r, *placed, placed->bodies.back().id, resolution);
    s.gt_placement = render_ball_map(a, resolution);
    out.push_back(std::move(s));
  }
  return out;
}

struct DatasetStats {
  int tasks_used = 0;
  std::vector<std::string> excluded;  // fewer than the wanted solutions in budget
};

// `per_task` solving rollouts per task found by random search; tasks short of
// that are dropped. Samples are ordered by task, then by discovery.
inline std::vector<TrainSample> generate_dataset(std::span<const TaskSpec> tasks, int per_task,
                                                 int budget, std::uint64_t seed,
                                                 int resolution = kDefaultResolution,
                                                 DatasetStats* stats = nullptr) {
  if (per_task < 1) throw std::invalid_argument("generate_dataset: per_task must be >= 1");
  std::vector<std::vector<TrainSample>> per(tasks.size());
  std::vector<char> kept(tasks.size(), 0);
  parallel_for(static_cast<int>(tasks.size()), [&](int i) {
    const auto actions = find_solving_actions(tasks[i], per_task, budget, seed);
    if (static_cast<int>(actions.size()) < per_task) return;
    per[i] = make_training_samples(tasks[i], actions, resolution);
    kept[i] = 1;
  });
  std::vector<TrainSample> out;
  DatasetStats st;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!kept[i]) {
      st.excluded.push_back(task_id(tasks[i]));
      continue;
    }
    ++st.tasks_used;
    for (auto& s : per[i]) out.push_back(std::move(s));
  }
  if (stats) *stats = std::move(st);
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int batch_size = 32;
  int epochs = 10;
  double lr = 1e-3;
  std::array<double, 4> loss_weights{1.0, 1.0, 1.0, 1.0};
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (!(lr > 0)) throw std::invalid_argument("lr must be positive");
    for (double w : loss_weights)
      if (!(w > 0)) throw std::invalid_argument("loss weights must be positive");
  }
};

struct Losses {
  double base = 0, target = 0, action = 0, placement = 0, total = 0;
};

inline int batches_per_epoch(std::size_t samples, int batch_size) {
  return static_cast<int>((samples + batch_size - 1) / batch_size);
}

namespace detail {
// Records the four head losses and their weighted sum on `g`; returns the id
// of the total.
template <class T>
int build_losses(PipelineModel<T>& m, nn::Graph<T>& g, std::span<const TrainSample* const> batch,
                 const std::array<double, 4>& weights, Losses& out) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::vector<const SceneRaster*> scenes;
  std::array<std::vector<const PathMap*>, 4> gts;
  for (const auto* s : batch) {
    scenes.push_back(&s->scene);
    gts[0].push_back(&s->gt_base);
    gts[1].push_back(&s->gt_target);
    gts[2].push_back(&s->gt_action);
    gts[3].push_back(&s->gt_placement);
  }
  const auto n = forward_pipeline(m, g, g.input(scene_tensor<T>(scenes)));
  const int heads[4] = {n.base, n.target, n.action, n.placement};
  std::vector<std::pair<int, T>> terms;
  for (int k = 0; k < 4; ++k)
    terms.emplace_back(g.bce(heads[k], map_tensor<T>(gts[k])), static_cast<T>(weights[k]));
  const int total = g.weighted_sum(terms);
  out = {g.scalar(terms[0].first), g.scalar(terms[1].first), g.scalar(terms[2].first),
         g.scalar(terms[3].first), g.scalar(total)};
  return total;
}
}  // namespace detail

// Builds the joint loss on `g` and runs backward, leaving gradients in the
// model's parameters. Returns the losses of the forward pass.
template <class T>
Losses accumulate_gradients(PipelineModel<T>& m, nn::Graph<T>& g,
                            std::span<const TrainSample* const> batch,
                            const std::array<double, 4>& weights) {
  Losses l;
  g.backward(detail::build_losses(m, g, batch, weights, l));
  return l;
}

// Forward-only losses.
template <class T>
Losses batch_losses(PipelineModel<T>& m, std::span<const TrainSample* const> batch,
                    const std::array<double, 4>& weights = {1.0, 1.0, 1.0, 1.0}) {
  nn::Graph<T> g(false);
  Losses l;
  detail::build_losses(m, g, batch, weights, l);
  return l;
}

template <class T>
Losses joint_train_step(PipelineModel<T>& m, nn::Adam<T>& opt,
                        std::span<const TrainSample* const> batch, const TrainConfig& cfg) {
  m.zero_grad();
  nn::Graph<T> g;
  const Losses l = accumulate_gradients(m, g, batch, cfg.loss_weights);
  opt.step(m.parameters());
  return l;
}

struct TrainResult {
  std::vector<double> epoch_loss;  // mean total loss per epoch
  int batches_per_epoch = 0;
  std::int64_t steps = 0;
};

using TrainProgress = std::function<void(int epoch, int batch, const Losses&)>;

template <class T>
TrainResult train(PipelineModel<T>& m, std::span<const TrainSample> data, const TrainConfig& cfg,
                  const TrainProgress& progress = {}) {
  cfg.validate();
  if (data.empty()) throw EmptyDataset("training set has no samples");
  for (const auto& s : data)
    if (s.scene.resolution != m.config.resolution)
      throw ShapeMismatch("train: sample resolution " + std::to_string(s.scene.resolution) +
                          " vs model " + std::to_string(m.config.resolution));
  nn::Adam<T> opt(nn::AdamConfig{.lr = cfg.lr});
  TrainResult res;
  res.batches_per_epoch = batches_per_epoch(data.size(), cfg.batch_size);
  std::vector<std::size_t> order(data.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(hash_combine(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_u64() % i]);
    double sum = 0.0;
    for (int b = 0; b < res.batches_per_epoch; ++b) {
      std::vector<const TrainSample*> batch;
      const std::size_t lo = static_cast<std::size_t>(b) * cfg.batch_size;
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(&data[order[i]]);
      const Losses l = joint_train_step(m, opt, std::span<const TrainSample* const>(batch), cfg);
      sum += l.total * static_cast<double>(batch.size());
      ++res.steps;
      if (progress) progress(epoch, b, l);
    }
    res.epoch_loss.push_back(sum / static_cast<double>(data.size()));
  }
  return res;
}

}  // namespace pathforge
