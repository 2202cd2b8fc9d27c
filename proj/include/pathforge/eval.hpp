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

// Folds, the attempt loop, and the auccess / solved-within-k metrics.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pathforge/action_synth.hpp"
#include "pathforge/pipeline.hpp"

namespace pathforge {

struct InsufficientTemplates : Error {
  explicit InsufficientTemplates(const std::string& w) : Error("InsufficientTemplates", w) {}
};
struct EmptyRecords : Error {
  explicit EmptyRecords(const std::string& w) : Error("EmptyRecords", w) {}
};

inline constexpr int kMaxAttempts = 100;
inline constexpr int kDefaultFolds = 10;

enum class Setting { Within, Cross };

inline const char* setting_name(Setting s) { return s == Setting::Within ? "within" : "cross"; }
inline Setting setting_from_name(const std::string& s) {
  if (s == "within") return Setting::Within;
  if (s == "cross") return Setting::Cross;
  throw std::invalid_argument("unknown setting '" + s + "'");
}

// Template id of a "TTTTT:VVV" task id.
inline int template_of(const std::string& task) {
  const auto colon = task.find(':');
  if (colon == std::string::npos || colon == 0)
    throw std::invalid_argument("malformed task id '" + task + "'");
  return std::stoi(task.substr(0, colon));
}

struct FoldSplit {
  int fold_id = 0;
  Setting setting = Setting::Within;
  std::vector<std::string> train, dev, test;

  bool operator==(const FoldSplit&) const = default;
};

namespace detail {

inline std::uint64_t string_hash(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed);
  for (unsigned char c : s) h = hash_combine(h, c);
  return h;
}

// Group index in [0, n) of each key: keys ranked by seeded hash, rank mod n.
template <class Key, class HashFn>
std::map<Key, int> rank_groups(std::vector<Key> keys, int n, HashFn&& hash) {
  std::sort(keys.begin(), keys.end(), [&](const Key& a, const Key& b) {
    const auto ha = hash(a), hb = hash(b);
    return ha != hb ? ha < hb : a < b;
  });
  std::map<Key, int> group;
  for (std::size_t i = 0; i < keys.size(); ++i) group[keys[i]] = static_cast<int>(i % n);
  return group;
}

}  // namespace detail

// Within: each template's variants are split into n groups; fold f tests on
// group f, validates on group f+1 and trains on the rest. Cross: the same
// rotation over whole templates.
inline std::vector<FoldSplit> make_folds(const std::vector<std::string>& tasks,
                                         int n_folds, Setting setting, std::uint64_t seed) {
  if (n_folds < 3) throw std::invalid_argument("make_folds: need at least 3 folds");
  std::map<int, std::vector<std::string>> by_template;
  for (const auto& t : tasks) by_template[template_of(t)].push_back(t);

  std::map<std::string, int> group;
  if (setting == Setting::Cross) {
    if (static_cast<int>(by_template.size()) < n_folds)
      throw InsufficientTemplates(std::to_string(by_template.size()) + " templates for " +
                                  std::to_string(n_folds) + " cross-template folds");
    std::vector<int> tids;
    for (const auto& [tid, _] : by_template) tids.push_back(tid);
    const auto tg = detail::rank_groups(tids, n_folds, [&](int tid) {
      return hash_combine(seed, static_cast<std::uint64_t>(tid));
    });
    for (const auto& t : tasks) group[t] = tg.at(template_of(t));
  } else {
    for (const auto& [tid, ids] : by_template) {
      const auto g = detail::rank_groups(ids, n_folds, [&](const std::string& id) {
        return detail::string_hash(id, seed);
      });
      group.insert(g.begin(), g.end());
    }
  }

  std::vector<FoldSplit> folds(n_folds);
  for (int f = 0; f < n_folds; ++f) {
    folds[f].fold_id = f;
    folds[f].setting = setting;
    for (const auto& t : tasks) {
      const int g = group.at(t);
      if (g == f)
        folds[f].test.push_back(t);
      else if (g == (f + 1) % n_folds)
        folds[f].dev.push_back(t);
      else
        folds[f].train.push_back(t);
    }
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Attempts

struct Attempt {
  ActionVector action;
  bool valid = false;
  bool solved = false;

  bool operator==(const Attempt&) const = default;
};

struct AttemptRecord {
  std::string task_id;
  std::vector<Attempt> attempts;
  std::optional<int> first_solve_attempt;  // 1-based

  bool operator==(const AttemptRecord&) const = default;
};

// candidate(t, k): action for 1-based slot t after k invalid resamples.
using CandidateFn = std::function<ActionVector(int t, int resample)>;

// Runs slots 1..max_attempts, stopping at the first solve. Invalid placements
// are resampled up to kMaxResamples times; a slot that never yields a valid
// placement is recorded as an invalid attempt.
inline AttemptRecord run_attempts(const TaskSpec& task, const CandidateFn& candidate,
                                  int max_attempts = kMaxAttempts) {
  AttemptRecord rec;
  rec.task_id = task_id(task);
  for (int t = 1; t <= max_attempts; ++t) {
    Attempt at;
    for (int k = 0; k <= kMaxResamples; ++k) {
      at.action = candidate(t, k);
      if (auto placed = place_action_ball(task.scene, at.action)) {
        at.valid = true;
        at.solved = simulate_rollout(*placed, kDefaultMaxSteps, kDefaultMaxSteps).solved;
        break;
      }
    }
    rec.attempts.push_back(at);
    if (at.solved) {
      rec.first_solve_attempt = t;
      break;
    }
  }
  return rec;
}

struct SolvePlan {
  Prediction prediction;
  std::vector<Proposal> proposals;  // refined, by descending score
};

template <class T>
SolvePlan plan_actions(PipelineModel<T>& model, const TaskSpec& task, std::uint64_t seed) {
  SolvePlan plan;
  plan.prediction = predict(model, rasterize_scene(task.scene, model.config.resolution));
  plan.proposals = propose_actions(plan.prediction.placement, seed);
  return plan;
}

template <class T>
AttemptRecord solve_task(PipelineModel<T>& model, const TaskSpec& task,
                         int max_attempts = kMaxAttempts, std::uint64_t seed = 0) {
  const SolvePlan plan = plan_actions(model, task, seed);
  NoiseSchedule sched;
  sched.max_attempts = max_attempts;
  const AttemptStream stream(plan.proposals, sched, hash_combine(seed, 0x57eaULL));
  return run_attempts(task, [&](int t, int k) { return stream.candidate(t, k); }, max_attempts);
}

// Baseline: uniform random actions through the same loop.
inline AttemptRecord solve_task_random(const TaskSpec& task, int max_attempts = kMaxAttempts,
                                       std::uint64_t seed = 0) {
  return run_attempts(
      task,
      [&](int t, int k) {
        CounterRng rng(hash_combine(hash_combine(seed, static_cast<std::uint64_t>(t)),
                                    static_cast<std::uint64_t>(k)));
        const double x = rng.uniform(), y = rng.uniform(), r = rng.uniform();
        return ActionVector{x, y, r};
      },
      max_attempts);
}

// ---------------------------------------------------------------------------
// Metrics

// 100 * Σ_k w_k s_k / Σ_k w_k with w_k = ln(k+1) - ln(k), k = 1..max_k.
inline double auccess(const std::vector<AttemptRecord>& records, int max_k = kMaxAttempts) {
  if (records.empty()) throw EmptyRecords("auccess of no records");
  std::vector<int> solved_at(max_k + 1, 0);
  for (const auto& r : records)
    if (r.first_solve_attempt && *r.first_solve_attempt <= max_k) ++solved_at[*r.first_solve_attempt];
  double num = 0.0, den = 0.0;
  int cumulative = 0;
  for (int k = 1; k <= max_k; ++k) {
    cumulative += solved_at[k];
    const double w = std::log1p(1.0 / k);
    num += w * cumulative / static_cast<double>(records.size());
    den += w;
  }
  return 100.0 * num / den;
}

inline double solved_within_k(const std::vector<AttemptRecord>& records, int k = 10) {
  if (records.empty()) throw EmptyRecords("solved_within_k of no records");
  int n = 0;
  for (const auto& r : records) n += r.first_solve_attempt && *r.first_solve_attempt <= k;
  return 100.0 * n / static_cast<double>(records.size());
}

struct TemplateScore {
  double auccess = 0.0;
  double solved_within_10 = 0.0;
  int n_tasks = 0;

  bool operator==(const TemplateScore&) const = default;
};

struct EvalReport {
  int fold_id = -1;  // -1 for the mean over folds
  Setting setting = Setting::Within;
  std::string agent = "model";
  std::map<int, TemplateScore> per_template;
  double mean_auccess = 0.0;  // mean over templates
  double mean_solved_within_10 = 0.0;

  bool operator==(const EvalReport&) const = default;
};

namespace detail {

inline void fill_means(EvalReport& r) {
  r.mean_auccess = r.mean_solved_within_10 = 0.0;
  for (const auto& [_, s] : r.per_template) {
    r.mean_auccess += s.auccess;
    r.mean_solved_within_10 += s.solved_within_10;
  }
  if (!r.per_template.empty()) {
    r.mean_auccess /= static_cast<double>(r.per_template.size());
    r.mean_solved_within_10 /= static_cast<double>(r.per_template.size());
  }
}

}  // namespace detail

inline EvalReport make_report(int fold_id, Setting setting,
                              const std::vector<AttemptRecord>& records) {
  EvalReport rep;
  rep.fold_id = fold_id;
  rep.setting = setting;
  std::map<int, std::vector<AttemptRecord>> by_template;
  for (const auto& r : records) by_template[template_of(r.task_id)].push_back(r);
  for (const auto& [tid, recs] : by_template)
    rep.per_template[tid] = {auccess(recs), solved_within_k(recs, 10),
                             static_cast<int>(recs.size())};
  detail::fill_means(rep);
  return rep;
}

// Per-template mean over the folds in which the template was tested; a
// template that never appears in a test split has no cell.
inline EvalReport mean_report(const std::vector<EvalReport>& folds) {
  EvalReport mean;
  if (folds.empty()) return mean;
  mean.setting = folds[0].setting;
  mean.agent = folds[0].agent;
  std::map<int, std::pair<TemplateScore, int>> acc;
  for (const auto& f : folds)
    for (const auto& [tid, s] : f.per_template) {
      auto& [sum, n] = acc[tid];
      sum.auccess += s.auccess;
      sum.solved_within_10 += s.solved_within_10;
      sum.n_tasks += s.n_tasks;
      ++n;
    }
  for (auto& [tid, p] : acc)
    mean.per_template[tid] = {p.first.auccess / p.second, p.first.solved_within_10 / p.second,
                              p.first.n_tasks};
  detail::fill_means(mean);
  return mean;
}

// Evaluates each fold's test tasks with `agent(fold, task, seed)`. The per-task
// seed is derived from (fold, task id). Tasks run in parallel; records are
// assembled in test-list order.
using Agent = std::function<AttemptRecord(const FoldSplit&, const TaskSpec&, std::uint64_t)>;

inline std::vector<EvalReport> evaluate(const std::vector<FoldSplit>& folds,
                                        const std::map<std::string, TaskSpec>& tasks,
                                        const Agent& agent, std::uint64_t seed = 0,
                                        const std::string& agent_name = "model") {
  std::vector<EvalReport> out;
  for (const auto& fold : folds) {
    std::vector<AttemptRecord> recs(fold.test.size());
    parallel_for(static_cast<int>(fold.test.size()), [&](int i) {
      const std::string& id = fold.test[i];
      const auto it = tasks.find(id);
      if (it == tasks.end()) {
        recs[i].task_id = id;  // unknown task counts as unsolved
        return;
      }
      const auto task_seed = detail::string_hash(
          id, hash_combine(seed, static_cast<std::uint64_t>(fold.fold_id)));
      try {
        recs[i] = agent(fold, it->second, task_seed);
      } catch (const std::exception&) {
        recs[i] = AttemptRecord{id, {}, std::nullopt};
      }
    });
    EvalReport rep = make_report(fold.fold_id, fold.setting, recs);
    rep.agent = agent_name;
    out.push_back(std::move(rep));
  }
  return out;
}

// Samples whose task is in the fold's train split, matched on
// (template, variant seed).
inline std::vector<TrainSample> fold_train_samples(std::span<const TrainSample> samples,
                                                   const FoldSplit& fold,
                                                   const std::map<std::string, TaskSpec>& tasks) {
  std::set<std::pair<int, std::uint64_t>> keep;
  for (const auto& id : fold.train)
    if (auto it = tasks.find(id); it != tasks.end())
      keep.emplace(it->second.template_id, it->second.variant_seed);
  std::vector<TrainSample> out;
  for (const auto& s : samples)
    if (keep.count({s.template_id, s.variant_seed})) out.push_back(s);
  return out;
}

}  // namespace pathforge
