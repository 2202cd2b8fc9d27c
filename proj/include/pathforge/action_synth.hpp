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

// Placement map -> ranked actions: threshold sampling, soft-IoU hill climbing
// and the noisy attempt stream.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pathforge/raster.hpp"
#include "pathforge/util.hpp"

namespace pathforge {

struct DegenerateMap : Error {
  explicit DegenerateMap(const std::string& w) : Error("DegenerateMap", w) {}
};

inline constexpr double kProposalThreshold = 0.5;
inline constexpr int kProposals = 5;
inline constexpr int kRefineUpdates = 5;
inline constexpr int kPerturbations = 8;
inline constexpr double kRadiusSigma = 0.05;
inline constexpr int kMaxResamples = 50;

struct Proposal {
  ActionVector action;
  double score = 0.0;
  bool low_confidence = false;

  bool operator==(const Proposal&) const = default;
};

inline ActionVector clamp_action(ActionVector a) {
  return {std::clamp(a.x, 0.0, 1.0), std::clamp(a.y, 0.0, 1.0), std::clamp(a.r, 0.0, 1.0)};
}

namespace detail {

// Soft IoU of the binary disc with `map`, given Σ map. Only the disc's cells
// are visited: off the disc min = 0 and max = map.
inline double disc_overlap(const ActionVector& a, const PathMap& map, double map_sum) {
  double inter = 0.0, disc_map = 0.0, disc_max = 0.0;
  for_each_covered_cell(make_action_ball(a, 0), map.height, map.width, [&](int r, int c) {
    const double m = map.at(r, c);
    inter += std::min(1.0, m);
    disc_map += m;
    disc_max += std::max(1.0, m);
  });
  const double uni = map_sum - disc_map + disc_max;
  if (uni <= 0.0) throw DegenerateMap("disc and map are both empty");
  return inter / uni;
}

}  // namespace detail

// Σ min(disc, map) / Σ max(disc, map) with disc = render_ball_map(a).
inline double overlap_score(const ActionVector& a, const PathMap& map) {
  if (map.height != map.width) throw std::invalid_argument("overlap_score: map must be square");
  return detail::disc_overlap(a, map, map.sum());
}

namespace detail {

// Score function with Σ map cached; DegenerateMap scores 0.
inline auto scorer(const PathMap& map) {
  if (map.height != map.width) throw std::invalid_argument("overlap_score: map must be square");
  return [&map, sum = map.sum()](const ActionVector& a) {
    try {
      return disc_overlap(a, map, sum);
    } catch (const DegenerateMap&) {
      return 0.0;
    }
  };
}

}  // namespace detail

inline std::vector<Proposal> sample_proposals(const PathMap& map, int n, std::uint64_t seed,
                                              double threshold = kProposalThreshold) {
  if (n < 1) throw std::invalid_argument("sample_proposals: n must be >= 1");
  std::vector<int> cells;
  for (std::size_t i = 0; i < map.size(); ++i)
    if (map.data[i] > threshold) cells.push_back(static_cast<int>(i));
  const bool fallback = cells.empty();
  if (fallback)  // first maximum in row-major order
    cells.push_back(static_cast<int>(std::max_element(map.data.begin(), map.data.end()) -
                                     map.data.begin()));
  CounterRng rng(hash_combine(seed, 0x9e0b05a1ULL));
  const auto score = detail::scorer(map);
  std::vector<Proposal> out;
  for (int i = 0; i < n; ++i) {
    const int cell = cells[rng.uniform_int(0, static_cast<int>(cells.size()) - 1)];
    const Vec2 c = cell_center(cell / map.width, cell % map.width, map.height, map.width);
    Proposal p;
    p.action = {c.x, c.y, rng.uniform()};
    p.score = score(p.action);
    p.low_confidence = fallback;
    out.push_back(p);
  }
  return out;
}

// Hill climbing: each round tries kPerturbations Gaussian moves around the
// current best and keeps the best one if it strictly improves the score.
inline Proposal refine_proposal(const Proposal& p, const PathMap& map, int n_updates,
                                std::uint64_t seed) {
  if (n_updates < 0) throw std::invalid_argument("refine_proposal: n_updates must be >= 0");
  Proposal best = p;
  if (n_updates == 0) return best;
  const auto score = detail::scorer(map);
  best.score = score(best.action);
  const double pos_sigma = 2.0 / map.height;
  CounterRng rng(hash_combine(seed, 0x4ef1e5ULL));
  for (int round = 0; round < n_updates; ++round) {
    Proposal cand_best = best;
    for (int k = 0; k < kPerturbations; ++k) {
      const ActionVector a = clamp_action({best.action.x + pos_sigma * rng.normal(),
                                           best.action.y + pos_sigma * rng.normal(),
                                           best.action.r + kRadiusSigma * rng.normal()});
      const double s = score(a);
      if (s > cand_best.score) cand_best = {a, s, best.low_confidence};
    }
    best = cand_best;
  }
  return best;
}

// n proposals, each refined, sorted by descending score (stable on ties).
inline std::vector<Proposal> propose_actions(const PathMap& map, std::uint64_t seed,
                                             int n = kProposals, int n_updates = kRefineUpdates) {
  auto props = sample_proposals(map, n, seed);
  for (int i = 0; i < n; ++i)
    props[i] = refine_proposal(props[i], map, n_updates, hash_combine(seed, 1000 + i));
  std::stable_sort(props.begin(), props.end(),
                   [](const Proposal& a, const Proposal& b) { return a.score > b.score; });
  return props;
}

struct NoiseSchedule {
  double sigma0 = 0.02;
  double growth = 0.002;
  int max_attempts = 100;

  // Noise for 1-based attempt t; attempts up to kProposals use none.
  double sigma(int t) const { return t <= kProposals ? 0.0 : sigma0 + growth * (t - kProposals - 1); }
};

// Candidate actions for each attempt slot. Slot t, resample k is a pure
// function of (seed, t, k): resample 0 is the primary candidate; later
// resamples replace invalid placements without consuming the slot.
class AttemptStream {
 public:
  AttemptStream(std::vector<Proposal> proposals, NoiseSchedule schedule, std::uint64_t seed)
      : props_(std::move(proposals)), sched_(schedule), seed_(seed) {
    if (static_cast<int>(props_.size()) != kProposals)
      throw std::invalid_argument("attempt stream needs exactly 5 proposals");
    for (std::size_t i = 1; i < props_.size(); ++i)
      if (props_[i].score > props_[i - 1].score)
        throw std::invalid_argument("attempt stream proposals must be sorted by score");
  }

  int size() const { return sched_.max_attempts; }
  const NoiseSchedule& schedule() const { return sched_; }

  ActionVector candidate(int t, int resample = 0) const {
    if (t < 1 || t > sched_.max_attempts) throw std::out_of_range("attempt index out of range");
    CounterRng rng(hash_combine(hash_combine(seed_, static_cast<std::uint64_t>(t)),
                                static_cast<std::uint64_t>(resample)));
    if (t <= kProposals) {
      const ActionVector& a = props_[t - 1].action;
      if (resample == 0) return a;
      // An invalid proposal is jittered with the first noise level.
      return jitter(a, sched_.sigma0, rng);
    }
    const int base = rng.uniform_int(0, kProposals - 1);
    return jitter(props_[base].action, sched_.sigma(t), rng);
  }

 private:
  static ActionVector jitter(const ActionVector& a, double sigma, CounterRng& rng) {
    return clamp_action({a.x + sigma * rng.normal(), a.y + sigma * rng.normal(),
                         a.r + sigma * rng.normal()});
  }

  std::vector<Proposal> props_;
  NoiseSchedule sched_;
  std::uint64_t seed_;
};

// Primary candidates of every slot.
inline std::vector<ActionVector> attempt_stream(const std::vector<Proposal>& proposals,
                                                const NoiseSchedule& schedule, std::uint64_t seed) {
  AttemptStream s(proposals, schedule, seed);
  std::vector<ActionVector> out;
  for (int t = 1; t <= s.size(); ++t) out.push_back(s.candidate(t));
  return out;
}

}  // namespace pathforge
