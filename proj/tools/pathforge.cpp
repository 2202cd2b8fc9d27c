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


// pathforge command-line tool.
//
// Exit status: 0 success, 1 usage error, 2 data error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pathforge/api.hpp"

namespace pf = pathforge;
using pf::io::json;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << msg << std::endl; }

pf::ActionVector parse_action(const std::string& text) {
  std::stringstream ss(text);
  std::vector<double> v;
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw UsageError("");
    } catch (const std::exception&) {
      throw UsageError("--replay expects x,y,r; got '" + text + "'");
    }
  }
  if (v.size() != 3) throw UsageError("--replay expects x,y,r; got '" + text + "'");
  const pf::ActionVector a{v[0], v[1], v[2]};
  if (!pf::action_in_range(a)) throw UsageError("--replay components must lie in [0, 1]");
  return a;
}

const pf::TaskSpec& find_task(const pf::io::Suite& suite, const std::string& id) {
  const pf::SuiteTask* t = suite.find(id);
  if (!t) throw UsageError("task " + id + " is not in the suite");
  return t->task;
}

// "models/fold{fold}.pfwt" -> "models/fold3.pfwt"; paths without the
// placeholder are shared by every fold.
std::string fold_path(std::string pattern, int fold) {
  const std::string key = "{fold}";
  for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key))
    pattern.replace(pos, key.size(), std::to_string(fold));
  return pattern;
}

std::string table_path(const std::string& json_path) {
  const auto dot = json_path.rfind('.');
  const auto slash = json_path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return json_path + ".txt";
  return json_path.substr(0, dot) + ".txt";
}

void write_text(const std::string& path, const std::string& text) {
  pf::io::write_file(path, pf::io::Bytes(text.begin(), text.end()));
}

// ---------------------------------------------------------------------------

struct GenTasks {
  pf::SuiteConfig cfg;
  std::string out;

  int run() const {
    pf::io::Suite suite;
    suite.config = cfg;
    suite.tasks = pf::build_task_suite(cfg);
    pf::io::save_suite(out, suite);
    log("wrote " + std::to_string(suite.tasks.size()) + " tasks to " + out);
    return 0;
  }
};

struct GenData {
  std::string suite_path, out;
  int per_task = 5;
  int budget = pf::kDefaultSearchBudget;
  int resolution = pf::kDefaultResolution;
  std::uint64_t seed = 0;

  int run() const {
    const auto suite = pf::io::load_suite(suite_path);
    std::vector<pf::TaskSpec> tasks;
    for (const auto& t : suite.tasks) tasks.push_back(t.task);
    pf::DatasetStats st;
    const auto samples = pf::generate_dataset(tasks, per_task, budget, seed, resolution, &st);
    for (const auto& id : st.excluded)
      log("excluded " + id + ": fewer than " + std::to_string(per_task) + " solutions in budget");
    if (samples.empty()) throw pf::DataError("EmptyDataset", "no task yielded enough solutions");
    pf::io::save_dataset(out, samples);
    log("wrote " + std::to_string(samples.size()) + " samples from " +
        std::to_string(st.tasks_used) + " tasks to " + out);
    return 0;
  }
};

struct Train {
  std::string data, out, suite_path, setting = "within";
  pf::TrainConfig cfg;
  int width = 16;
  int folds = pf::kDefaultFolds;
  int fold = -1;
  std::uint64_t split_seed = 0;

  int run() const {
    auto samples = pf::io::load_dataset(data);
    if (samples.empty()) throw pf::EmptyDataset(data + " has no samples");
    if (fold >= 0) {
      if (suite_path.empty()) throw UsageError("--fold needs --suite");
      if (fold >= folds) throw UsageError("--fold must be below --folds");
      const auto suite = pf::io::load_suite(suite_path);
      const auto split =
          pf::make_folds(suite.ids(), folds, pf::setting_from_name(setting), split_seed);
      samples = pf::fold_train_samples(samples, split[fold], suite.by_id());
      log("fold " + std::to_string(fold) + " (" + setting + "): " +
          std::to_string(samples.size()) + " training samples");
    }
    pf::Model model(pf::ModelConfig{samples.front().scene.resolution, width, cfg.seed});
    const int batches = pf::batches_per_epoch(samples.size(), cfg.batch_size);
    const auto res = pf::train(model, samples, cfg, [&](int epoch, int batch, const pf::Losses& l) {
      if (batch + 1 == batches) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "epoch %d/%d  last batch: base %.4f target %.4f action %.4f placement %.4f",
                      epoch + 1, cfg.epochs, l.base, l.target, l.action, l.placement);
        log(buf);
      }
    });
    if (!res.epoch_loss.empty()) log("final epoch loss " + std::to_string(res.epoch_loss.back()));
    pf::io::save_checkpoint(out, model);
    log("wrote " + out);
    return 0;
  }
};

struct Eval {
  std::string model, suite_path, setting = "within", agent = "model", out;
  int folds = pf::kDefaultFolds;
  std::vector<int> fold_ids;
  int max_attempts = pf::kMaxAttempts;
  std::uint64_t seed = 0;

  int run() const {
    const auto suite = pf::io::load_suite(suite_path);
    const auto set = pf::setting_from_name(setting);
    auto split = pf::make_folds(suite.ids(), folds, set, seed);
    if (!fold_ids.empty()) {
      std::vector<pf::FoldSplit> chosen;
      for (int f : fold_ids) {
        if (f < 0 || f >= folds) throw UsageError("--fold-ids entries must be below --folds");
        chosen.push_back(split[f]);
      }
      split = std::move(chosen);
    }

    std::map<std::string, std::unique_ptr<pf::Model>> models;
    std::map<int, pf::Model*> by_fold;
    if (agent == "model") {
      if (model.empty()) throw UsageError("--model is required for the model agent");
      for (const auto& f : split) {
        const std::string path = fold_path(model, f.fold_id);
        auto& slot = models[path];
        if (!slot) slot = std::make_unique<pf::Model>(pf::io::load_checkpoint(path));
        by_fold[f.fold_id] = slot.get();
      }
    }
    const pf::Agent fn = [&](const pf::FoldSplit& f, const pf::TaskSpec& t, std::uint64_t s) {
      if (agent == "random") return pf::solve_task_random(t, max_attempts, s);
      return pf::solve_task(*by_fold.at(f.fold_id), t, max_attempts, s);
    };
    const auto reports = pf::evaluate(split, suite.by_id(), fn, seed, agent);
    pf::EvalReport mean = pf::mean_report(reports);
    mean.agent = agent;

    json j{{"setting", setting},
           {"agent", agent},
           {"folds", folds},
           {"seed", seed},
           {"max_attempts", max_attempts},
           {"mean", pf::io::to_json(mean)}};
    j["fold_reports"] = json::array();
    for (const auto& r : reports) j["fold_reports"].push_back(pf::io::to_json(r));
    const std::string table = pf::io::report_table(mean, suite.config.n_templates);
    if (!out.empty()) {
      write_text(out, j.dump(2) + "\n");
      write_text(table_path(out), table);
    }
    std::cout << table;
    return 0;
  }
};

struct Solve {
  std::string model, suite_path, task, replay;
  int max_attempts = pf::kMaxAttempts;
  std::uint64_t seed = 0;

  int run() const {
    const auto suite = pf::io::load_suite(suite_path);
    const pf::TaskSpec& t = find_task(suite, task);
    if (!replay.empty()) {
      const pf::ActionVector a = parse_action(replay);
      const pf::api::Replay r = pf::api::replay_action(t, a);
      json j = pf::api::to_json(r);
      j.erase("frames");
      j.erase("body_ids");
      j["task"] = task;
      j["action"] = pf::io::to_json(a);
      std::cout << j.dump() << std::endl;
      return 0;
    }
    if (model.empty()) throw UsageError("--model is required unless --replay is given");
    auto m = pf::io::load_checkpoint(model);
    const pf::AttemptRecord rec = pf::solve_task(m, t, max_attempts, seed);
    json attempts = json::array();
    for (const auto& at : rec.attempts)
      attempts.push_back(
          {{"action", pf::io::to_json(at.action)}, {"valid", at.valid}, {"solved", at.solved}});
    json j{{"task", task},
           {"solved", rec.first_solve_attempt.has_value()},
           {"first_solve_attempt",
            rec.first_solve_attempt ? json(*rec.first_solve_attempt) : json(nullptr)},
           {"attempts", attempts}};
    std::cout << j.dump() << std::endl;
    return 0;
  }
};

struct Serve {
  std::string model, suite_path, host = "127.0.0.1";
  int port = 8080;

  int run() const {
    pf::api::Service svc(pf::io::load_checkpoint(model), pf::io::load_suite(suite_path));
    httplib::Server srv;
    svc.mount(srv);
    log("serving " + std::to_string(svc.suite().tasks.size()) + " tasks on http://" + host + ":" +
        std::to_string(port));
    if (!srv.listen(host, port)) throw pf::DataError("IoError", "cannot listen on port " +
                                                                    std::to_string(port));
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-driven physical puzzle solver: task generation, training, evaluation."};
  app.require_subcommand(1);
  std::function<int()> run;

  GenTasks gt;
  auto* c = app.add_subcommand("gen-tasks", "Generate a validated task suite");
  c->add_option("--templates", gt.cfg.n_templates, "Number of templates")->capture_default_str();
  c->add_option("--variants", gt.cfg.variants_per_template, "Variants per template")
      ->capture_default_str();
  c->add_option("--seed", gt.cfg.seed, "Suite seed")->capture_default_str();
  c->add_option("--budget", gt.cfg.search_budget, "Random-search rollouts per variant")
      ->capture_default_str();
  c->add_option("--out", gt.out, "Output manifest (JSON)")->required();
  c->callback([&] { run = [&] { return gt.run(); }; });

  GenData gd;
  c = app.add_subcommand("gen-data", "Collect solving rollouts into a training dataset");
  c->add_option("--suite", gd.suite_path, "Task suite manifest")->required();
  c->add_option("--rollouts-per-task", gd.per_task, "Solving rollouts per task")
      ->capture_default_str();
  c->add_option("--budget", gd.budget, "Random-search rollouts per task")->capture_default_str();
  c->add_option("--resolution", gd.resolution, "Bitmap resolution")->capture_default_str();
  c->add_option("--seed", gd.seed, "Search seed")->capture_default_str();
  c->add_option("--out", gd.out, "Output dataset (.pfrd)")->required();
  c->callback([&] { run = [&] { return gd.run(); }; });

  Train tr;
  c = app.add_subcommand("train", "Train the four networks jointly");
  c->add_option("--data", tr.data, "Dataset (.pfrd)")->required();
  c->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  c->add_option("--batch", tr.cfg.batch_size)->capture_default_str();
  c->add_option("--lr", tr.cfg.lr)->capture_default_str();
  c->add_option("--seed", tr.cfg.seed, "Initialisation and shuffling seed")->capture_default_str();
  c->add_option("--width", tr.width, "Channels of the first conv layer")->capture_default_str();
  c->add_option("--suite", tr.suite_path, "Suite manifest, required with --fold");
  c->add_option("--setting", tr.setting)->check(CLI::IsMember({"within", "cross"}))
      ->capture_default_str();
  c->add_option("--folds", tr.folds)->capture_default_str();
  c->add_option("--fold", tr.fold, "Train only on this fold's train split");
  c->add_option("--split-seed", tr.split_seed, "Fold assignment seed")->capture_default_str();
  c->add_option("--out", tr.out, "Output checkpoint (.pfwt)")->required();
  c->callback([&] { run = [&] { return tr.run(); }; });

  Eval ev;
  c = app.add_subcommand("eval", "Evaluate an agent over cross-validation folds");
  c->add_option("--model", ev.model, "Checkpoint; '{fold}' is replaced by the fold id");
  c->add_option("--suite", ev.suite_path, "Task suite manifest")->required();
  c->add_option("--setting", ev.setting)->check(CLI::IsMember({"within", "cross"}))
      ->capture_default_str();
  c->add_option("--folds", ev.folds)->capture_default_str();
  c->add_option("--fold-ids", ev.fold_ids, "Evaluate only these folds")->delimiter(',');
  c->add_option("--agent", ev.agent)->check(CLI::IsMember({"model", "random"}))
      ->capture_default_str();
  c->add_option("--max-attempts", ev.max_attempts)->capture_default_str();
  c->add_option("--seed", ev.seed, "Fold assignment and attempt seed")->capture_default_str();
  c->add_option("--out", ev.out, "Report JSON; the table goes next to it as .txt");
  c->callback([&] { run = [&] { return ev.run(); }; });

  Solve so;
  c = app.add_subcommand("solve", "Solve one task, or replay a single action");
  c->add_option("--model", so.model, "Checkpoint (not needed with --replay)");
  c->add_option("--suite", so.suite_path, "Task suite manifest")->required();
  c->add_option("--task", so.task, "Task id, e.g. 00003:012")->required();
  c->add_option("--max-attempts", so.max_attempts)->capture_default_str();
  c->add_option("--seed", so.seed)->capture_default_str();
  c->add_option("--replay", so.replay, "Simulate one action x,y,r and print the verdict");
  c->callback([&] { run = [&] { return so.run(); }; });

  Serve sv;
  c = app.add_subcommand("serve", "Serve the HTTP API");
  c->add_option("--model", sv.model, "Checkpoint")->required();
  c->add_option("--suite", sv.suite_path, "Task suite manifest")->required();
  c->add_option("--host", sv.host)->capture_default_str();
  c->add_option("--port", sv.port)->capture_default_str();
  c->callback([&] { run = [&] { return sv.run(); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    return run();
  } catch (const UsageError& e) {
    log(std::string("error: ") + e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    log(std::string("error: ") + e.what());
    return kUsage;
  } catch (const pf::Error& e) {
    log("error: " + e.kind() + ": " + e.what());
    return kData;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kData;
  }
}
