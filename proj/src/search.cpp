/*
 * Copyright 2026 The voxdx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "voxdx/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "voxdx/error.hpp"
#include "voxdx/train.hpp"

namespace voxdx {

using nlohmann::ordered_json;

namespace {

void check_range(double lo, double hi, const char* what, bool positive) {
  require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi,
          ErrorKind::kInvalidArgument,
          std::string(what) + " range must satisfy lo <= hi");
  if (positive)
    require(lo > 0, ErrorKind::kInvalidArgument,
            std::string(what) + " range must be positive");
}

double log_uniform(double lo, double hi, Rng& rng) {
  if (lo == hi) return lo;
  return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform());
}

double linear_uniform(double lo, double hi, Rng& rng) {
  if (lo == hi) return lo;
  return rng.uniform(lo, hi);
}

template <typename V>
V pick(const std::vector<V>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.below(v.size()))];
}

template <typename V>
bool one_of(const std::vector<V>& v, const V& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

void SearchSpace::validate() const {
  check_range(lr_lo, lr_hi, "lr", true);
  check_range(rc_lo, rc_hi, "rc", true);
  check_range(kp1_lo, kp1_hi, "kp1", true);
  check_range(kp2_lo, kp2_hi, "kp2", true);
  require(kp1_hi <= 1 && kp2_hi <= 1, ErrorKind::kInvalidArgument,
          "keep probabilities cannot exceed 1");
  require(rc_zero_prob >= 0 && rc_zero_prob <= 1, ErrorKind::kInvalidArgument,
          "rc_zero_prob must lie in [0,1]");
  require(!alphas.empty() && !variants.empty() && !norms.empty() &&
              !demographics.empty(),
          ErrorKind::kInvalidArgument, "categorical choices cannot be empty");
  for (double a : alphas)
    require(a >= 0, ErrorKind::kInvalidArgument, "alpha choices must be >= 0");
  base.validate();
}

bool SearchSpace::contains(const SampledConfig& c) const {
  const ModelConfig& m = c.model;
  const bool rc_ok = (m.rc == 0 && rc_zero_prob > 0) || (m.rc >= rc_lo && m.rc <= rc_hi);
  return one_of(variants, m.variant) && one_of(norms, m.norm) &&
         one_of(demographics, m.use_demographics) && one_of(alphas, m.alpha) &&
         rc_ok && m.kp1 >= kp1_lo && m.kp1 <= kp1_hi && m.kp2 >= kp2_lo &&
         m.kp2 <= kp2_hi && c.train.lr0 >= lr_lo && c.train.lr0 <= lr_hi;
}

SampledConfig sample_config(const SearchSpace& space, Rng& rng) {
  space.validate();
  SampledConfig c;
  c.train = space.base;
  c.model.variant = pick(space.variants, rng);
  c.model.norm = pick(space.norms, rng);
  c.model.use_demographics = pick(space.demographics, rng);
  c.train.lr0 = log_uniform(space.lr_lo, space.lr_hi, rng);
  c.model.alpha = pick(space.alphas, rng);
  if (space.rc_zero_prob > 0 && rng.bernoulli(space.rc_zero_prob)) {
    c.model.rc = 0.0;
  } else {
    c.model.rc = log_uniform(space.rc_lo, space.rc_hi, rng);
  }
  c.model.kp1 = linear_uniform(space.kp1_lo, space.kp1_hi, rng);
  c.model.kp2 = linear_uniform(space.kp2_lo, space.kp2_hi, rng);
  return c;
}

bool TrialResult::same_outcome(const TrialResult& o) const {
  return index == o.index && seed == o.seed && name == o.name &&
         config == o.config && ok == o.ok && error == o.error &&
         metrics == o.metrics;
}

void rank_trials(std::vector<TrialResult>& trials) {
  std::sort(trials.begin(), trials.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.metrics.best_dev_f2 != b.metrics.best_dev_f2)
      return a.metrics.best_dev_f2 > b.metrics.best_dev_f2;
    if (a.metrics.epochs != b.metrics.epochs) return a.metrics.epochs < b.metrics.epochs;
    return a.index < b.index;
  });
}

// ---------------------------------------------------------------------------
// Trial records

std::string trial_json(const TrialResult& t) {
  const ModelConfig& m = t.config.model;
  const TrainConfig& tc = t.config.train;
  ordered_json j;
  j["schema"] = "voxdx.trial.v1";
  j["index"] = t.index;
  j["seed"] = t.seed;
  j["name"] = t.name;
  j["ok"] = t.ok;
  j["error"] = t.error;
  j["model"] = {{"variant", to_string(m.variant)},
                {"norm", to_string(m.norm)},
                {"use_demographics", m.use_demographics},
                {"alpha", m.alpha},
                {"rc", m.rc},
                {"kp1", m.kp1},
                {"kp2", m.kp2},
                {"num_classes", m.num_classes}};
  j["train"] = {{"lr0", tc.lr0},
                {"decay_k", tc.decay_k},
                {"decay_steps", tc.decay_steps},
                {"batch_size", tc.batch_size},
                {"max_epochs", tc.max_epochs},
                {"seed", tc.seed},
                {"beta1", tc.beta1},
                {"beta2", tc.beta2},
                {"eps_adam", tc.eps_adam},
                {"patience", tc.patience}};
  j["metrics"] = {{"final_train_f2", t.metrics.final_train_f2},
                  {"best_dev_f2", t.metrics.best_dev_f2},
                  {"epochs", t.metrics.epochs}};
  j["wall_seconds"] = t.wall_seconds;
  return j.dump();
}

TrialResult trial_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    require(j.at("schema") == "voxdx.trial.v1", ErrorKind::kData,
            "unknown trial record schema");
    TrialResult t;
    t.index = j.at("index").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.name = j.at("name").get<std::string>();
    t.ok = j.at("ok").get<bool>();
    t.error = j.at("error").get<std::string>();
    const auto& m = j.at("model");
    t.config.model.variant = parse_variant(m.at("variant").get<std::string>());
    t.config.model.norm = parse_norm(m.at("norm").get<std::string>());
    t.config.model.use_demographics = m.at("use_demographics").get<bool>();
    t.config.model.alpha = m.at("alpha").get<double>();
    t.config.model.rc = m.at("rc").get<double>();
    t.config.model.kp1 = m.at("kp1").get<double>();
    t.config.model.kp2 = m.at("kp2").get<double>();
    t.config.model.num_classes = m.at("num_classes").get<int>();
    const auto& tr = j.at("train");
    TrainConfig& tc = t.config.train;
    tc.lr0 = tr.at("lr0").get<double>();
    tc.decay_k = tr.at("decay_k").get<double>();
    tc.decay_steps = tr.at("decay_steps").get<std::int64_t>();
    tc.batch_size = tr.at("batch_size").get<std::size_t>();
    tc.max_epochs = tr.at("max_epochs").get<int>();
    tc.seed = tr.at("seed").get<std::uint64_t>();
    tc.beta1 = tr.at("beta1").get<double>();
    tc.beta2 = tr.at("beta2").get<double>();
    tc.eps_adam = tr.at("eps_adam").get<double>();
    tc.patience = tr.at("patience").get<int>();
    const auto& mt = j.at("metrics");
    t.metrics.final_train_f2 = mt.at("final_train_f2").get<double>();
    t.metrics.best_dev_f2 = mt.at("best_dev_f2").get<double>();
    t.metrics.epochs = mt.at("epochs").get<int>();
    t.wall_seconds = j.at("wall_seconds").get<double>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("bad trial record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Execution

namespace {

struct PlannedTrial {
  std::string name;
  SampledConfig config;
  std::uint64_t seed;
};

std::map<std::size_t, TrialResult> read_log(const std::filesystem::path& path) {
  std::map<std::size_t, TrialResult> done;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      TrialResult t = trial_from_json(line);
      done[t.index] = std::move(t);
    } catch (const Error&) {
      // A record torn by a crash mid-write; the trial is simply rerun.
    }
  }
  return done;
}

SearchResult execute(const std::vector<PlannedTrial>& plan, const Evaluator& evaluator,
                     const SearchOptions& options) {
  std::map<std::size_t, TrialResult> done;
  if (options.log_path && options.resume) done = read_log(*options.log_path);
  std::ofstream log;
  if (options.log_path) {
    log.open(*options.log_path, options.resume ? std::ios::app : std::ios::trunc);
    require(static_cast<bool>(log), ErrorKind::kIo,
            "cannot open trial log " + options.log_path->string());
  }

  std::vector<TrialResult> all;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const PlannedTrial& p = plan[i];
    auto it = done.find(i);
    if (it != done.end() && it->second.seed == p.seed && it->second.config == p.config &&
        it->second.name == p.name) {
      all.push_back(it->second);
      if (options.on_trial) options.on_trial(all.back());
      continue;
    }
    TrialResult t;
    t.index = i;
    t.seed = p.seed;
    t.name = p.name;
    t.config = p.config;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      t.metrics = evaluator(p.config, p.seed);
      const auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
      require(in01(t.metrics.final_train_f2) && in01(t.metrics.best_dev_f2),
              ErrorKind::kNumerical, "evaluator returned an F2 outside [0,1]");
      t.ok = true;
    } catch (const std::exception& e) {
      t.ok = false;
      t.error = e.what();
      t.metrics = {};
    }
    t.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log.is_open()) {
      log << trial_json(t) << '\n';
      log.flush();
    }
    all.push_back(t);
    if (options.on_trial) options.on_trial(t);
  }

  SearchResult r;
  for (auto& t : all) (t.ok ? r.ranked : r.failures).push_back(std::move(t));
  rank_trials(r.ranked);
  return r;
}

std::string trial_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial-%04zu", i);
  return buf;
}

}  // namespace

SearchResult random_search(const SearchSpace& space, std::size_t budget,
                           const Evaluator& evaluator, std::uint64_t master_seed,
                           const SearchOptions& options) {
  require(budget >= 1, ErrorKind::kInvalidArgument, "budget must be >= 1");
  space.validate();
  std::vector<PlannedTrial> plan;
  for (std::size_t i = 0; i < budget; ++i) {
    const std::uint64_t seed = derive_seed(master_seed, i);
    Rng rng(seed);
    SampledConfig c = sample_config(space, rng);
    c.train.seed = seed;
    plan.push_back({trial_name(i), c, seed});
  }
  return execute(plan, evaluator, options);
}

std::vector<GridRow> table3_preset(const TrainConfig& base) {
  struct Row {
    const char* name;
    Variant variant;
    bool demo;
    NormKind norm;
    double lr, alpha, rc, kp1, kp2;
  };
  constexpr Variant O = Variant::kOriginal, S = Variant::kSimplified;
  constexpr NormKind N = NormKind::kNone, B = NormKind::kBatch, G = NormKind::kGroup;
  static const Row rows[] = {
      {"OM", O, false, N, 0.00005, 0, 0, 1, 1},
      {"SM", S, false, N, 0.00005, 0, 0, 1, 1},
      {"OM-GA", O, true, N, 0.00020, 0, 0, 1, 1},
      {"SM-GA", S, true, N, 0.00005, 0, 0, 1, 1},
      {"OM-GA-B", O, true, B, 0.00005, 0.01, 0, 1, 1},
      {"SM-GA-B", S, true, B, 0.00001, 0.01, 0, 1, 1},
      {"OM-GA-G", O, true, G, 0.00001, 0.01, 0, 1, 1},
      {"SM-GA-G", S, true, G, 0.00001, 0.01, 0, 1, 1},
      {"OM-GA-GR", O, true, G, 0.00001, 0.01, 0.05, 1, 1},
      {"SM-GA-GR", S, true, G, 0.00001, 0.01, 0.001, 1, 1},
      {"OM-GA-GRD", O, true, G, 0.00001, 0.01, 0.05, 0.2, 0.35},
      {"SM-GA-GRD", S, true, G, 0.00001, 0.01, 0.001, 0.45, 0.5},
  };
  std::vector<GridRow> out;
  for (const Row& r : rows) {
    GridRow g;
    g.name = r.name;
    g.config.model.variant = r.variant;
    g.config.model.use_demographics = r.demo;
    g.config.model.norm = r.norm;
    g.config.model.alpha = r.alpha;
    g.config.model.rc = r.rc;
    g.config.model.kp1 = r.kp1;
    g.config.model.kp2 = r.kp2;
    g.config.train = base;
    g.config.train.lr0 = r.lr;
    out.push_back(g);
  }
  return out;
}

SearchResult run_grid(std::span<const GridRow> rows, std::size_t budget,
                      const Evaluator& evaluator, std::uint64_t master_seed,
                      const SearchOptions& options) {
  require(budget >= 1 && budget <= rows.size(), ErrorKind::kInvalidArgument,
          "grid budget must lie in [1," + std::to_string(rows.size()) + "]");
  std::vector<PlannedTrial> plan;
  for (std::size_t i = 0; i < budget; ++i) {
    const std::uint64_t seed = derive_seed(master_seed, i);
    SampledConfig c = rows[i].config;
    c.train.seed = seed;
    plan.push_back({rows[i].name, c, seed});
  }
  return execute(plan, evaluator, options);
}

std::string table_report(const SearchResult& result) {
  std::vector<const TrialResult*> rows;
  for (const auto& t : result.ranked) rows.push_back(&t);
  for (const auto& t : result.failures) rows.push_back(&t);
  std::sort(rows.begin(), rows.end(),
            [](const TrialResult* a, const TrialResult* b) { return a->index < b->index; });
  std::ostringstream o;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s %-12s %-9s %-9s %s\n", "No.", "Experiment",
                "Train F2", "Dev F2", "Epochs");
  o << buf;
  for (const TrialResult* t : rows) {
    if (t->ok) {
      std::snprintf(buf, sizeof buf, "%-4zu %-12s %-9.3f %-9.3f %d\n", t->index + 1,
                    t->name.c_str(), t->metrics.final_train_f2, t->metrics.best_dev_f2,
                    t->metrics.epochs);
    } else {
      std::snprintf(buf, sizeof buf, "%-4zu %-12s failed: %s\n", t->index + 1,
                    t->name.c_str(), t->error.c_str());
    }
    o << buf;
  }
  return o.str();
}

Evaluator training_evaluator(std::span<const Sample> train_set,
                             std::span<const Sample> dev_set, Extents3 extents,
                             const DemographicEncoder& encoder) {
  require(!train_set.empty() && !dev_set.empty(), ErrorKind::kInvalidArgument,
          "search needs non-empty train and dev sets");
  return [=](const SampledConfig& c, std::uint64_t seed) {
    Model model = build_model(c.model, extents, seed);
    model.encoder() = encoder;
    TrainConfig tc = c.train;
    tc.seed = seed;
    const TrainHistory h = train(model, train_set, dev_set, tc);
    TrialMetrics m;
    m.epochs = static_cast<int>(h.epochs.size());
    if (!h.epochs.empty()) m.final_train_f2 = h.epochs.back().train_f2;
    m.best_dev_f2 = h.best_dev_f2;
    return m;
  };
}

}  // namespace voxdx
