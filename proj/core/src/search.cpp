#include "synthmatch/search.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "synthmatch/dataset.hpp"
#include "synthmatch/error.hpp"
#include "synthmatch/io.hpp"

namespace synthmatch {

std::string SearchTrace::to_csv() const {
  std::string out = "step,mfccd,best_mfccd\n";
  char buf[96];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e.step, e.mfccd, e.best_mfccd);
    out += buf;
  }
  return out;
}

void GaConfig::validate() const {
  if (population < 2) throw UserError("ga.population must be >= 2");
  if (tournament < 1 || tournament > population) throw UserError("ga.tournament must be in 1..population");
  if (crossover_rate < 0.0 || crossover_rate > 1.0) throw UserError("ga.crossover_rate must be in [0, 1]");
  if (mutation_rate < 0.0 || mutation_rate > 1.0) throw UserError("ga.mutation_rate must be in [0, 1]");
  if (step_probability < 0.0 || step_probability > 1.0) throw UserError("ga.step_probability must be in [0, 1]");
  if (elitism >= population) throw UserError("ga.elitism must be smaller than the population");
}

namespace {

// Render-and-compare with a cache keyed by the class vector. Only cache
// misses count against the budget and appear in the trace.
class Objective {
 public:
  Objective(const AudioBuffer& target, const MidiNote& note, const SearchBudget& budget,
            const dsp::MfccConfig& mfcc_cfg)
      : note_(note), budget_(budget), length_(target.size()), mfcc_(mfcc_cfg, target.sample_rate) {
    if (budget.max_evaluations < 1) throw UserError("search budget must be at least 1 evaluation");
    if (target.empty()) throw UserError("search target audio is empty");
    target_ = mfcc_(target);
  }

  std::optional<double> operator()(const Preset& p) {
    const auto it = cache_.find(p.classes());
    if (it != cache_.end()) {
      ++hits_;
      return it->second;
    }
    if (exhausted()) return std::nullopt;
    AudioBuffer a = render(p, note_, mfcc_.sample_rate());
    a.samples.resize(length_, 0.0);
    const double d = dsp::mfccd(target_, mfcc_(a));
    cache_.emplace(p.classes(), d);
    if (trace_.entries.empty() || d < best_value_) {
      best_value_ = d;
      best_ = p;
    }
    trace_.entries.push_back({trace_.entries.size() + 1, candidate_id(p), d, best_value_});
    return d;
  }

  bool exhausted() const {
    if (trace_.entries.size() >= budget_.max_evaluations) return true;
    return budget_.early_stop && !trace_.entries.empty() && best_value_ <= *budget_.early_stop;
  }

  SearchResult result() const {
    SearchResult r;
    r.best = best_;
    r.best_mfccd = best_value_;
    r.trace = trace_;
    r.cache_hits = hits_;
    return r;
  }

 private:
  static std::string candidate_id(const Preset& p) {
    std::string key;
    for (int c : p.classes()) key += std::to_string(c) + ",";
    return fnv1a_hex(key).substr(0, 12);
  }

  MidiNote note_;
  SearchBudget budget_;
  std::size_t length_;
  dsp::MfccExtractor mfcc_;
  dsp::MfccMatrix target_;
  std::map<std::vector<int>, double> cache_;
  SearchTrace trace_;
  Preset best_;
  double best_value_ = std::numeric_limits<double>::infinity();
  std::size_t hits_ = 0;
};

using SearchRng = std::mt19937_64;

int step_class(int c, int k, SearchRng& rng) {
  if (k <= 1) return c;
  int dir = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
  if (c + dir < 0 || c + dir >= k) dir = -dir;
  return c + dir;
}

}  // namespace

SearchResult hill_climb(const AudioBuffer& target, const SpacePtr& space, const MidiNote& note,
                        const SearchBudget& budget, const HillClimbConfig& cfg, const dsp::MfccConfig& mfcc_cfg) {
  Objective f(target, note, budget, mfcc_cfg);
  const auto& free = space->free_indices();
  if (free.empty()) throw UserError("space '" + space->id() + "' has no free parameters to search");
  SearchRng rng(budget.seed);
  DatasetRng preset_rng(budget.seed ^ 0x9e3779b97f4a7c15ULL);

  Preset current = sample_random_preset(space, preset_rng);
  double value = *f(current);
  std::size_t stall = 0, restarts = 0;
  // Cache hits are free, so bound the number of proposals as well.
  const std::size_t max_proposals = 100 * budget.max_evaluations + 1000;
  std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
  for (std::size_t proposals = 0; proposals < max_proposals && !f.exhausted(); ++proposals) {
    const std::size_t i = free[pick(rng)];
    Preset cand = current;
    cand.set(i, step_class(current.at(i), space->descriptor(i).class_count, rng));
    const auto v = f(cand);
    if (!v) break;
    if (*v < value) {
      current = std::move(cand);
      value = *v;
      stall = 0;
    } else if (++stall >= cfg.patience) {
      current = sample_random_preset(space, preset_rng);
      const auto r = f(current);
      if (!r) break;
      value = *r;
      stall = 0;
      ++restarts;
    }
  }
  SearchResult res = f.result();
  res.restarts = restarts;
  return res;
}

SearchResult genetic_search(const AudioBuffer& target, const SpacePtr& space, const MidiNote& note,
                            const SearchBudget& budget, const GaConfig& cfg, const std::vector<Preset>& initial,
                            const dsp::MfccConfig& mfcc_cfg) {
  cfg.validate();
  Objective f(target, note, budget, mfcc_cfg);
  const auto& free = space->free_indices();
  if (free.empty()) throw UserError("space '" + space->id() + "' has no free parameters to search");
  SearchRng rng(budget.seed);
  DatasetRng preset_rng(budget.seed ^ 0x9e3779b97f4a7c15ULL);
  const double mutation = cfg.mutation_rate > 0.0 ? cfg.mutation_rate : 1.0 / static_cast<double>(free.size());

  std::vector<Preset> pop;
  for (const auto& p : initial) {
    if (pop.size() == cfg.population) break;
    if (p.space().id() != space->id()) throw UserError("initial population preset belongs to another space");
    pop.push_back(p);
  }
  while (pop.size() < cfg.population) pop.push_back(sample_random_preset(space, preset_rng));

  std::vector<double> fit;
  for (const auto& p : pop) {
    const auto v = f(p);
    if (!v) break;
    fit.push_back(*v);
  }
  std::size_t generations = 0;
  if (fit.size() < pop.size()) {
    SearchResult r = f.result();
    return r;
  }

  auto tournament = [&]() -> std::size_t {
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    std::size_t best = pick(rng);
    for (std::size_t t = 1; t < cfg.tournament; ++t) {
      const std::size_t c = pick(rng);
      if (fit[c] < fit[best]) best = c;
    }
    return best;
  };

  std::bernoulli_distribution do_cross(cfg.crossover_rate), coin(0.5), do_mutate(mutation),
      do_step(cfg.step_probability);
  while (!f.exhausted()) {
    std::vector<std::size_t> rank(pop.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });

    std::vector<Preset> next;
    std::vector<double> next_fit;
    for (std::size_t e = 0; e < cfg.elitism; ++e) {
      next.push_back(pop[rank[e]]);
      next_fit.push_back(fit[rank[e]]);
    }
    bool out_of_budget = false;
    while (next.size() < cfg.population) {
      const Preset& a = pop[tournament()];
      const Preset& b = pop[tournament()];
      Preset child = a;
      if (do_cross(rng))
        for (std::size_t i : free)
          if (coin(rng)) child.set(i, b.at(i));
      for (std::size_t i : free) {
        if (!do_mutate(rng)) continue;
        const int k = space->descriptor(i).class_count;
        child.set(i, do_step(rng) ? step_class(child.at(i), k, rng) : std::uniform_int_distribution<int>(0, k - 1)(rng));
      }
      const auto v = f(child);
      if (!v) {
        out_of_budget = true;
        break;
      }
      next.push_back(std::move(child));
      next_fit.push_back(*v);
    }
    if (out_of_budget) break;
    pop = std::move(next);
    fit = std::move(next_fit);
    ++generations;
  }
  SearchResult r = f.result();
  r.generations = generations;
  return r;
}

}  // namespace synthmatch
