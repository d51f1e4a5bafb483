#include "brwlab/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>

#include "brwlab/errors.hpp"

namespace brwlab {
namespace {

constexpr std::uint64_t kRebuildEvery = 1u << 16;

class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0.0) {
    for (top_bit_ = 1; top_bit_ * 2 <= n; top_bit_ *= 2) {
    }
  }

  void add(std::size_t i, double delta) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
  }

  void rebuild(const std::vector<double>& weights) {
    std::fill(tree_.begin(), tree_.end(), 0.0);
    for (std::size_t i = 1; i < tree_.size(); ++i) {
      tree_[i] += weights[i - 1];
      const std::size_t parent = i + (i & (~i + 1));
      if (parent < tree_.size()) tree_[parent] += tree_[i];
    }
  }

  double total() const {
    double s = 0.0;
    for (std::size_t i = tree_.size() - 1; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

  /// Smallest index whose inclusive prefix sum exceeds `target`; `target` is
  /// left holding the offset inside that index's weight.
  std::size_t find(double& target) const {
    std::size_t pos = 0;
    for (std::size_t step = top_bit_; step > 0; step /= 2) {
      const std::size_t next = pos + step;
      if (next < tree_.size() && tree_[next] <= target) {
        pos = next;
        target -= tree_[next];
      }
    }
    return std::min(pos, tree_.size() - 2);
  }

 private:
  std::vector<double> tree_;
  std::size_t top_bit_ = 1;
};

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform on (0, 1], so its logarithm is finite.
double uniform_open0(std::mt19937_64& rng) { return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-model data shared by all trials.
struct Engine {
  const BrwModel& model;
  double lambda;
  std::vector<double> site_weight;   // 1 + lambda row_sum(x)
  std::vector<std::size_t> offsets;  // row x occupies [offsets[x], offsets[x+1])
  std::vector<double> cumulative;    // running row sums
  std::vector<Vertex> targets;

  Engine(const BrwModel& m, double l) : model(m), lambda(l) {
    const RateMatrix& k = m.matrix;
    site_weight.resize(k.vertex_count());
    offsets.push_back(0);
    for (Vertex x = 0; x < k.vertex_count(); ++x) {
      site_weight[x] = 1.0 + lambda * k.row_sum(x);
      double run = 0.0;
      for (const Entry& e : k.row(x)) {
        run += e.rate;
        cumulative.push_back(run);
        targets.push_back(e.target);
      }
      offsets.push_back(cumulative.size());
    }
  }

  Vertex birth_target(Vertex x, double target) const {
    const auto first = cumulative.begin() + static_cast<std::ptrdiff_t>(offsets[x]);
    const auto last = cumulative.begin() + static_cast<std::ptrdiff_t>(offsets[x + 1]);
    auto it = std::upper_bound(first, last, target);
    if (it == last) --it;
    return targets[static_cast<std::size_t>(it - cumulative.begin())];
  }
};

TrialOutcome run(const Engine& eng, const TrialConfig& cfg, std::vector<std::uint64_t>& occupancy,
                 std::vector<double>& weights, const std::vector<int>& watched_index) {
  const RateMatrix& k = eng.model.matrix;
  const std::size_t n = k.vertex_count();
  std::mt19937_64 rng(cfg.seed);
  std::fill(occupancy.begin(), occupancy.end(), 0);
  std::fill(weights.begin(), weights.end(), 0.0);
  Fenwick fen(n);

  TrialOutcome out;
  out.local_hits.assign(cfg.watched.size(), 0);
  std::uint64_t total = 1;
  occupancy[cfg.start] = 1;
  weights[cfg.start] = eng.site_weight[cfg.start];
  fen.add(cfg.start, weights[cfg.start]);
  double clock = 0.0;
  std::uint64_t since_rebuild = 0;
  double rate = weights[cfg.start];  // running total of the site weights

  auto set_site = [&](Vertex x) {
    const double w = static_cast<double>(occupancy[x]) * eng.site_weight[x];
    fen.add(x, w - weights[x]);
    rate += w - weights[x];
    weights[x] = w;
  };
  auto rebuild = [&] {
    rate = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      weights[x] = static_cast<double>(occupancy[x]) * eng.site_weight[x];
      rate += weights[x];
    }
    fen.rebuild(weights);
    since_rebuild = 0;
  };

  while (true) {
    if (total == 0) {
      out.verdict = Verdict::extinct;
      out.extinction_time = clock;
      break;
    }
    if (total >= cfg.population_cap) {
      out.verdict = Verdict::population_cap_hit;
      break;
    }
    if (cfg.coherence_check_every > 0 && out.events_executed % cfg.coherence_check_every == 0) {
      double exact = 0.0;
      for (std::size_t x = 0; x < n; ++x) exact += static_cast<double>(occupancy[x]) * eng.site_weight[x];
      const double tree = fen.total();
      if (std::abs(exact - rate) > 1e-9 * exact || std::abs(exact - tree) > 1e-9 * exact) {
        throw NumericFailure("rate cache drifted: cached " + std::to_string(rate) + ", tree " +
                             std::to_string(tree) + ", exact " + std::to_string(exact));
      }
    }
    const double dt = -std::log(uniform_open0(rng)) / rate;
    if (clock + dt > cfg.horizon) {
      out.verdict = Verdict::alive_at_horizon;
      clock = cfg.horizon;
      break;
    }
    clock += dt;
    // one draw picks the site and, through the offset inside its weight, the event
    double offset = uniform01(rng) * rate;
    Vertex x = static_cast<Vertex>(fen.find(offset));
    if (occupancy[x] == 0 || !(offset < weights[x])) {
      // rounding in the partial sums: resample from exact weights
      rebuild();
      offset = uniform01(rng) * rate;
      x = static_cast<Vertex>(fen.find(offset));
      if (occupancy[x] == 0) throw NumericFailure("event selection hit an empty site");
      offset = std::min(offset, std::nextafter(weights[x], 0.0));
    }
    ++out.events_executed;
    const double u = std::max(0.0, offset) / static_cast<double>(occupancy[x]);
    if (u < 1.0) {
      --occupancy[x];
      --total;
      set_site(x);
    } else {
      const Vertex y = eng.birth_target(x, (u - 1.0) / eng.lambda);
      ++occupancy[y];
      ++total;
      set_site(y);
      if (watched_index[y] >= 0) {
        ++out.local_hits[static_cast<std::size_t>(watched_index[y])];
        if (clock >= cfg.late_window_start) ++out.late_hits;
        out.last_watched_arrival = clock;
      }
    }
    if (++since_rebuild >= kRebuildEvery) rebuild();
  }
  out.end_time = clock;
  out.final_population = total;
  return out;
}

void validate(const BrwModel& model, const TrialConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) throw ContractViolation("simulate: lambda must be >= 0");
  if (!(cfg.horizon > 0.0)) throw ContractViolation("simulate: horizon must be > 0");
  if (cfg.population_cap < 1) throw ContractViolation("simulate: population cap must be >= 1");
  if (cfg.start >= model.vertex_count()) throw ContractViolation("simulate: start vertex outside window");
  for (Vertex a : cfg.watched) {
    if (a >= model.vertex_count()) throw ContractViolation("simulate: watched vertex outside window");
  }
}

struct Tally {
  std::uint64_t survivors = 0;
  std::uint64_t alive = 0;
  std::uint64_t cap = 0;
};

template <class Judge>
SurvivalEstimate run_many(const BrwModel& model, TrialConfig base, const EstimateConfig& ec, Judge judge) {
  if (ec.trials < 1) throw ContractViolation("estimate: trials must be >= 1");
  validate(model, base);
  const Engine eng(model, base.lambda);
  std::vector<int> watched_index(model.vertex_count(), -1);
  for (std::size_t i = 0; i < base.watched.size(); ++i) watched_index[base.watched[i]] = static_cast<int>(i);

  const unsigned workers = static_cast<unsigned>(
      std::min<std::uint64_t>(resolve_threads(ec.threads), ec.trials));
  std::atomic<std::uint64_t> next{0};
  std::vector<Tally> tallies(workers);
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned w) {
    try {
      std::vector<std::uint64_t> occupancy(model.vertex_count());
      std::vector<double> weights(model.vertex_count());
      TrialConfig cfg = base;
      for (std::uint64_t i = next++; i < ec.trials; i = next++) {
        cfg.seed = trial_seed(ec.master_seed, i);
        const TrialOutcome o = run(eng, cfg, occupancy, weights, watched_index);
        if (judge(o)) ++tallies[w].survivors;
        if (o.verdict == Verdict::alive_at_horizon) ++tallies[w].alive;
        if (o.verdict == Verdict::population_cap_hit) ++tallies[w].cap;
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Tally sum;
  for (const Tally& t : tallies) {
    sum.survivors += t.survivors;
    sum.alive += t.alive;
    sum.cap += t.cap;
  }
  return make_estimate(ec.trials, sum.survivors, sum.alive, sum.cap);
}

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::extinct:
      return "extinct";
    case Verdict::alive_at_horizon:
      return "alive_at_horizon";
    case Verdict::population_cap_hit:
      return "population_cap_hit";
  }
  return "unknown";
}

TrialOutcome run_trial(const BrwModel& model, const TrialConfig& config) {
  validate(model, config);
  const Engine eng(model, config.lambda);
  std::vector<int> watched_index(model.vertex_count(), -1);
  for (std::size_t i = 0; i < config.watched.size(); ++i) watched_index[config.watched[i]] = static_cast<int>(i);
  std::vector<std::uint64_t> occupancy(model.vertex_count());
  std::vector<double> weights(model.vertex_count());
  return run(eng, config, occupancy, weights, watched_index);
}

SurvivalEstimate make_estimate(std::uint64_t trials, std::uint64_t survivors, std::uint64_t alive_at_horizon,
                               std::uint64_t cap_hits) {
  if (trials < 1) throw ContractViolation("estimate: trials must be >= 1");
  SurvivalEstimate e;
  e.trials = trials;
  e.survivors = survivors;
  e.alive_at_horizon = alive_at_horizon;
  e.cap_hits = cap_hits;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(survivors) / n;
  const double z2 = kWilsonZ95 * kWilsonZ95;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = kWilsonZ95 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  e.point = p;
  e.wilson_lo = std::max(0.0, std::min(p, centre - half));
  e.wilson_hi = std::min(1.0, std::max(p, centre + half));
  e.censored_fraction = static_cast<double>(alive_at_horizon) / n;
  return e;
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BRWLAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SurvivalEstimate estimate_survival(const BrwModel& model, double lambda, Vertex start, const EstimateConfig& config) {
  TrialConfig base;
  base.lambda = lambda;
  base.start = start;
  base.horizon = config.horizon;
  base.population_cap = config.population_cap;
  return run_many(model, base, config, [](const TrialOutcome& o) { return o.verdict != Verdict::extinct; });
}

SurvivalEstimate estimate_local_survival(const BrwModel& model, double lambda, Vertex start,
                                         const std::vector<Vertex>& watched, const EstimateConfig& config) {
  if (watched.empty()) throw ContractViolation("estimate_local_survival: watched set is empty");
  TrialConfig base;
  base.lambda = lambda;
  base.start = start;
  base.horizon = config.horizon;
  base.population_cap = config.population_cap;
  base.watched = watched;
  base.late_window_start = 0.8 * config.horizon;
  return run_many(model, base, config, [](const TrialOutcome& o) {
    return o.verdict != Verdict::extinct && o.last_watched_arrival &&
           *o.last_watched_arrival >= 0.8 * o.end_time;
  });
}

}  // namespace brwlab
