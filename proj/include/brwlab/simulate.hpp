#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "brwlab/models.hpp"

namespace brwlab {

enum class Verdict { extinct, alive_at_horizon, population_cap_hit };

const char* to_string(Verdict v);

struct TrialOutcome {
  Verdict verdict = Verdict::extinct;
  std::optional<double> extinction_time;
  double end_time = 0.0;
  std::uint64_t events_executed = 0;
  std::uint64_t final_population = 0;
  /// Births into each watched vertex, in the order given.
  std::vector<std::uint64_t> local_hits;
  /// Births into the watched set at times >= late_window_start.
  std::uint64_t late_hits = 0;
  std::optional<double> last_watched_arrival;
};

struct TrialConfig {
  double lambda = 0.0;
  Vertex start = 0;
  double horizon = 100.0;
  std::uint64_t population_cap = 100000;
  std::uint64_t seed = 0;
  std::vector<Vertex> watched;
  double late_window_start = 0.0;
  /// Recompute the cached total rate from scratch every this many events and
  /// check it against the running value.
  std::uint64_t coherence_check_every = 0;
};

/// One Gillespie run from a single particle: deaths at rate 1 per particle,
/// births along (x, y) at rate lambda k_xy per particle at x.
TrialOutcome run_trial(const BrwModel& model, const TrialConfig& config);

struct SurvivalEstimate {
  std::uint64_t trials = 0;
  std::uint64_t survivors = 0;
  std::uint64_t alive_at_horizon = 0;
  std::uint64_t cap_hits = 0;
  double point = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  double censored_fraction = 0.0;
};

inline constexpr double kWilsonZ95 = 1.959963984540054;

/// 95% Wilson score interval.
SurvivalEstimate make_estimate(std::uint64_t trials, std::uint64_t survivors,
                               std::uint64_t alive_at_horizon = 0, std::uint64_t cap_hits = 0);

struct EstimateConfig {
  std::uint64_t trials = 10000;
  double horizon = 100.0;
  std::uint64_t population_cap = 100000;
  std::uint64_t master_seed = 1;
  /// 0 selects BRWLAB_THREADS or the hardware concurrency.
  unsigned threads = 0;
};

/// Seed of trial `index` under `master_seed` (splitmix64 of both).
std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t index);

/// Worker count: explicit request, else BRWLAB_THREADS, else hardware.
unsigned resolve_threads(unsigned requested);

/// Fraction of trials surviving globally (alive at horizon or cap reached).
SurvivalEstimate estimate_survival(const BrwModel& model, double lambda, Vertex start,
                                   const EstimateConfig& config);

/// Fraction of non-extinct trials with a birth into `watched` during the final
/// 20% of the observed time span (the horizon, or the time the population cap
/// was reached). A finite-horizon stand-in for local survival: the limsup
/// event itself is not observable.
SurvivalEstimate estimate_local_survival(const BrwModel& model, double lambda, Vertex start,
                                         const std::vector<Vertex>& watched,
                                         const EstimateConfig& config);

}  // namespace brwlab
