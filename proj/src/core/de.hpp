#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace rp {

struct DEConfig {
  std::size_t population = 500;
  std::size_t iterations = 100;
  double mutation = 0.5;  // F
  std::uint64_t seed = 0;
  /// Stop once the best fitness is at or below this value. Disabled by default.
  std::optional<double> fitness_floor;

  void validate() const;
};

/// One perturbed position: document index plus an embedding-space delta.
struct Gene {
  std::size_t position = 0;
  std::vector<double> delta;

  bool operator==(const Gene&) const = default;
};

struct PerturbationGenome {
  std::vector<Gene> genes;

  bool operator==(const PerturbationGenome&) const = default;
};

/// Shape of the search space: `sparsity` genes, each an index into a document
/// of `doc_length` tokens and a `dim`-vector clipped to [-delta_bound, delta_bound].
struct GenomeSpace {
  std::size_t doc_length = 1;
  std::size_t sparsity = 1;
  double delta_bound = 1.0;
  std::size_t dim = 1;

  std::size_t width() const noexcept { return sparsity * (1 + dim); }
  void validate() const;
};

/// Flattened form [i_1, v_1..., i_2, v_2..., ...]. Index coordinates stay real.
using Candidate = std::vector<double>;

/// Clamps index coordinates to [0, doc_length - 1] and deltas to the bound.
void clamp_candidate(const GenomeSpace& space, Candidate& x);

/// Rounds index coordinates to the nearest integer (after clamping).
PerturbationGenome decode(const GenomeSpace& space, std::span<const double> x);
Candidate encode(const GenomeSpace& space, const PerturbationGenome& genome);

using FitnessFn = std::function<double(const PerturbationGenome&)>;

struct DEResult {
  PerturbationGenome best;
  double best_fitness = 0.0;
  /// trace[0] is the best of the initial population; trace[t] the best after
  /// generation t. Non-increasing.
  std::vector<double> trace;
  std::size_t evaluations = 0;  // fitness calls
  std::size_t generations = 0;
};

/// Mutation-only DE/rand/1: for each slot a, trial = x_b + F (x_c - x_d) with
/// b, c, d distinct and different from a; the trial replaces x_a iff its
/// fitness is strictly lower. `initial`, when given, seeds the population
/// instead of uniform sampling and must hold `population` candidates.
DEResult de_minimize(const DEConfig& config, const GenomeSpace& space, const FitnessFn& fitness,
                     std::span<const Candidate> initial = {});

}  // namespace rp
