#include "core/de.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/common.hpp"

namespace rp {

void DEConfig::validate() const {
  if (population < 4)
    fail(ErrorCode::invalid_argument, "DE population must be at least 4 (got " + std::to_string(population) + ")");
  if (iterations == 0) fail(ErrorCode::invalid_argument, "DE iterations must be positive");
  if (!(mutation >= 0.0 && mutation <= 2.0))
    fail(ErrorCode::invalid_argument, "DE mutation factor must lie in [0, 2]");
}

void GenomeSpace::validate() const {
  if (doc_length == 0) fail(ErrorCode::invalid_argument, "genome space: empty document");
  if (sparsity == 0) fail(ErrorCode::invalid_argument, "genome space: sparsity must be >= 1");
  if (dim == 0) fail(ErrorCode::invalid_argument, "genome space: dimension must be >= 1");
  if (!(delta_bound > 0.0) || !std::isfinite(delta_bound))
    fail(ErrorCode::invalid_argument, "genome space: delta bound must be positive");
}

void clamp_candidate(const GenomeSpace& space, Candidate& x) {
  const double max_index = static_cast<double>(space.doc_length - 1);
  const std::size_t stride = 1 + space.dim;
  for (std::size_t g = 0; g < space.sparsity; ++g) {
    double& idx = x[g * stride];
    idx = std::clamp(idx, 0.0, max_index);
    for (std::size_t k = 1; k < stride; ++k) {
      double& v = x[g * stride + k];
      v = std::clamp(v, -space.delta_bound, space.delta_bound);
    }
  }
}

PerturbationGenome decode(const GenomeSpace& space, std::span<const double> x) {
  if (x.size() != space.width()) fail(ErrorCode::invalid_argument, "decode: candidate has wrong width");
  const std::size_t stride = 1 + space.dim;
  const double max_index = static_cast<double>(space.doc_length - 1);
  PerturbationGenome genome;
  genome.genes.reserve(space.sparsity);
  for (std::size_t g = 0; g < space.sparsity; ++g) {
    Gene gene;
    const double idx = std::clamp(std::round(x[g * stride]), 0.0, max_index);
    gene.position = static_cast<std::size_t>(idx);
    gene.delta.resize(space.dim);
    for (std::size_t k = 0; k < space.dim; ++k)
      gene.delta[k] = std::clamp(x[g * stride + 1 + k], -space.delta_bound, space.delta_bound);
    genome.genes.push_back(std::move(gene));
  }
  return genome;
}

Candidate encode(const GenomeSpace& space, const PerturbationGenome& genome) {
  if (genome.genes.size() != space.sparsity) fail(ErrorCode::invalid_argument, "encode: wrong gene count");
  Candidate x;
  x.reserve(space.width());
  for (const auto& gene : genome.genes) {
    if (gene.delta.size() != space.dim) fail(ErrorCode::invalid_argument, "encode: wrong delta dimension");
    x.push_back(static_cast<double>(gene.position));
    x.insert(x.end(), gene.delta.begin(), gene.delta.end());
  }
  clamp_candidate(space, x);
  return x;
}

DEResult de_minimize(const DEConfig& config, const GenomeSpace& space, const FitnessFn& fitness,
                     std::span<const Candidate> initial) {
  config.validate();
  space.validate();
  const std::size_t m = config.population;
  const std::size_t width = space.width();
  const std::size_t stride = 1 + space.dim;
  Rng rng(config.seed);

  std::vector<Candidate> population;
  population.reserve(m);
  if (!initial.empty()) {
    if (initial.size() != m) fail(ErrorCode::invalid_argument, "initial population size differs from config");
    for (const auto& x : initial) {
      if (x.size() != width) fail(ErrorCode::invalid_argument, "initial candidate has wrong width");
      Candidate c = x;
      clamp_candidate(space, c);
      population.push_back(std::move(c));
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      Candidate x(width);
      for (std::size_t g = 0; g < space.sparsity; ++g) {
        x[g * stride] = static_cast<double>(rng.index(space.doc_length));
        for (std::size_t k = 1; k < stride; ++k) x[g * stride + k] = rng.uniform(-space.delta_bound, space.delta_bound);
      }
      population.push_back(std::move(x));
    }
  }

  DEResult result;
  std::vector<double> scores(m);
  std::size_t best_slot = 0;
  for (std::size_t i = 0; i < m; ++i) {
    scores[i] = fitness(decode(space, population[i]));
    ++result.evaluations;
    if (scores[i] < scores[best_slot]) best_slot = i;
  }
  result.best = decode(space, population[best_slot]);
  result.best_fitness = scores[best_slot];
  result.trace.push_back(result.best_fitness);

  auto draw_other = [&](std::size_t a, std::initializer_list<std::size_t> taken) {
    for (;;) {
      const std::size_t j = rng.index(m);
      if (j == a) continue;
      if (std::find(taken.begin(), taken.end(), j) != taken.end()) continue;
      return j;
    }
  };

  std::vector<Candidate> trials(m, Candidate(width));
  for (std::size_t t = 0; t < config.iterations; ++t) {
    if (config.fitness_floor && result.best_fitness <= *config.fitness_floor) break;

    // All random draws happen here, before any evaluation of this generation.
    for (std::size_t a = 0; a < m; ++a) {
      const std::size_t b = draw_other(a, {});
      const std::size_t c = draw_other(a, {b});
      const std::size_t d = draw_other(a, {b, c});
      Candidate& trial = trials[a];
      for (std::size_t k = 0; k < width; ++k)
        trial[k] = population[b][k] + config.mutation * (population[c][k] - population[d][k]);
      clamp_candidate(space, trial);
    }

    for (std::size_t a = 0; a < m; ++a) {
      const double f = fitness(decode(space, trials[a]));
      ++result.evaluations;
      if (f < scores[a]) {
        scores[a] = f;
        population[a] = trials[a];
        if (f < result.best_fitness) {
          result.best_fitness = f;
          result.best = decode(space, population[a]);
        }
      }
    }
    ++result.generations;
    result.trace.push_back(result.best_fitness);
  }
  return result;
}

}  // namespace rp
