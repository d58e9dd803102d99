#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "sparsestein/inference/parallel.hpp"
#include "sparsestein/inference/svgd.hpp"
#include "sparsestein/metrics/distance.hpp"
#include "sparsestein/models/observables.hpp"

namespace sparsestein::metrics {

/// Distribution of one observable at each path input, induced by posterior samples.
struct PushForward {
  std::vector<EmpiricalDist> per_input;
  std::vector<double> mean;
  std::vector<double> stdev;
};

/// `inputs_flat` holds path records back to back; `observable` selects the output column.
inline PushForward pushforward(const inference::PosteriorSamples& samples, const models::ObservableModel& model,
                               std::span<const double> inputs_flat, std::size_t observable, std::size_t threads = 1) {
  if (samples.count() == 0) throw std::invalid_argument("pushforward: no samples");
  if (observable >= model.num_observables()) throw std::out_of_range("pushforward: observable index");
  const std::size_t width = model.input_width();
  const std::size_t n_in = inputs_flat.size() / width;
  const std::size_t n_obs = model.num_observables();
  const std::size_t s = samples.count();
  std::vector<std::vector<double>> out(s, std::vector<double>(n_in * n_obs));
  inference::parallel_for(s, threads, [&](std::size_t k) { model.observe(samples.sample(k), inputs_flat, out[k]); });
  PushForward pf;
  pf.per_input.reserve(n_in);
  for (std::size_t i = 0; i < n_in; ++i) {
    std::vector<double> v(s);
    for (std::size_t k = 0; k < s; ++k) v[k] = out[k][i * n_obs + observable];
    pf.per_input.emplace_back(std::move(v));
    pf.mean.push_back(pf.per_input.back().mean());
    pf.stdev.push_back(pf.per_input.back().stdev());
  }
  return pf;
}

}  // namespace sparsestein::metrics
