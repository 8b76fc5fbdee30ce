#pragma once

#include <cstdint>

#include "cmps/core.hpp"
#include "cmps/signal_set.hpp"

namespace cmps {

struct SampleConfig {
  double temperature = 0.0;
  std::size_t n_steps = 512;  ///< samples per signal, x0 included
  std::size_t n_samples = 1;
  std::uint64_t seed = 0;
  StateKind state = StateKind::Pure;
  double x0 = 0.0;

  void validate() const;
};

/// Derivative coupling: dx_k = A <R_k + R_k^dag>_k dt + sqrt(T) dbeta_k with
/// dbeta_k ~ N(0, dt); the state then consumes dx_k. Sample i uses rng_stream(seed, i)
/// and consumes no draws at T = 0.
SignalSet sample_sde(const ModelParameters& params, const SampleConfig& cfg);

/// Direct coupling: x_{k+1} = <R_k + R_k^dag>_k + sqrt(T) z_k with z_k ~ N(0, 1);
/// the state then consumes x_{k+1} dt.
SignalSet sample_direct(const ModelParameters& params, const SampleConfig& cfg);

/// Dispatches on params.coupling.
SignalSet sample(const ModelParameters& params, const SampleConfig& cfg);

namespace serial {
SignalSet sample_sde(const ModelParameters& params, const SampleConfig& cfg);
SignalSet sample_direct(const ModelParameters& params, const SampleConfig& cfg);
}  // namespace serial

}  // namespace cmps
