#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cmps/error.hpp"
#include "cmps/rng.hpp"
#include "cmps/signal_set.hpp"

namespace cmps {

// ---------------------------------------------------------------------------
// Damped sines with random delays

enum class GammaConvention {
  Rate,   ///< Gamma(alpha, beta) with density ~ x^(alpha-1) exp(-beta x); mean alpha / beta
  Scale,  ///< density ~ x^(alpha-1) exp(-x / beta); mean alpha * beta
};

const char* to_string(GammaConvention c) noexcept;
GammaConvention parse_gamma_convention(std::string_view s);

struct DampedSineSpec {
  std::vector<double> frequencies{261.6};  ///< Hz, one drawn uniformly per signal
  double sample_rate = 16000.0;            ///< Hz
  std::size_t length = 512;
  double gamma_alpha = 2.0;
  double gamma_beta = 0.39;
  GammaConvention convention = GammaConvention::Rate;
  double delay_unit = 1.0;   ///< seconds per unit of the Gamma variate
  double decay_time = 8e-3;  ///< s
  double amplitude = 1.0;

  void validate() const;
  double dt() const noexcept { return 1.0 / sample_rate; }
};

/// amplitude * exp(-(t - d) / decay) * sin(2 pi f (t - d)) for t >= d, else 0.
double damped_sine_value(const DampedSineSpec& spec, double frequency, double delay, double t) noexcept;

/// Delay in seconds drawn under the spec's convention and unit.
double draw_delay(const DampedSineSpec& spec, RandomStream& rng);

/// Signal i uses rng_stream(seed, i): one delay draw, then one uniform frequency pick.
/// Warns on stderr (and in metadata) when more than 90% of delays exceed the signal length.
SignalSet gen_damped_sines(const DampedSineSpec& spec, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Matern-1/2 x cosine spectral mixture and its exact state-space form

struct MsmComponent {
  double sigma = 2.0;    ///< amplitude; the variance contribution is sigma^2
  double lambda = 50.0;  ///< decay rate (1/s)
  double omega = 300.0;  ///< angular frequency (rad/s)
};

struct MsmSpec {
  std::vector<MsmComponent> components{MsmComponent{}};
  double dt = 1e-3;

  void validate() const;
};

/// sum_j sigma_j^2 exp(-lambda_j |tau|) cos(omega_j tau).
double msm_covariance(const MsmSpec& spec, double tau);

struct StateSpaceModel {
  Eigen::MatrixXd F;  ///< drift, 2x2 blocks [[-l, -w], [w, -l]]
  Eigen::MatrixXd L;  ///< dispersion
  Eigen::MatrixXd Q;  ///< diffusion, blocks 2 l sigma^2 I
  Eigen::MatrixXd H;  ///< 1 x 2N measurement row
};

struct DiscreteModel {
  Eigen::MatrixXd Ad;     ///< transition
  Eigen::MatrixXd Sigma;  ///< process-noise covariance
};

StateSpaceModel ssm_from_msm(const MsmSpec& spec);

/// Exact discretization of a block-diagonal model produced by ssm_from_msm.
/// Throws ConfigError when F is not of that form.
DiscreteModel discretize(const StateSpaceModel& ssm, double dt);

enum class GpInit { Stationary, Zero };
const char* to_string(GpInit g) noexcept;
GpInit parse_gp_init(std::string_view s);

/// Iterates g_{k+1} = Ad g_k + q_k with q_k ~ N(0, Sigma) and x_k = H g_k. Signal i
/// uses rng_stream(seed, first_index + i).
SignalSet gen_gp(const MsmSpec& spec, std::size_t n, std::size_t length, std::uint64_t seed,
                 GpInit init = GpInit::Stationary, std::size_t first_index = 0);

// ---------------------------------------------------------------------------
// Filtered Poisson process with pulses exp(-t/tau) sin(omega t)

struct FppSpec {
  double intensity = 4.0;  ///< events per second
  double amplitude = 1.0;  ///< outcomes +-amplitude, equiprobable
  double tau = 0.2;        ///< s
  double omega = 20.0;     ///< rad/s
  double dt = 0.01;        ///< s
  std::size_t length = 400;   ///< kept samples
  std::size_t burn_in = 100;  ///< discarded leading samples

  void validate() const;
};

/// theta(s) exp(-s/tau) sin(omega s).
double fpp_pulse(const FppSpec& spec, double s) noexcept;

struct PulseArrival {
  double time;
  double amplitude;
};

/// Exact evaluation on the grid t_k = k dt, k = 0 .. n_grid-1, of sum_j A_j phi(t_k - t_j).
/// Arrivals must be sorted by time.
std::vector<double> fpp_signal_from_arrivals(const FppSpec& spec, std::span<const PulseArrival> arrivals,
                                             std::size_t n_grid);

/// Poisson arrivals on [0, (burn_in + length - 1) dt]; the first burn_in samples are
/// dropped. Signal i uses rng_stream(seed, first_index + i).
SignalSet gen_fpp(const FppSpec& spec, std::size_t n, std::uint64_t seed, std::size_t first_index = 0);

struct FppCorrelators {
  double x3x;  ///< E[X^3(t1) X(t2)]
  double xx3;  ///< E[X(t1) X^3(t2)]
};

/// Stationary closed forms from the pulse integrals
///   I_nm(a, b) = int_a^b phi^n(t1 - s) phi^m(t2 - s) ds,
/// with -infinity truncated at t1 - 20 tau. Requires t2 >= t1. Throws QuadratureError
/// when an integral's error estimate exceeds abs_tol.
FppCorrelators fpp_exact_correlators(const FppSpec& spec, double t1, double t2, double abs_tol = 1e-8);

namespace serial {
SignalSet gen_damped_sines(const DampedSineSpec& spec, std::size_t n, std::uint64_t seed);
SignalSet gen_gp(const MsmSpec& spec, std::size_t n, std::size_t length, std::uint64_t seed,
                 GpInit init = GpInit::Stationary, std::size_t first_index = 0);
SignalSet gen_fpp(const FppSpec& spec, std::size_t n, std::uint64_t seed, std::size_t first_index = 0);
}  // namespace serial

}  // namespace cmps
