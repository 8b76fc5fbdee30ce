#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmps/signal_set.hpp"

namespace cmps {

/// C(t, t') = (1/N) sum_i x_i(t) x_i(t') with the standard error of each entry from
/// the sample variance of the products.
struct CovarianceEstimate {
  Eigen::MatrixXd value;
  Eigen::MatrixXd stderr_;
  std::size_t n = 0;
};

/// Uncentered by default; `centered` subtracts the per-time sample mean first.
/// Throws InsufficientSamplesError when N < 2.
CovarianceEstimate empirical_covariance(const SignalSet& signals, bool centered = false);

/// One row of the covariance: C(t1, t1 + tau) for tau = 0 .. max_lag.
struct CovarianceSlice {
  std::size_t t1 = 0;
  std::vector<double> value, stderr_;
  std::size_t n = 0;
};

/// Throws OutOfRangeError when t1 + max_lag leaves the signal.
CovarianceSlice covariance_slice(const SignalSet& signals, std::size_t t1, std::size_t max_lag,
                                 bool centered = false);

struct StationarityProfile {
  std::vector<std::size_t> t1;
  std::vector<Eigen::VectorXd> slices;   ///< C(t1, t1 + tau), tau = 0 .. tau_max
  std::vector<Eigen::VectorXd> stderrs;
  Eigen::MatrixXd max_deviation;  ///< pairwise max_tau |slice_i - slice_j|
  Eigen::MatrixXd max_z;          ///< same, in units of the combined standard error
};

/// Throws OutOfRangeError when t1 + tau_max leaves the matrix.
StationarityProfile stationarity_profile(const CovarianceEstimate& cov, const std::vector<std::size_t>& t1_list,
                                         std::size_t tau_max);

/// Sample means of x^3(t1) x(t2) and x(t1) x^3(t2) for t2 = t1 .. length-1, with
/// standard errors; diff_stderr is the paired standard error of their difference.
struct ThirdOrderEstimate {
  std::size_t t1 = 0;
  std::vector<double> x3x, x3x_stderr;
  std::vector<double> xx3, xx3_stderr;
  std::vector<double> diff_stderr;
  std::size_t n = 0;
};

/// Streaming form for sample counts that do not fit in memory.
class ThirdOrderAccumulator {
 public:
  ThirdOrderAccumulator(std::size_t length, std::size_t t1);
  void add(const SignalSet& chunk);
  ThirdOrderEstimate result() const;  ///< throws InsufficientSamplesError when N < 2

 private:
  std::size_t length_, t1_, n_ = 0;
  std::vector<double> s_a_, s_aa_, s_b_, s_bb_, s_d_, s_dd_;
};

ThirdOrderEstimate empirical_third_order(const SignalSet& signals, std::size_t t1);

struct TolerancePolicy {
  double k_sigma = 3.0;
  double pass_fraction = 0.95;
};

struct CorrelatorReport {
  std::string name;
  std::vector<double> t1, t2;
  std::vector<double> empirical, stderr_, analytic, z;
  double max_abs_z = 0.0;
  double fraction_within = 0.0;
  bool pass = false;
};

/// z = (empirical - analytic) / stderr (0/0 counts as 0). Throws GridMismatchError
/// when the inputs differ in length.
CorrelatorReport compare(std::string name, std::vector<double> t1, std::vector<double> t2,
                         std::vector<double> empirical, std::vector<double> stderr_,
                         std::vector<double> analytic, const TolerancePolicy& policy = {});

std::string report_csv(const CorrelatorReport& r);
std::string report_summary(const CorrelatorReport& r);

namespace serial {
CovarianceEstimate empirical_covariance(const SignalSet& signals, bool centered = false);
}

}  // namespace cmps
