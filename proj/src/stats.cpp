#include "cmps/stats.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cmps/error.hpp"

namespace cmps {

namespace {

double stderr_of(double sum, double sum_sq, std::size_t n) {
  const double N = static_cast<double>(n);
  const double mean = sum / N;
  const double var = std::max(0.0, (sum_sq - N * mean * mean) / (N - 1.0));
  return std::sqrt(var / N);
}

template <bool Parallel>
CovarianceEstimate covariance(const SignalSet& set, bool centered) {
  if (set.n_signals < 2) throw InsufficientSamplesError("covariance needs at least 2 signals");
  const std::size_t N = set.n_signals, L = set.length;
  std::vector<double> mean(L, 0.0);
  if (centered) {
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t t = 0; t < L; ++t) mean[t] += set.at(i, t);
    for (double& m : mean) m /= static_cast<double>(N);
  }

  CovarianceEstimate out{Eigen::MatrixXd::Zero(L, L), Eigen::MatrixXd::Zero(L, L), N};
  const auto rows = static_cast<std::ptrdiff_t>(L);
  // Each entry is one sequential sum over signals, so the result does not depend on threads.
#pragma omp parallel for schedule(dynamic) if (Parallel)
  for (std::ptrdiff_t a = 0; a < rows; ++a) {
    std::vector<double> s(L - a, 0.0), ss(L - a, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      const double* x = set.data.data() + i * L;
      const double xa = x[a] - mean[a];
      for (std::size_t b = a; b < L; ++b) {
        const double p = xa * (x[b] - mean[b]);
        s[b - a] += p;
        ss[b - a] += p * p;
      }
    }
    for (std::size_t b = a; b < L; ++b) {
      const double c = s[b - a] / static_cast<double>(N);
      const double e = stderr_of(s[b - a], ss[b - a], N);
      out.value(a, b) = out.value(b, a) = c;
      out.stderr_(a, b) = out.stderr_(b, a) = e;
    }
  }
  return out;
}

}  // namespace

CovarianceEstimate empirical_covariance(const SignalSet& signals, bool centered) {
  return covariance<true>(signals, centered);
}

namespace serial {
CovarianceEstimate empirical_covariance(const SignalSet& signals, bool centered) {
  return covariance<false>(signals, centered);
}
}  // namespace serial

CovarianceSlice covariance_slice(const SignalSet& set, std::size_t t1, std::size_t max_lag, bool centered) {
  if (set.n_signals < 2) throw InsufficientSamplesError("covariance needs at least 2 signals");
  if (t1 + max_lag >= set.length)
    throw OutOfRangeError("covariance slice t1=" + std::to_string(t1) + " max_lag=" + std::to_string(max_lag) +
                          " exceeds length " + std::to_string(set.length));
  const std::size_t N = set.n_signals, m = max_lag + 1;
  std::vector<double> mean(m + 1, 0.0);  // mean[0] is at t1, mean[1 + tau] at t1 + tau
  if (centered) {
    for (std::size_t i = 0; i < N; ++i) {
      mean[0] += set.at(i, t1);
      for (std::size_t tau = 0; tau < m; ++tau) mean[1 + tau] += set.at(i, t1 + tau);
    }
    for (double& v : mean) v /= static_cast<double>(N);
  }
  std::vector<double> s(m, 0.0), ss(m, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const double xa = set.at(i, t1) - mean[0];
    for (std::size_t tau = 0; tau < m; ++tau) {
      const double p = xa * (set.at(i, t1 + tau) - mean[1 + tau]);
      s[tau] += p;
      ss[tau] += p * p;
    }
  }
  CovarianceSlice out{t1, {}, {}, N};
  for (std::size_t tau = 0; tau < m; ++tau) {
    out.value.push_back(s[tau] / static_cast<double>(N));
    out.stderr_.push_back(stderr_of(s[tau], ss[tau], N));
  }
  return out;
}

StationarityProfile stationarity_profile(const CovarianceEstimate& cov, const std::vector<std::size_t>& t1_list,
                                         std::size_t tau_max) {
  const auto L = static_cast<std::size_t>(cov.value.rows());
  StationarityProfile p;
  p.t1 = t1_list;
  for (std::size_t t1 : t1_list) {
    if (t1 + tau_max >= L)
      throw OutOfRangeError("slice t1=" + std::to_string(t1) + " tau_max=" + std::to_string(tau_max) +
                            " exceeds length " + std::to_string(L));
    const auto n = static_cast<Eigen::Index>(tau_max + 1);
    p.slices.push_back(cov.value.row(static_cast<Eigen::Index>(t1)).segment(t1, n).transpose());
    p.stderrs.push_back(cov.stderr_.row(static_cast<Eigen::Index>(t1)).segment(t1, n).transpose());
  }
  const auto k = static_cast<Eigen::Index>(t1_list.size());
  p.max_deviation = Eigen::MatrixXd::Zero(k, k);
  p.max_z = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::ArrayXd diff = (p.slices[i] - p.slices[j]).array().abs();
      const Eigen::ArrayXd se = (p.stderrs[i].array().square() + p.stderrs[j].array().square()).sqrt();
      p.max_deviation(i, j) = diff.maxCoeff();
      double mz = 0.0;
      for (Eigen::Index t = 0; t < diff.size(); ++t)
        if (diff(t) > 0.0) mz = std::max(mz, se(t) > 0.0 ? diff(t) / se(t) : std::numeric_limits<double>::infinity());
      p.max_z(i, j) = mz;
    }
  return p;
}

ThirdOrderAccumulator::ThirdOrderAccumulator(std::size_t length, std::size_t t1) : length_(length), t1_(t1) {
  if (t1 >= length) throw OutOfRangeError("t1 must lie inside the signal");
  const std::size_t m = length - t1;
  for (auto* v : {&s_a_, &s_aa_, &s_b_, &s_bb_, &s_d_, &s_dd_}) v->assign(m, 0.0);
}

void ThirdOrderAccumulator::add(const SignalSet& chunk) {
  if (chunk.length != length_) throw GridMismatchError("chunk length differs from the accumulator");
  const std::size_t m = length_ - t1_;
  for (std::size_t i = 0; i < chunk.n_signals; ++i) {
    const double* x = chunk.data.data() + i * length_;
    const double x1 = x[t1_];
    const double x1_3 = x1 * x1 * x1;
    for (std::size_t j = 0; j < m; ++j) {
      const double x2 = x[t1_ + j];
      const double a = x1_3 * x2;
      const double b = x1 * x2 * x2 * x2;
      const double d = a - b;
      s_a_[j] += a;
      s_aa_[j] += a * a;
      s_b_[j] += b;
      s_bb_[j] += b * b;
      s_d_[j] += d;
      s_dd_[j] += d * d;
    }
  }
  n_ += chunk.n_signals;
}

ThirdOrderEstimate ThirdOrderAccumulator::result() const {
  if (n_ < 2) throw InsufficientSamplesError("third-order statistics need at least 2 signals");
  ThirdOrderEstimate e;
  e.t1 = t1_;
  e.n = n_;
  const double N = static_cast<double>(n_);
  for (std::size_t j = 0; j < s_a_.size(); ++j) {
    e.x3x.push_back(s_a_[j] / N);
    e.x3x_stderr.push_back(stderr_of(s_a_[j], s_aa_[j], n_));
    e.xx3.push_back(s_b_[j] / N);
    e.xx3_stderr.push_back(stderr_of(s_b_[j], s_bb_[j], n_));
    e.diff_stderr.push_back(stderr_of(s_d_[j], s_dd_[j], n_));
  }
  return e;
}

ThirdOrderEstimate empirical_third_order(const SignalSet& signals, std::size_t t1) {
  ThirdOrderAccumulator acc(signals.length, t1);
  acc.add(signals);
  return acc.result();
}

CorrelatorReport compare(std::string name, std::vector<double> t1, std::vector<double> t2,
                         std::vector<double> empirical, std::vector<double> stderr_,
                         std::vector<double> analytic, const TolerancePolicy& policy) {
  const std::size_t n = empirical.size();
  if (stderr_.size() != n || analytic.size() != n || t1.size() != n || t2.size() != n)
    throw GridMismatchError("compare: grids of different sizes");
  if (n == 0) throw GridMismatchError("compare: empty grid");
  CorrelatorReport r{std::move(name), std::move(t1), std::move(t2), std::move(empirical), std::move(stderr_),
                     std::move(analytic), {}, 0.0, 0.0, false};
  r.z.resize(n);
  std::size_t within = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = r.empirical[i] - r.analytic[i];
    double z;
    if (diff == 0.0)
      z = 0.0;
    else if (r.stderr_[i] > 0.0)
      z = diff / r.stderr_[i];
    else
      z = std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.z[i] = z;
    r.max_abs_z = std::max(r.max_abs_z, std::abs(z));
    within += std::abs(z) <= policy.k_sigma;
  }
  r.fraction_within = static_cast<double>(within) / static_cast<double>(n);
  r.pass = r.fraction_within >= policy.pass_fraction;
  return r;
}

std::string report_csv(const CorrelatorReport& r) {
  std::ostringstream os;
  os << "t1,t2,empirical,stderr,analytic,z\n";
  for (std::size_t i = 0; i < r.z.size(); ++i)
    os << format_double(r.t1[i]) << ',' << format_double(r.t2[i]) << ',' << format_double(r.empirical[i]) << ','
       << format_double(r.stderr_[i]) << ',' << format_double(r.analytic[i]) << ',' << format_double(r.z[i]) << '\n';
  return os.str();
}

std::string report_summary(const CorrelatorReport& r) {
  std::ostringstream os;
  os << r.name << ": " << (r.pass ? "PASS" : "FAIL") << "  points=" << r.z.size()
     << "  within=" << format_double(r.fraction_within) << "  max|z|=" << format_double(r.max_abs_z) << '\n';
  return os.str();
}

}  // namespace cmps
