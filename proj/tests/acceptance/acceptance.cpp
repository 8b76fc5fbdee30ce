// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: cmps_acceptance [criterion numbers...]   (default: all)

#include <omp.h>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmps/checkpoint.hpp"
#include "cmps/cli.hpp"
#include "cmps/processes.hpp"
#include "cmps/sampling.hpp"
#include "cmps/signal_set.hpp"
#include "cmps/stats.hpp"
#include "cmps/training.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace cmps;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void log(const std::string& s) {
  std::fprintf(stderr, "  %s\n", s.c_str());
  std::fflush(stderr);
}

/// Fraction of points with |z| <= k, where z = (empirical - analytic) / stderr.
struct Agreement {
  std::size_t within = 0, total = 0;
  double max_abs_z = 0.0;
  double fraction() const { return total ? static_cast<double>(within) / static_cast<double>(total) : 0.0; }
};

Agreement agreement(const std::vector<double>& emp, const std::vector<double>& se, const std::vector<double>& ref,
                    std::size_t from, std::size_t to, double k = 3.0) {
  Agreement a;
  for (std::size_t i = from; i <= to; ++i) {
    const double d = emp[i] - ref[i];
    const double z = d == 0.0 ? 0.0 : d / se[i];
    a.within += std::abs(z) <= k;
    ++a.total;
    a.max_abs_z = std::max(a.max_abs_z, std::abs(z));
  }
  return a;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

Outcome gradient_correctness() {
  const std::pair<Coupling, StateKind> combos[] = {{Coupling::Direct, StateKind::Pure},
                                                    {Coupling::Direct, StateKind::Density},
                                                    {Coupling::Derivative, StateKind::Pure},
                                                    {Coupling::Derivative, StateKind::Density}};
  std::size_t bad_cases = 0, coords = 0;
  std::string first_failure;
  for (const auto& [coupling, state] : combos) {
    for (int i = 0; i < 100; ++i) {
      const auto c = gen::gradient_case(100000 + 1000 * static_cast<int>(coupling) + 100 * static_cast<int>(state) + i,
                                        coupling, state);
      const auto lg = gradient(c.params, gen::to_set(c.signals, c.params.dt), c.loss);
      bool ok = true;
      for (const auto& coord : oracle::coordinates(c.params)) {
        const double g = coord.grad(lg.grad);
        // Masked diagonal entries carry an exact zero and are not free coordinates.
        if (c.params.zero_R_diagonal && coord.name.size() > 3 &&
            (coord.name.rfind("reR", 0) == 0 || coord.name.rfind("imR", 0) == 0)) {
          const auto ix = coord.name.substr(3);
          const auto comma = ix.find(',');
          if (ix.substr(0, comma) == ix.substr(comma + 1)) {
            ok = ok && g == 0.0;
            continue;
          }
        }
        ++coords;
        const double fd = static_cast<double>(oracle::central_difference(c.params, coord, c.signals, c.loss));
        if (!oracle::gradient_matches(g, fd)) {
          ok = false;
          if (first_failure.empty()) first_failure = fmt("%s analytic %.10g fd %.10g", coord.name.c_str(), g, fd);
        }
      }
      bad_cases += !ok;
    }
  }
  return {bad_cases == 0, fmt("400 cases, %zu coordinates, %zu failing cases%s%s", coords, bad_cases,
                              first_failure.empty() ? "" : "; first: ", first_failure.c_str())};
}

// ---------------------------------------------------------------------------
// 2. Pure/density consistency

Outcome pure_density_consistency() {
  double worst = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(7000 + seed);
    const Coupling coupling = seed % 2 ? Coupling::Direct : Coupling::Derivative;
    const auto p = gen::random_params(rng, coupling, 16, false);
    const auto signal = gen::random_signal(rng, p, 513);
    const auto obs = observations_from_signal(signal, coupling);
    const auto a = run_trajectory(p, obs, StateKind::Pure);
    const auto b = run_trajectory(p, obs, StateKind::Density);
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  }
  return {worst <= 1e-10, fmt("20 seeds, D = 16, 512 steps, max |difference| %.3g", worst)};
}

// ---------------------------------------------------------------------------
// 3. Exact discretization

Agreement gp_agreement(const MsmSpec& spec, std::size_t n, std::uint64_t seed) {
  const std::size_t max_lag = 50;
  const auto s = gen_gp(spec, n, max_lag + 1, seed);
  const auto slice = covariance_slice(s, 0, max_lag);
  std::vector<double> ref(max_lag + 1);
  for (std::size_t tau = 0; tau <= max_lag; ++tau) ref[tau] = msm_covariance(spec, static_cast<double>(tau) * spec.dt);
  return agreement(slice.value, slice.stderr_, ref, 0, max_lag);
}

Outcome exact_discretization() {
  MsmSpec single;
  single.components = {{2.0, 50.0, 300.0}};
  single.dt = 1e-3;
  MsmSpec mixture = single;
  mixture.components = {{2.0, 50.0, 300.0}, {2.0, 50.0, 500.0}, {2.0, 50.0, 700.0}};
  const auto a = gp_agreement(single, 10000, 31);
  const auto b = gp_agreement(mixture, 10000, 32);
  const bool pass = a.fraction() >= 0.95 && b.fraction() >= 0.95;
  return {pass, fmt("single %zu/%zu within 3 SE (max |z| %.2f), mixture %zu/%zu (max |z| %.2f)", a.within, a.total,
                    a.max_abs_z, b.within, b.total, b.max_abs_z)};
}

// ---------------------------------------------------------------------------
// 4. FPP correlator asymmetry

Outcome fpp_asymmetry() {
  FppSpec spec;  // lambda = 4, A = +-1, tau = 0.2, omega = 20, dt = 0.01, burn-in 100
  const std::size_t grid = 100;
  spec.length = grid;
  const std::size_t n_total = 400000, chunk = 20000;
  ThirdOrderAccumulator acc(spec.length, 0);
  for (std::size_t first = 0; first < n_total; first += chunk) acc.add(gen_fpp(spec, chunk, 4, first));
  const auto est = acc.result();

  const double tol = 1e-8;
  std::vector<double> x3x(grid), xx3(grid);
  double max_gap = 0.0;
  for (std::size_t k = 0; k < grid; ++k) {
    const auto c = fpp_exact_correlators(spec, 0.0, static_cast<double>(k) * spec.dt, tol);
    x3x[k] = c.x3x;
    xx3[k] = c.xx3;
    max_gap = std::max(max_gap, std::abs(c.x3x - c.xx3));
  }
  const auto a = agreement(est.x3x, est.x3x_stderr, x3x, 0, grid - 1);
  const auto b = agreement(est.xx3, est.xx3_stderr, xx3, 0, grid - 1);
  const bool pass = a.fraction() >= 0.95 && b.fraction() >= 0.95 && max_gap > 10.0 * tol;
  return {pass, fmt("n = %zu: x3x %zu/%zu within 3 SE (max |z| %.2f), xx3 %zu/%zu (max |z| %.2f); "
                    "max quadrature gap %.3g vs threshold %.1g",
                    est.n, a.within, a.total, a.max_abs_z, b.within, b.total, b.max_abs_z, max_gap, 10.0 * tol)};
}

// ---------------------------------------------------------------------------
// 5. Sampler noise contract

/// z-score of the sample second moment of `xs` against `expect`.
double second_moment_z(const std::vector<double>& xs, double expect) {
  double s2 = 0.0, s4 = 0.0;
  for (double x : xs) {
    s2 += x * x;
    s4 += x * x * x * x;
  }
  const double n = static_cast<double>(xs.size());
  const double m2 = s2 / n;
  return (m2 - expect) / std::sqrt((s4 / n - m2 * m2) / n);
}

ModelParameters silent(Coupling coupling) {
  std::mt19937_64 rng(55);
  auto p = gen::random_params(rng, coupling, 4, false);
  p.R.setZero();
  p.dt = 1e-3;
  return p;
}

Outcome sampler_noise() {
  const double T = 0.8;
  SampleConfig cfg;
  cfg.temperature = T;
  cfg.n_steps = 101;
  cfg.n_samples = 1000;  // 1e5 increments / draws
  cfg.seed = 12;

  const auto sde_params = silent(Coupling::Derivative);
  const auto sde = sample_sde(sde_params, cfg);
  std::vector<double> inc;
  for (std::size_t i = 0; i < sde.n_signals; ++i)
    for (std::size_t k = 0; k + 1 < sde.length; ++k) inc.push_back(sde.at(i, k + 1) - sde.at(i, k));
  const double z_sde = second_moment_z(inc, T * sde_params.dt);

  cfg.seed = 13;  // independent draws from the sde check
  const auto direct = sample_direct(silent(Coupling::Direct), cfg);
  std::vector<double> draws;
  for (std::size_t i = 0; i < direct.n_signals; ++i)
    for (std::size_t k = 1; k < direct.length; ++k) draws.push_back(direct.at(i, k));
  const double z_direct = second_moment_z(draws, T);

  // T = 0 runs of trained-looking parameters at several thread counts.
  bool identical = true;
  const int saved = omp_get_max_threads();
  std::mt19937_64 rng(56);
  for (auto coupling : {Coupling::Direct, Coupling::Derivative}) {
    const auto p = gen::random_params(rng, coupling, 6, false);
    SampleConfig c0;
    c0.n_steps = 200;
    c0.n_samples = 16;
    omp_set_num_threads(1);
    const auto ref = sample(p, c0);
    for (int t : {2, 4, 7}) {
      omp_set_num_threads(t);
      identical = identical && sample(p, c0).data == ref.data;
    }
  }
  omp_set_num_threads(saved);

  const bool pass = std::abs(z_sde) <= 3.0 && std::abs(z_direct) <= 3.0 && identical;
  return {pass, fmt("n = %zu: sde increment variance z = %.2f, direct variance z = %.2f, T = 0 thread-identical: %s",
                    inc.size(), z_sde, z_direct, identical ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 6. Training smoke and sine recovery

/// Index of the largest |DFT| bin in 0 .. n/2.
std::size_t peak_bin(std::span<const double> x) {
  const std::size_t n = x.size();
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> s = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      s += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n));
    if (std::abs(s) > best_mag) {
      best_mag = std::abs(s);
      best = k;
    }
  }
  return best;
}

Outcome sine_recovery() {
  DampedSineSpec spec;
  spec.frequencies = {261.6};
  spec.length = 128;
  spec.convention = GammaConvention::Scale;
  spec.delay_unit = 1e-3;  // Gamma(2, 0.39) in ms: mean delay 0.78 ms

  const double target_bin = 261.6 * static_cast<double>(spec.length) / spec.sample_rate;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto data = gen_damped_sines(spec, 64, seed);
    InitConfig ic;
    ic.bond_dim = 32;
    ic.dt = spec.dt();
    ic.coupling = Coupling::Derivative;
    ic.zero_R_diagonal = true;
    ic.omega_std = 2.0 * std::numbers::pi * 261.6;
    TrainState st{init_params(ic, seed), {}, 0};
    LossConfig lc;
    lc.kind = LossKind::SdeSquaredError;
    TrainConfig tc;
    tc.max_steps = 2000;
    tc.learning_rate = 1e-2;
    tc.decay_steps = 0.0;
    tc.lr_scale_A = 100.0;
    tc.lr_scale_omega = 100.0;
    tc.seed = seed;
    const auto hist = train(st, tc, lc, data);

    // Minibatch losses are noisy: compare the first and last 20-step means.
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      first += hist[i].total;
      last += hist[hist.size() - 1 - i].total;
    }
    const double ratio = last / first;

    SampleConfig sc;
    sc.n_steps = spec.length;
    const auto s = sample(st.params, sc);
    const std::size_t bin = peak_bin(s.row(0));
    const bool ok = ratio <= 0.5 && std::abs(static_cast<double>(bin) - target_bin) <= 2.0;
    detail += fmt("seed %llu: loss ratio %.4f, peak bin %zu (target %.2f)%s", static_cast<unsigned long long>(seed),
                  ratio, bin, target_bin, ok ? "" : "; ");
    log(detail);
    if (ok) return {true, detail};
  }
  return {false, detail};
}

// ---------------------------------------------------------------------------
// 7. GP model-learning loop

/// Optimal total direct loss over a window of `length` samples for a GP observed
/// from x_1 on: the sum of the Kalman one-step innovation variances from the
/// stationary prior. A trained model cannot go below this in expectation.
double optimal_direct_loss(const MsmSpec& spec, std::size_t length) {
  const auto dm = discretize(ssm_from_msm(spec), spec.dt);
  const Eigen::Index n = dm.Ad.rows();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  Eigen::RowVectorXd H = Eigen::RowVectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; j += 2) {
    const double s = spec.components[static_cast<std::size_t>(j / 2)].sigma;
    P(j, j) = P(j + 1, j + 1) = s * s;
    H(j) = 1.0;
  }
  double total = 0.0;
  for (std::size_t k = 1; k < length; ++k) {
    const double S = (H * P * H.transpose())(0, 0);
    total += S;
    const Eigen::VectorXd K = P * H.transpose() / S;
    P = dm.Ad * (P - K * (H * P)) * dm.Ad.transpose() + dm.Sigma;
  }
  return total;
}

struct SweepPoint {
  double T = 0.0;
  Agreement a;
  bool better_than(const SweepPoint& o) const {
    return a.within != o.a.within ? a.within > o.a.within : a.max_abs_z < o.a.max_abs_z;
  }
};

struct GpRun {
  SweepPoint best;
  Agreement late;  ///< diagnostic only: t1 = 40 at the best temperature
  double heldout_loss = 0.0, optimal_loss = 0.0;
  bool pass() const { return best.a.fraction() >= 0.95; }
};

GpRun gp_learning_run(std::uint64_t seed) {
  MsmSpec spec;
  spec.components = {{2.0, 50.0, 300.0}};
  spec.dt = 1e-3;
  const std::size_t t1 = 20, min_lag = 5, max_lag = 50, train_len = 100;

  const auto data = gen_gp(spec, 2048, train_len, seed);
  InitConfig ic;
  ic.bond_dim = 50;
  ic.dt = 1e-3;
  ic.sigma = 1.0;
  ic.coupling = Coupling::Direct;
  ic.omega_std = 300.0;
  TrainState st{init_params(ic, seed), {}, 0};
  LossConfig lc;
  lc.kind = LossKind::DirectSquaredError;
  lc.learn_A = false;
  TrainConfig tc;
  tc.max_steps = 6000;
  tc.learning_rate = 1e-2;
  tc.decay_steps = 0.0;
  tc.lr_scale_omega = 100.0;
  tc.seed = seed;
  train(st, tc, lc, data);

  GpRun run;
  const auto test = gen_gp(spec, 256, train_len, seed + 1000);
  for (std::size_t i = 0; i < test.n_signals; ++i) run.heldout_loss += loss_direct(st.params, test.row(i));
  run.heldout_loss /= static_cast<double>(test.n_signals);
  run.optimal_loss = optimal_direct_loss(spec, train_len);
  log(fmt("seed %llu: held-out loss %.3f, finite-window optimum %.3f", static_cast<unsigned long long>(seed),
          run.heldout_loss, run.optimal_loss));

  std::vector<double> ref(max_lag + 1);
  for (std::size_t tau = 0; tau <= max_lag; ++tau) ref[tau] = msm_covariance(spec, static_cast<double>(tau) * spec.dt);
  auto evaluate = [&](double T, std::size_t at) {
    SampleConfig sc;
    sc.temperature = T;
    sc.n_steps = at + max_lag + 1;
    sc.n_samples = 10000;
    sc.seed = seed;
    const auto slice = covariance_slice(sample(st.params, sc), at, max_lag);
    return agreement(slice.value, slice.stderr_, ref, min_lag, max_lag);
  };
  auto visit = [&](double T) {
    const SweepPoint p{T, evaluate(T, t1)};
    log(fmt("seed %llu T %.4f: %zu/%zu within 3 SE, max |z| %.2f", static_cast<unsigned long long>(seed), T,
            p.a.within, p.a.total, p.a.max_abs_z));
    if (p.better_than(run.best) || run.best.a.total == 0) run.best = p;
    return p.a.fraction() >= 0.95;
  };
  // Coarse geometric sweep, then a fine one around the best coarse point.
  bool found = false;
  for (double T = 0.05; T <= 2.0 && !found; T *= 1.2) found = visit(T);
  const double centre = run.best.T;
  for (double T = centre / 1.2; T <= centre * 1.2 && !found; T *= 1.02) found = visit(T);
  run.late = evaluate(run.best.T, 40);
  return run;
}

Outcome gp_learning() {
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = gp_learning_run(seed);
    detail += fmt("seed %llu: held-out loss %.2f (optimum %.2f), best T %.4f with %zu/%zu lags within 3 SE at t1 = 20 "
                  "(max |z| %.2f; diagnostic t1 = 40: %zu/%zu)%s",
                  static_cast<unsigned long long>(seed), r.heldout_loss, r.optimal_loss, r.best.T, r.best.a.within,
                  r.best.a.total, r.best.a.max_abs_z, r.late.within, r.late.total, r.pass() ? "" : "; ");
    log(detail);
    if (r.pass()) return {true, detail};
  }
  return {false, detail};
}

// ---------------------------------------------------------------------------
// 8. File formats and CLI exit codes

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("cmps_acceptance_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Outcome formats_and_cli() {
  TempDir tmp;
  std::mt19937_64 rng(8);
  int failures = 0;
  for (int trial = 0; trial < 50; ++trial) {
    SignalSet s(gen::uniform_int(rng, 0, 8), gen::uniform_int(rng, 1, 64), std::pow(10.0, gen::uniform(rng, -6, 0)));
    for (double& x : s.data) x = gen::uniform(rng, -1, 1) * std::pow(10.0, gen::uniform(rng, -300, 300));
    const auto path = tmp.path / "s.cmps";
    write_signal_set(path, s);
    const auto back = read_signal_set(path);
    failures += !(back.n_signals == s.n_signals && back.length == s.length && back.dt == s.dt && back.data == s.data &&
                  encode_signal_set(back) == encode_signal_set(s));

    const auto c = gen::gradient_case(900 + trial, trial % 2 ? Coupling::Direct : Coupling::Derivative,
                                      trial % 3 ? StateKind::Pure : StateKind::Density);
    Checkpoint ck;
    ck.params = c.params;
    ck.loss = c.loss;
    ck.step = static_cast<std::size_t>(trial);
    ck.seed = rng();
    ck.train.seed = ck.seed;
    for (double x : flatten(c.params)) {
      ck.optimizer.m.push_back(x / 3.0);
      ck.optimizer.v.push_back(x * x / 7.0);
    }
    write_checkpoint(tmp.path / "c.json", ck);
    const auto cb = read_checkpoint(tmp.path / "c.json");
    failures += !(flatten(cb.params) == flatten(ck.params) && cb.optimizer.m == ck.optimizer.m &&
                  cb.optimizer.v == ck.optimizer.v && encode_checkpoint(cb) == encode_checkpoint(ck));
  }

  auto config = [&](double omega) {
    const auto path = (tmp.path / ("msm_" + std::to_string(static_cast<int>(omega)) + ".json")).string();
    nlohmann::json j = {{"seed", 5},
                        {"process",
                         {{"kind", "msm"},
                          {"n_signals", 10000},
                          {"msm", {{"components", {{{"sigma", 2.0}, {"lambda", 50.0}, {"omega", omega}}}}, {"length", 51}}}}},
                        {"eval", {{"max_lag", 50}}}};
    std::ofstream(path) << j.dump();
    return path;
  };
  const auto right = config(300.0), wrong = config(500.0);
  const std::string out = tmp.path.string(), data = (tmp.path / "data.cmps").string();
  std::ostringstream sink;
  const int gen_code = run_cli({"--config", right, "--out", out, "gen"}, sink, sink);
  const int ok_code = run_cli({"--config", right, "--out", out, "eval", data}, sink, sink);
  const int bad_code = run_cli({"--config", wrong, "--out", out, "eval", data}, sink, sink);

  const bool pass = failures == 0 && gen_code == kExitOk && ok_code == kExitOk && bad_code == kExitEvalFail;
  return {pass, fmt("100 randomized round trips, %d mismatches; eval exit codes: correct spec %d, wrong omega0 %d",
                    failures, ok_code, bad_code)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "gradient correctness", gradient_correctness},
      {2, "pure/density consistency", pure_density_consistency},
      {3, "exact discretization", exact_discretization},
      {4, "FPP correlator asymmetry", fpp_asymmetry},
      {5, "sampler noise contract", sampler_noise},
      {6, "training smoke and sine recovery", sine_recovery},
      {7, "GP model-learning loop", gp_learning},
      {8, "file formats and CLI exit codes", formats_and_cli},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  bool all_pass = true;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d (%s): %s [%.1f s] %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
