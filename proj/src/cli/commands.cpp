#include <omp.h>

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cmps/checkpoint.hpp"
#include "cmps/cli.hpp"
#include "cmps/config.hpp"

namespace cmps {

namespace fs = std::filesystem;

namespace {

struct Context {
  RunConfig cfg;
  fs::path out_dir;
  std::ostream& out;
  std::ostream& err;
};

bool same_dt(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

std::string loss_csv(const std::vector<std::string>& kept, const std::vector<LossRecord>& rows) {
  std::ostringstream os;
  os << "step,data_loss,reg_loss,total\n";
  for (const auto& line : kept) os << line << '\n';
  for (const auto& r : rows)
    os << r.step << ',' << format_double(r.data_loss) << ',' << format_double(r.reg_loss) << ','
       << format_double(r.total) << '\n';
  return os.str();
}

/// Rows of an existing loss curve with step < before.
std::vector<std::string> earlier_loss_rows(const fs::path& path, std::size_t before) {
  std::vector<std::string> rows;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoull(line.substr(0, line.find(','))) < before) rows.push_back(line);
  }
  return rows;
}

// ---------------------------------------------------------------------------

int cmd_gen(Context& ctx, std::optional<std::size_t> n_override, const std::string& output) {
  auto& pc = ctx.cfg.process;
  const std::size_t n = n_override.value_or(pc.n_signals);
  SignalSet set;
  switch (pc.kind) {
    case ProcessKind::DampedSine: set = gen_damped_sines(pc.damped_sine, n, ctx.cfg.seed); break;
    case ProcessKind::Msm: set = gen_gp(pc.msm, n, pc.msm_length, ctx.cfg.seed, pc.msm_init); break;
    case ProcessKind::Fpp: set = gen_fpp(pc.fpp, n, ctx.cfg.seed); break;
  }
  const fs::path path = output.empty() ? ctx.out_dir / "data.cmps" : fs::path(output);
  write_signal_set(path, set);
  ctx.err << "wrote " << set.n_signals << " x " << set.length << " signals to " << path.string() << '\n';
  return kExitOk;
}

int cmd_train(Context& ctx, const std::string& dataset_path, const std::string& resume,
              std::optional<std::size_t> steps) {
  const SignalSet data = read_signal_set(dataset_path);
  TrainState state;
  TrainConfig tc = ctx.cfg.train;
  LossConfig lc = ctx.cfg.loss;
  if (!resume.empty()) {
    const Checkpoint ck = read_checkpoint(resume);
    state.params = ck.params;
    state.optimizer = ck.optimizer;
    state.step = ck.step;
    lc = ck.loss;
    const std::size_t max_steps = tc.max_steps;
    tc = ck.train;
    tc.max_steps = max_steps;
  } else {
    state.params = init_params(ctx.cfg.model, ctx.cfg.seed);
  }
  if (steps) tc.max_steps = *steps;

  if (!same_dt(data.dt, state.params.dt)) {
    ctx.err << "dataset dt " << format_double(data.dt) << " differs from model dt "
            << format_double(state.params.dt) << '\n';
    if (!ctx.cfg.allow_dt_mismatch) return kExitDtMismatch;
    ctx.err << "continuing with the model dt (allow_dt_mismatch)\n";
  }

  const fs::path loss_path = ctx.out_dir / "loss.csv";
  const auto kept = resume.empty() ? std::vector<std::string>{} : earlier_loss_rows(loss_path, state.step);
  auto save = [&](const TrainState& s, const fs::path& path) {
    write_checkpoint(path, Checkpoint{s.params, s.optimizer, s.step, tc.seed, lc, tc});
  };
  const std::size_t report_every = std::max<std::size_t>(1, tc.max_steps / 20);
  TrainCallbacks cb;
  cb.on_step = [&](const LossRecord& r) {
    if (r.step % report_every == 0)
      ctx.err << "step " << r.step << "  loss " << format_double(r.total) << '\n';
  };
  cb.on_checkpoint = [&](const TrainState& s) {
    if (tc.checkpoint_interval > 0 && s.step % tc.checkpoint_interval == 0)
      save(s, ctx.out_dir / ("checkpoint_step" + std::to_string(s.step) + ".json"));
  };
  const auto history = train(state, tc, lc, data, cb);
  save(state, ctx.out_dir / "checkpoint.json");
  write_file_atomic(loss_path, loss_csv(kept, history));
  ctx.err << "trained to step " << state.step << "; checkpoint " << (ctx.out_dir / "checkpoint.json").string()
          << '\n';
  return kExitOk;
}

int cmd_sample(Context& ctx, const std::string& ckpt_path, std::vector<double> temperatures,
               std::optional<std::size_t> n, std::optional<std::size_t> length) {
  Checkpoint ck;
  try {
    ck = read_checkpoint(ckpt_path);
  } catch (const Error& e) {
    ctx.err << "cannot read checkpoint: " << e.what() << '\n';
    return kExitConfig;
  }
  const std::string hash = checkpoint_hash(ckpt_path);
  SampleConfig sc = ctx.cfg.sample;
  if (n) sc.n_samples = *n;
  if (length) sc.n_steps = *length;
  if (temperatures.empty()) temperatures = ctx.cfg.temperatures;
  if (temperatures.empty()) temperatures.push_back(sc.temperature);
  for (double T : temperatures) {
    sc.temperature = T;
    SignalSet set = sample(ck.params, sc);
    set.metadata["checkpoint"] = ckpt_path;
    set.metadata["checkpoint_hash"] = hash;
    set.metadata["n_samples"] = std::to_string(sc.n_samples);
    set.metadata["n_steps"] = std::to_string(sc.n_steps);
    const fs::path path = ctx.out_dir / ("samples_T" + format_double(T) + ".cmps");
    write_signal_set(path, set);
    ctx.err << "wrote " << path.string() << '\n';
  }
  return kExitOk;
}

std::vector<double> index_grid(std::size_t from, std::size_t to) {
  std::vector<double> g;
  for (std::size_t i = from; i <= to; ++i) g.push_back(static_cast<double>(i));
  return g;
}

std::vector<CorrelatorReport> eval_covariance(const Context& ctx, const SignalSet& data, const SignalSet* other) {
  const auto& ec = ctx.cfg.eval;
  const auto slice = covariance_slice(data, ec.t1, ec.max_lag, ec.centered);
  std::vector<double> emp(slice.value.begin() + ec.min_lag, slice.value.end());
  std::vector<double> se(slice.stderr_.begin() + ec.min_lag, slice.stderr_.end());
  std::vector<double> ref;
  if (other) {
    if (other->length != data.length || !same_dt(other->dt, data.dt))
      throw GridMismatchError("reference dataset grid differs from the evaluated dataset");
    const auto rs = covariance_slice(*other, ec.t1, ec.max_lag, ec.centered);
    ref.assign(rs.value.begin() + ec.min_lag, rs.value.end());
    for (std::size_t i = 0; i < se.size(); ++i) se[i] = std::hypot(se[i], rs.stderr_[ec.min_lag + i]);
  } else {
    if (ctx.cfg.process.kind != ProcessKind::Msm)
      throw ConfigError("covariance against a process needs process.kind = msm");
    const auto& msm = ctx.cfg.process.msm;
    if (!same_dt(msm.dt, data.dt)) throw GridMismatchError("dataset dt differs from process.msm.dt");
    for (std::size_t tau = ec.min_lag; tau <= ec.max_lag; ++tau)
      ref.push_back(msm_covariance(msm, static_cast<double>(tau) * data.dt));
  }
  std::vector<double> t1(emp.size(), static_cast<double>(ec.t1));
  return {compare("covariance", t1, index_grid(ec.t1 + ec.min_lag, ec.t1 + ec.max_lag), emp, se, ref, ec.policy)};
}

std::vector<CorrelatorReport> eval_third_order(const Context& ctx, const SignalSet& data, const SignalSet* other) {
  const auto& ec = ctx.cfg.eval;
  if (ec.t1 + ec.max_lag >= data.length) throw OutOfRangeError("t1 + max_lag exceeds the signal length");
  const auto est = empirical_third_order(data, ec.t1);
  const std::size_t a = ec.min_lag, b = ec.max_lag + 1;
  auto cut = [&](const std::vector<double>& v) { return std::vector<double>(v.begin() + a, v.begin() + b); };
  const std::vector<double> t1(b - a, static_cast<double>(ec.t1));
  const auto t2 = index_grid(ec.t1 + a, ec.t1 + ec.max_lag);

  if (ec.reference == EvalReference::Symmetry) {
    std::vector<double> diff, zero(b - a, 0.0);
    for (std::size_t j = a; j < b; ++j) diff.push_back(est.x3x[j] - est.xx3[j]);
    return {compare("x3x_minus_xx3", t1, t2, diff, cut(est.diff_stderr), zero, ec.policy)};
  }

  std::vector<double> ref_a, ref_b, se_a = cut(est.x3x_stderr), se_b = cut(est.xx3_stderr);
  if (other) {
    if (other->length != data.length || !same_dt(other->dt, data.dt))
      throw GridMismatchError("reference dataset grid differs from the evaluated dataset");
    const auto ro = empirical_third_order(*other, ec.t1);
    ref_a = cut(ro.x3x);
    ref_b = cut(ro.xx3);
    for (std::size_t i = 0; i < se_a.size(); ++i) {
      se_a[i] = std::hypot(se_a[i], ro.x3x_stderr[a + i]);
      se_b[i] = std::hypot(se_b[i], ro.xx3_stderr[a + i]);
    }
  } else {
    if (ctx.cfg.process.kind != ProcessKind::Fpp)
      throw ConfigError("third-order against a process needs process.kind = fpp");
    const auto& fpp = ctx.cfg.process.fpp;
    if (!same_dt(fpp.dt, data.dt)) throw GridMismatchError("dataset dt differs from process.fpp.dt");
    for (std::size_t j = a; j < b; ++j) {
      const auto c = fpp_exact_correlators(fpp, 0.0, static_cast<double>(j) * fpp.dt);
      ref_a.push_back(c.x3x);
      ref_b.push_back(c.xx3);
    }
  }
  return {compare("x3x", t1, t2, cut(est.x3x), se_a, ref_a, ec.policy),
          compare("xx3", t1, t2, cut(est.xx3), se_b, ref_b, ec.policy)};
}

int cmd_eval(Context& ctx, const std::string& dataset_path, const std::string& against) {
  const SignalSet data = read_signal_set(dataset_path);
  std::optional<SignalSet> other;
  if (!against.empty()) {
    other = read_signal_set(against);
    ctx.cfg.eval.reference = EvalReference::Dataset;
  } else if (ctx.cfg.eval.reference == EvalReference::Dataset) {
    throw ConfigError("eval.reference = dataset needs --against");
  }
  const SignalSet* ref = other ? &*other : nullptr;
  std::vector<CorrelatorReport> reports;
  if (ctx.cfg.eval.stat == EvalStat::Covariance) {
    if (ctx.cfg.eval.reference == EvalReference::Symmetry)
      throw ConfigError("eval.reference = symmetry applies to the third-order statistic only");
    reports = eval_covariance(ctx, data, ref);
  } else {
    reports = eval_third_order(ctx, data, ref);
  }
  bool pass = true;
  for (const auto& r : reports) {
    write_file_atomic(ctx.out_dir / ("eval_" + r.name + ".csv"), report_csv(r));
    ctx.out << report_summary(r);
    pass = pass && r.pass;
  }
  return pass ? kExitOk : kExitEvalFail;
}

int cmd_inspect(Context& ctx, const std::string& path, bool defaults) {
  if (defaults) {
    ctx.out << to_json(RunConfig{}).dump(2) << '\n';
    return kExitOk;
  }
  if (path.empty()) throw ConfigError("inspect needs a path or --defaults");
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "CMPS")) {
    const SignalSet set = decode_signal_set(bytes);
    ctx.out << "format: signal set v" << kSignalSetVersion << '\n'
            << "n_signals: " << set.n_signals << '\n'
            << "length: " << set.length << '\n'
            << "dt: " << format_double(set.dt) << '\n';
    const auto meta = metadata_path(path);
    if (fs::exists(meta)) {
      const auto mb = read_file_bytes(meta);
      ctx.out << "metadata:\n" << format_metadata(parse_metadata(std::string(mb.begin(), mb.end())));
    }
    return kExitOk;
  }
  const std::string text(bytes.begin(), bytes.end());
  if (text.find("cmps-checkpoint") != std::string::npos) {
    const Checkpoint ck = decode_checkpoint(text);
    const auto& p = ck.params;
    ctx.out << "format: checkpoint v" << kCheckpointSchemaVersion << '\n'
            << "D: " << p.bond_dim() << '\n'
            << "step: " << ck.step << '\n'
            << "dt: " << format_double(p.dt) << '\n'
            << "sigma: " << format_double(p.sigma) << '\n'
            << "coupling: " << to_string(p.coupling) << '\n'
            << "zero_R_diagonal: " << (p.zero_R_diagonal ? "true" : "false") << '\n'
            << "density_rank: " << (p.W ? p.W->rows() : 0) << '\n'
            << "A: " << format_double(p.A) << '\n'
            << "loss: " << to_json(ck.loss).dump() << '\n'
            << "train: " << to_json(ck.train).dump() << '\n'
            << "hash: " << fnv1a_hex(bytes) << '\n';
    return kExitOk;
  }
  throw FormatError("unknown file format: " + path);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cMPS generative model: generate, train, sample, evaluate", "cmps"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = ".";
  std::uint64_t seed = 0;
  int threads = 0;
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--config", config_path, "JSON run config");
  app.add_option("--threads", threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", out_dir, "output directory");

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  std::size_t gen_n = 0;
  std::string gen_output;
  auto* gen_n_opt = gen->add_option("--n", gen_n, "number of signals");
  gen->add_option("-o,--output", gen_output, "output file (default <out>/data.cmps)");

  auto* tr = app.add_subcommand("train", "train a model on a dataset");
  std::string tr_dataset, tr_resume;
  std::size_t tr_steps = 0;
  bool allow_dt = false;
  tr->add_option("dataset", tr_dataset, "dataset file")->required();
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");
  auto* tr_steps_opt = tr->add_option("--steps", tr_steps, "max_steps override");
  tr->add_flag("--allow-dt-mismatch", allow_dt, "train even when the dataset dt differs from the model dt");

  auto* sm = app.add_subcommand("sample", "generate signals from a checkpoint");
  std::string sm_ckpt;
  std::vector<double> sm_temps;
  std::size_t sm_n = 0, sm_len = 0;
  sm->add_option("checkpoint", sm_ckpt, "checkpoint file")->required();
  sm->add_option("-T,--temperature", sm_temps, "temperature; repeat for a sweep");
  auto* sm_n_opt = sm->add_option("--n", sm_n, "number of samples");
  auto* sm_len_opt = sm->add_option("--length", sm_len, "samples per signal");

  auto* ev = app.add_subcommand("eval", "compare dataset statistics against a reference");
  std::string ev_dataset, ev_against, ev_stat;
  ev->add_option("dataset", ev_dataset, "dataset file")->required();
  ev->add_option("--against", ev_against, "reference dataset instead of the configured process");
  ev->add_option("--stat", ev_stat, "covariance | third-order");

  auto* in = app.add_subcommand("inspect", "print a dataset or checkpoint summary");
  std::string in_path;
  bool in_defaults = false;
  in->add_option("path", in_path, "file to inspect");
  in->add_flag("--defaults", in_defaults, "print the default run config");

  std::vector<std::string> argv_store{"cmps"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    Context ctx{config_path.empty() ? RunConfig{} : load_run_config(config_path), out_dir, out, err};
    if (seed_opt->count()) {
      ctx.cfg.seed = seed;
      ctx.cfg.train.seed = seed;
      ctx.cfg.sample.seed = seed;
    }
    if (allow_dt) ctx.cfg.allow_dt_mismatch = true;
    if (!ev_stat.empty()) {
      if (ev_stat == "covariance")
        ctx.cfg.eval.stat = EvalStat::Covariance;
      else if (ev_stat == "third-order")
        ctx.cfg.eval.stat = EvalStat::ThirdOrder;
      else
        throw ConfigError("--stat must be covariance or third-order");
    }
    if (threads > 0) omp_set_num_threads(threads);
    if (!*in) fs::create_directories(ctx.out_dir);

    if (*gen) return cmd_gen(ctx, gen_n_opt->count() ? std::optional(gen_n) : std::nullopt, gen_output);
    if (*tr) return cmd_train(ctx, tr_dataset, tr_resume, tr_steps_opt->count() ? std::optional(tr_steps) : std::nullopt);
    if (*sm)
      return cmd_sample(ctx, sm_ckpt, sm_temps, sm_n_opt->count() ? std::optional(sm_n) : std::nullopt,
                        sm_len_opt->count() ? std::optional(sm_len) : std::nullopt);
    if (*ev) return cmd_eval(ctx, ev_dataset, ev_against);
    if (*in) return cmd_inspect(ctx, in_path, in_defaults);
  } catch (const NonFiniteError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ZeroNormError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace cmps
