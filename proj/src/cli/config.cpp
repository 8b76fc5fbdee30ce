#include "cmps/config.hpp"

#include <fstream>
#include <set>

namespace cmps {

using nlohmann::json;

const char* to_string(ProcessKind k) noexcept {
  switch (k) {
    case ProcessKind::DampedSine: return "damped_sine";
    case ProcessKind::Msm: return "msm";
    case ProcessKind::Fpp: return "fpp";
  }
  return "?";
}

ProcessKind parse_process_kind(std::string_view s) {
  if (s == "damped_sine") return ProcessKind::DampedSine;
  if (s == "msm") return ProcessKind::Msm;
  if (s == "fpp") return ProcessKind::Fpp;
  throw ConfigError("unknown process kind '" + std::string(s) + "' (expected damped_sine|msm|fpp)");
}

namespace {

const char* to_string(EvalStat s) { return s == EvalStat::Covariance ? "covariance" : "third-order"; }

EvalStat parse_eval_stat(std::string_view s) {
  if (s == "covariance") return EvalStat::Covariance;
  if (s == "third-order") return EvalStat::ThirdOrder;
  throw ConfigError("unknown eval stat '" + std::string(s) + "' (expected covariance|third-order)");
}

const char* to_string(EvalReference r) {
  switch (r) {
    case EvalReference::Process: return "process";
    case EvalReference::Dataset: return "dataset";
    case EvalReference::Symmetry: return "symmetry";
  }
  return "?";
}

EvalReference parse_eval_reference(std::string_view s) {
  if (s == "process") return EvalReference::Process;
  if (s == "dataset") return EvalReference::Dataset;
  if (s == "symmetry") return EvalReference::Symmetry;
  throw ConfigError("unknown eval reference '" + std::string(s) + "' (expected process|dataset|symmetry)");
}

/// Reads the keys of one JSON object; finish() rejects keys that were never read.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
  }

  std::string key_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }

  void count(const char* key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "a nonnegative integer");
      out = v->get<std::size_t>();
    }
  }

  void integer(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      out = v->get<int>();
    }
  }

  void u64(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void boolean(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "true or false");
      out = v->get<bool>();
    }
  }

  template <typename E, typename Parse>
  void enumeration(const char* key, E& out, Parse parse) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      try {
        out = parse(v->get<std::string>());
      } catch (const ConfigError& e) {
        throw ConfigError(key_path(key) + ": " + e.what());
      }
    }
  }

  void optional_number(const char* key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null())
        out.reset();
      else if (v->is_number())
        out = v->get<double>();
      else
        fail(key, "a number or null");
    }
  }

  void numbers(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of numbers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number()) fail(key, "an array of numbers");
        out.push_back(x.get<double>());
      }
    }
  }

  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw ConfigError("config key '" + key_path(key) + "' must be " + expected);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + (path_.empty() ? k : path_ + "." + k) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const LossConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"state", to_string(c.state)},
          {"reg_H_variance", opt(c.reg_H_variance)},
          {"reg_R_variance", opt(c.reg_R_variance)},
          {"sample_rate", c.sample_rate},
          {"learn_omega", c.learn_omega},
          {"learn_R", c.learn_R},
          {"learn_A", c.learn_A},
          {"learn_initial", c.learn_initial}};
}

LossConfig loss_config_from_json(const json& j, const std::string& where) {
  LossConfig c;
  Reader r(j, where);
  r.enumeration("kind", c.kind, parse_loss_kind);
  r.enumeration("state", c.state, parse_state_kind);
  r.number("sample_rate", c.sample_rate);
  // "nyquist" selects the sigma_f = s/4 prior.
  if (const json* v = j.is_object() && j.contains("reg_H_variance") ? &j["reg_H_variance"] : nullptr;
      v && v->is_string()) {
    r.find("reg_H_variance");
    if (*v != "nyquist") r.fail("reg_H_variance", "a number, null or \"nyquist\"");
    c.reg_H_variance = nyquist_omega_variance(c.sample_rate);
  } else {
    r.optional_number("reg_H_variance", c.reg_H_variance);
  }
  r.optional_number("reg_R_variance", c.reg_R_variance);
  r.boolean("learn_omega", c.learn_omega);
  r.boolean("learn_R", c.learn_R);
  r.boolean("learn_A", c.learn_A);
  r.boolean("learn_initial", c.learn_initial);
  r.finish();
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"max_steps", c.max_steps},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"decay_steps", c.decay_steps},
          {"clip_norm", c.clip_norm},
          {"lr_scale_omega", c.lr_scale_omega},
          {"lr_scale_R", c.lr_scale_R},
          {"lr_scale_A", c.lr_scale_A},
          {"lr_scale_initial", c.lr_scale_initial},
          {"checkpoint_interval", c.checkpoint_interval}};
}

TrainConfig train_config_from_json(const json& j, const std::string& where) {
  TrainConfig c;
  Reader r(j, where);
  r.count("batch_size", c.batch_size);
  r.count("max_steps", c.max_steps);
  r.number("learning_rate", c.learning_rate);
  r.number("beta1", c.beta1);
  r.number("beta2", c.beta2);
  r.number("epsilon", c.epsilon);
  r.number("decay_steps", c.decay_steps);
  r.number("clip_norm", c.clip_norm);
  r.number("lr_scale_omega", c.lr_scale_omega);
  r.number("lr_scale_R", c.lr_scale_R);
  r.number("lr_scale_A", c.lr_scale_A);
  r.number("lr_scale_initial", c.lr_scale_initial);
  r.count("checkpoint_interval", c.checkpoint_interval);
  r.finish();
  c.validate();
  return c;
}

namespace {

InitConfig model_from_json(const json& j) {
  InitConfig c;
  Reader r(j, "model");
  r.integer("bond_dim", c.bond_dim);
  r.number("dt", c.dt);
  r.number("sigma", c.sigma);
  r.enumeration("coupling", c.coupling, parse_coupling);
  r.boolean("zero_R_diagonal", c.zero_R_diagonal);
  r.number("omega_std", c.omega_std);
  r.number("R_scale", c.R_scale);
  r.integer("density_rank", c.density_rank);
  r.finish();
  if (c.bond_dim < 1) throw ConfigError("model.bond_dim must be >= 1");
  if (!(c.dt > 0.0)) throw ConfigError("model.dt must be > 0");
  if (!(c.sigma > 0.0)) throw ConfigError("model.sigma must be > 0");
  return c;
}

json to_json(const InitConfig& c) {
  return {{"bond_dim", c.bond_dim},   {"dt", c.dt},
          {"sigma", c.sigma},         {"coupling", to_string(c.coupling)},
          {"zero_R_diagonal", c.zero_R_diagonal}, {"omega_std", c.omega_std},
          {"R_scale", c.R_scale},     {"density_rank", c.density_rank}};
}

void sample_from_json(const json& j, RunConfig& rc) {
  Reader r(j, "sample");
  r.number("temperature", rc.sample.temperature);
  r.numbers("temperatures", rc.temperatures);
  r.count("n_steps", rc.sample.n_steps);
  r.count("n_samples", rc.sample.n_samples);
  r.enumeration("state", rc.sample.state, parse_state_kind);
  r.number("x0", rc.sample.x0);
  r.finish();
  rc.sample.validate();
  for (double t : rc.temperatures)
    if (!(t >= 0.0)) throw ConfigError("sample.temperatures must be >= 0");
}

json sample_to_json(const RunConfig& rc) {
  return {{"temperature", rc.sample.temperature}, {"temperatures", rc.temperatures},
          {"n_steps", rc.sample.n_steps},         {"n_samples", rc.sample.n_samples},
          {"state", to_string(rc.sample.state)},  {"x0", rc.sample.x0}};
}

ProcessConfig process_from_json(const json& j) {
  ProcessConfig c;
  Reader r(j, "process");
  r.enumeration("kind", c.kind, parse_process_kind);
  r.count("n_signals", c.n_signals);
  if (const json* v = r.find("damped_sine")) {
    Reader s(*v, "process.damped_sine");
    auto& d = c.damped_sine;
    s.numbers("frequencies", d.frequencies);
    s.number("sample_rate", d.sample_rate);
    s.count("length", d.length);
    s.number("gamma_alpha", d.gamma_alpha);
    s.number("gamma_beta", d.gamma_beta);
    s.enumeration("gamma_convention", d.convention, parse_gamma_convention);
    s.number("delay_unit", d.delay_unit);
    s.number("decay_time", d.decay_time);
    s.number("amplitude", d.amplitude);
    s.finish();
  }
  if (const json* v = r.find("msm")) {
    Reader s(*v, "process.msm");
    if (const json* comps = s.find("components")) {
      if (!comps->is_array()) s.fail("components", "an array of objects");
      c.msm.components.clear();
      for (const auto& cj : *comps) {
        Reader cr(cj, "process.msm.components[]");
        MsmComponent mc;
        cr.number("sigma", mc.sigma);
        cr.number("lambda", mc.lambda);
        cr.number("omega", mc.omega);
        cr.finish();
        c.msm.components.push_back(mc);
      }
    }
    s.number("dt", c.msm.dt);
    s.count("length", c.msm_length);
    s.enumeration("init", c.msm_init, parse_gp_init);
    s.finish();
  }
  if (const json* v = r.find("fpp")) {
    Reader s(*v, "process.fpp");
    auto& f = c.fpp;
    s.number("intensity", f.intensity);
    s.number("amplitude", f.amplitude);
    s.number("tau", f.tau);
    s.number("omega", f.omega);
    s.number("dt", f.dt);
    s.count("length", f.length);
    s.count("burn_in", f.burn_in);
    s.finish();
  }
  r.finish();
  c.damped_sine.validate();
  c.msm.validate();
  c.fpp.validate();
  return c;
}

json to_json(const ProcessConfig& c) {
  json comps = json::array();
  for (const auto& m : c.msm.components) comps.push_back({{"sigma", m.sigma}, {"lambda", m.lambda}, {"omega", m.omega}});
  const auto& d = c.damped_sine;
  const auto& f = c.fpp;
  return {{"kind", to_string(c.kind)},
          {"n_signals", c.n_signals},
          {"damped_sine",
           {{"frequencies", d.frequencies},
            {"sample_rate", d.sample_rate},
            {"length", d.length},
            {"gamma_alpha", d.gamma_alpha},
            {"gamma_beta", d.gamma_beta},
            {"gamma_convention", to_string(d.convention)},
            {"delay_unit", d.delay_unit},
            {"decay_time", d.decay_time},
            {"amplitude", d.amplitude}}},
          {"msm", {{"components", comps}, {"dt", c.msm.dt}, {"length", c.msm_length}, {"init", to_string(c.msm_init)}}},
          {"fpp",
           {{"intensity", f.intensity},
            {"amplitude", f.amplitude},
            {"tau", f.tau},
            {"omega", f.omega},
            {"dt", f.dt},
            {"length", f.length},
            {"burn_in", f.burn_in}}}};
}

EvalConfig eval_from_json(const json& j) {
  EvalConfig c;
  Reader r(j, "eval");
  r.enumeration("stat", c.stat, parse_eval_stat);
  r.enumeration("reference", c.reference, parse_eval_reference);
  r.count("t1", c.t1);
  r.count("min_lag", c.min_lag);
  r.count("max_lag", c.max_lag);
  r.boolean("centered", c.centered);
  r.number("k_sigma", c.policy.k_sigma);
  r.number("pass_fraction", c.policy.pass_fraction);
  r.finish();
  if (c.min_lag > c.max_lag) throw ConfigError("eval.min_lag must be <= eval.max_lag");
  if (!(c.policy.k_sigma > 0.0)) throw ConfigError("eval.k_sigma must be > 0");
  if (!(c.policy.pass_fraction >= 0.0 && c.policy.pass_fraction <= 1.0))
    throw ConfigError("eval.pass_fraction must lie in [0, 1]");
  return c;
}

json to_json(const EvalConfig& c) {
  return {{"stat", to_string(c.stat)},  {"reference", to_string(c.reference)}, {"t1", c.t1},
          {"min_lag", c.min_lag},       {"max_lag", c.max_lag},                {"centered", c.centered},
          {"k_sigma", c.policy.k_sigma}, {"pass_fraction", c.policy.pass_fraction}};
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  Reader r(j, "");
  r.u64("seed", c.seed);
  r.boolean("allow_dt_mismatch", c.allow_dt_mismatch);
  if (const json* v = r.find("model")) c.model = model_from_json(*v);
  if (const json* v = r.find("loss")) c.loss = loss_config_from_json(*v);
  if (const json* v = r.find("train")) c.train = train_config_from_json(*v);
  if (const json* v = r.find("sample")) sample_from_json(*v, c);
  if (const json* v = r.find("process")) c.process = process_from_json(*v);
  if (const json* v = r.find("eval")) c.eval = eval_from_json(*v);
  r.finish();
  c.train.seed = c.seed;
  c.sample.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"allow_dt_mismatch", c.allow_dt_mismatch},
          {"model", to_json(c.model)},
          {"loss", to_json(c.loss)},
          {"train", to_json(c.train)},
          {"sample", sample_to_json(c)},
          {"process", to_json(c.process)},
          {"eval", to_json(c.eval)}};
}

}  // namespace cmps
