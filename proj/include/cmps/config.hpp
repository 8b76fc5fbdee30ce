#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmps/processes.hpp"
#include "cmps/sampling.hpp"
#include "cmps/stats.hpp"
#include "cmps/training.hpp"

namespace cmps {

enum class ProcessKind { DampedSine, Msm, Fpp };
const char* to_string(ProcessKind k) noexcept;
ProcessKind parse_process_kind(std::string_view s);

struct ProcessConfig {
  ProcessKind kind = ProcessKind::DampedSine;
  std::size_t n_signals = 64;
  DampedSineSpec damped_sine;
  MsmSpec msm;
  std::size_t msm_length = 512;
  GpInit msm_init = GpInit::Stationary;
  FppSpec fpp;
};

enum class EvalStat { Covariance, ThirdOrder };
enum class EvalReference { Process, Dataset, Symmetry };

struct EvalConfig {
  EvalStat stat = EvalStat::Covariance;
  EvalReference reference = EvalReference::Process;
  std::size_t t1 = 0;
  std::size_t min_lag = 0;
  std::size_t max_lag = 50;
  bool centered = false;
  TolerancePolicy policy;
};

struct RunConfig {
  std::uint64_t seed = 0;
  InitConfig model;
  LossConfig loss;
  TrainConfig train;
  SampleConfig sample;
  std::vector<double> temperatures;  ///< sample sweep; empty uses sample.temperature
  ProcessConfig process;
  EvalConfig eval;
  bool allow_dt_mismatch = false;
};

/// Strict parse: unknown keys and wrong types raise ConfigError naming the key path.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& c);

nlohmann::json to_json(const LossConfig& c);
nlohmann::json to_json(const TrainConfig& c);
LossConfig loss_config_from_json(const nlohmann::json& j, const std::string& where = "loss");
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& where = "train");

}  // namespace cmps
