#include "cmps/checkpoint.hpp"

#include "cmps/config.hpp"

namespace cmps {

using nlohmann::json;

namespace {

json complex_rows(const MatrixXcd& m) {
  json rows = json::array();
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    json row = json::array();
    for (Eigen::Index b = 0; b < m.cols(); ++b) row.push_back({m(a, b).real(), m(a, b).imag()});
    rows.push_back(row);
  }
  return rows;
}

json complex_vector(const VectorXcd& v) {
  json out = json::array();
  for (Eigen::Index a = 0; a < v.size(); ++a) out.push_back({v(a).real(), v(a).imag()});
  return out;
}

cplx complex_from(const json& pair) {
  if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
    throw FormatError("complex entries must be [re, im] pairs");
  return {pair[0].get<double>(), pair[1].get<double>()};
}

MatrixXcd matrix_from(const json& rows, Eigen::Index cols) {
  if (!rows.is_array()) throw FormatError("matrix must be an array of rows");
  MatrixXcd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    const json& row = rows[a];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw FormatError("ragged matrix row");
    for (Eigen::Index b = 0; b < cols; ++b) m(a, b) = complex_from(row[b]);
  }
  return m;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  const auto& p = c.params;
  json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["format"] = "cmps-checkpoint";
  j["hyperparameters"] = {{"bond_dim", p.bond_dim()},
                          {"dt", p.dt},
                          {"sigma", p.sigma},
                          {"coupling", to_string(p.coupling)},
                          {"zero_R_diagonal", p.zero_R_diagonal},
                          {"density_rank", p.W ? p.W->rows() : 0}};
  j["omega"] = std::vector<double>(p.omega.data(), p.omega.data() + p.omega.size());
  j["R"] = complex_rows(p.R);
  j["A"] = p.A;
  j["psi0"] = complex_vector(p.psi0);
  j["W"] = p.W ? complex_rows(*p.W) : json(nullptr);
  j["step"] = c.step;
  j["rng"] = {{"master_seed", c.seed}, {"next_stream", c.step}};
  j["optimizer"] = {{"m", c.optimizer.m}, {"v", c.optimizer.v}, {"step", c.optimizer.step}};
  j["loss"] = to_json(c.loss);
  j["train"] = to_json(c.train);
  return j.dump(1) + "\n";
}

Checkpoint decode_checkpoint(const std::string& text) {
  Checkpoint c;
  try {
    const json j = json::parse(text);
    if (!j.is_object() || j.value("format", "") != "cmps-checkpoint") throw FormatError("not a cmps checkpoint");
    if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion)
      throw FormatError("unsupported checkpoint schema_version");
    const json& h = j.at("hyperparameters");
    auto& p = c.params;
    const int D = h.at("bond_dim").get<int>();
    p.dt = h.at("dt").get<double>();
    p.sigma = h.at("sigma").get<double>();
    p.coupling = parse_coupling(h.at("coupling").get<std::string>());
    p.zero_R_diagonal = h.at("zero_R_diagonal").get<bool>();
    const auto omega = j.at("omega").get<std::vector<double>>();
    if (static_cast<int>(omega.size()) != D) throw FormatError("omega length differs from bond_dim");
    p.omega = Eigen::Map<const VectorXd>(omega.data(), D);
    p.R = matrix_from(j.at("R"), D);
    if (p.R.rows() != D) throw FormatError("R must be D x D");
    p.A = j.at("A").get<double>();
    const json& psi = j.at("psi0");
    if (!psi.is_array() || static_cast<int>(psi.size()) != D) throw FormatError("psi0 length differs from bond_dim");
    p.psi0.resize(D);
    for (int a = 0; a < D; ++a) p.psi0(a) = complex_from(psi[a]);
    if (!j.at("W").is_null()) p.W = matrix_from(j.at("W"), D);
    c.step = j.at("step").get<std::size_t>();
    c.seed = j.at("rng").at("master_seed").get<std::uint64_t>();
    const json& opt = j.at("optimizer");
    c.optimizer.m = opt.at("m").get<std::vector<double>>();
    c.optimizer.v = opt.at("v").get<std::vector<double>>();
    c.optimizer.step = opt.at("step").get<std::size_t>();
    c.loss = loss_config_from_json(j.at("loss"));
    c.train = train_config_from_json(j.at("train"));
    c.train.seed = c.seed;
    p.validate();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file_atomic(path, encode_checkpoint(c));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_checkpoint(std::string(bytes.begin(), bytes.end()));
}

std::string checkpoint_hash(const std::filesystem::path& path) { return fnv1a_hex(read_file_bytes(path)); }

}  // namespace cmps
