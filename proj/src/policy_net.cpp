#include "topogrid/policy_net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "topogrid/errors.hpp"
#include "topogrid/rng.hpp"

namespace topogrid {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kMagic[12] = "TGRID-NNPOL";
constexpr std::uint32_t kFormatVersion = 1;

// The observation blocks that skip normalization: busbar assignments and
// line in-service flags are already small integers.
constexpr int kRawBegin = ObservationLayout::topology;
constexpr int kRawEnd = ObservationLayout::overload;

void check_observation(const Eigen::VectorXd& observation) {
  if (observation.size() != PolicyNet::kInputs)
    throw ContractViolation("observation must have " +
                            std::to_string(PolicyNet::kInputs) + " entries");
  if (!observation.allFinite())
    throw ContractViolation("observation contains a non-finite value");
}

void write_raw(std::ofstream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_raw(std::ifstream& in, void* data, std::size_t bytes, const std::string& path) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes))
    throw FormatError(path + ": checkpoint truncated");
}

void write_u32(std::ofstream& out, std::uint32_t value) { write_raw(out, &value, 4); }

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t value = 0;
  read_raw(in, &value, 4, path);
  return value;
}

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = m;
  write_raw(out, row_major.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

Eigen::MatrixXd read_matrix(std::ifstream& in, int rows, int cols, const std::string& path) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major(rows, cols);
  read_raw(in, row_major.data(), sizeof(double) * static_cast<std::size_t>(row_major.size()),
           path);
  return row_major;
}

Eigen::VectorXd read_vector(std::ifstream& in, int size, const std::string& path) {
  Eigen::VectorXd v(size);
  read_raw(in, v.data(), sizeof(double) * static_cast<std::size_t>(size), path);
  return v;
}

}  // namespace

PolicyNet::PolicyNet(std::uint64_t seed) {
  const int dims[4] = {kInputs, kHidden, kHidden, kActions};
  std::mt19937_64 rng(seed);
  for (int layer = 0; layer < 3; ++layer) {
    const int rows = dims[layer + 1];
    const int cols = dims[layer];
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        w(r, c) = bound * (2.0 * canonical_double(rng) - 1.0);
    w_.push_back(std::move(w));
    b_.emplace_back(Eigen::VectorXd::Zero(rows));
    vel_w_.emplace_back(Eigen::MatrixXd::Zero(rows, cols));
    vel_b_.emplace_back(Eigen::VectorXd::Zero(rows));
  }
  norm_mean_ = Eigen::VectorXd::Zero(kInputs);
  norm_scale_ = Eigen::VectorXd::Ones(kInputs);
}

void PolicyNet::check_layer(int layer) const {
  if (layer < 0 || layer >= 3) throw ContractViolation("layer index out of range");
}

const Eigen::MatrixXd& PolicyNet::weight(int layer) const {
  check_layer(layer);
  return w_[static_cast<std::size_t>(layer)];
}
const Eigen::VectorXd& PolicyNet::bias(int layer) const {
  check_layer(layer);
  return b_[static_cast<std::size_t>(layer)];
}
Eigen::MatrixXd& PolicyNet::weight(int layer) {
  check_layer(layer);
  return w_[static_cast<std::size_t>(layer)];
}
Eigen::VectorXd& PolicyNet::bias(int layer) {
  check_layer(layer);
  return b_[static_cast<std::size_t>(layer)];
}

Eigen::VectorXd PolicyNet::normalize(const Eigen::VectorXd& observation) const {
  return (observation - norm_mean_).cwiseQuotient(norm_scale_);
}

Eigen::VectorXd PolicyNet::forward(const Eigen::VectorXd& observation) const {
  check_observation(observation);
  const Eigen::VectorXd x = normalize(observation);
  const Eigen::VectorXd a1 = ((w_[0] * x) + b_[0]).cwiseMax(0.0);
  const Eigen::VectorXd a2 = ((w_[1] * a1) + b_[1]).cwiseMax(0.0);
  Eigen::VectorXd z = (w_[2] * a2) + b_[2];
  z.array() -= z.maxCoeff();
  Eigen::VectorXd p = z.array().exp();
  return p / p.sum();
}

double PolicyNet::train_step(const std::vector<TrainingPair>& pairs, double learning_rate) {
  if (pairs.empty()) throw ContractViolation("train_step needs at least one pair");
  if (learning_rate < 0) throw ContractViolation("learning rate must be non-negative");
  const int batch = static_cast<int>(pairs.size());
  for (const TrainingPair& pair : pairs) {
    check_observation(pair.observation);
    if (pair.action < 0 || pair.action >= kActions)
      throw ContractViolation("target action out of range");
  }

  Eigen::MatrixXd x(kInputs, batch);
  for (int k = 0; k < batch; ++k) x.col(k) = normalize(pairs[static_cast<std::size_t>(k)].observation);

  const Eigen::MatrixXd z1 = (w_[0] * x).colwise() + b_[0];
  const Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
  const Eigen::MatrixXd z2 = (w_[1] * a1).colwise() + b_[1];
  const Eigen::MatrixXd a2 = z2.cwiseMax(0.0);
  const Eigen::MatrixXd z3 = (w_[2] * a2).colwise() + b_[2];

  double loss = 0.0;
  Eigen::MatrixXd dz3(kActions, batch);
  for (int k = 0; k < batch; ++k) {
    const double top = z3.col(k).maxCoeff();
    const Eigen::VectorXd e = (z3.col(k).array() - top).exp();
    const double denom = e.sum();
    const int target = pairs[static_cast<std::size_t>(k)].action;
    loss += std::log(denom) + top - z3(target, k);
    dz3.col(k) = e / denom;
    dz3(target, k) -= 1.0;
  }
  loss /= batch;
  dz3 /= batch;

  const Eigen::MatrixXd dw3 = dz3 * a2.transpose();
  const Eigen::VectorXd db3 = dz3.rowwise().sum();
  const Eigen::MatrixXd dz2 =
      (w_[2].transpose() * dz3).cwiseProduct((z2.array() > 0.0).cast<double>().matrix());
  const Eigen::MatrixXd dw2 = dz2 * a1.transpose();
  const Eigen::VectorXd db2 = dz2.rowwise().sum();
  const Eigen::MatrixXd dz1 =
      (w_[1].transpose() * dz2).cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
  const Eigen::MatrixXd dw1 = dz1 * x.transpose();
  const Eigen::VectorXd db1 = dz1.rowwise().sum();

  const Eigen::MatrixXd* grads_w[3] = {&dw1, &dw2, &dw3};
  const Eigen::VectorXd* grads_b[3] = {&db1, &db2, &db3};
  for (int layer = 0; layer < 3; ++layer) {
    vel_w_[layer] = kMomentum * vel_w_[layer] + *grads_w[layer];
    vel_b_[layer] = kMomentum * vel_b_[layer] + *grads_b[layer];
    w_[layer] -= learning_rate * vel_w_[layer];
    b_[layer] -= learning_rate * vel_b_[layer];
  }
  return loss;
}

void PolicyNet::fit_normalization(const std::vector<TrainingPair>& pairs) {
  if (norm_frozen_) throw ContractViolation("normalization is already frozen");
  if (pairs.empty()) throw ContractViolation("normalization needs at least one pair");
  for (const TrainingPair& pair : pairs) check_observation(pair.observation);

  const double n = static_cast<double>(pairs.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kInputs);
  for (const TrainingPair& pair : pairs) mean += pair.observation;
  mean /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(kInputs);
  for (const TrainingPair& pair : pairs)
    var += (pair.observation - mean).cwiseAbs2();
  var /= n;

  norm_mean_ = mean;
  for (int f = 0; f < kInputs; ++f) {
    const double sd = std::sqrt(var[f]);
    norm_scale_[f] = sd > 1e-12 ? sd : 1.0;
  }
  norm_mean_.segment(kRawBegin, kRawEnd - kRawBegin).setZero();
  norm_scale_.segment(kRawBegin, kRawEnd - kRawBegin).setOnes();
  norm_frozen_ = true;
}

void PolicyNet::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) throw DomainError("cannot write checkpoint '" + path + "'");
  write_raw(out, kMagic, sizeof(kMagic));
  write_u32(out, kFormatVersion);
  const std::uint32_t dims[4] = {kInputs, kHidden, kHidden, kActions};
  write_u32(out, 4);
  for (std::uint32_t d : dims) write_u32(out, d);
  const std::uint8_t frozen = norm_frozen_ ? 1 : 0;
  write_raw(out, &frozen, 1);
  write_raw(out, norm_mean_.data(), sizeof(double) * kInputs);
  write_raw(out, norm_scale_.data(), sizeof(double) * kInputs);
  for (int layer = 0; layer < 3; ++layer) {
    write_matrix(out, w_[static_cast<std::size_t>(layer)]);
    write_raw(out, b_[static_cast<std::size_t>(layer)].data(),
              sizeof(double) * static_cast<std::size_t>(b_[static_cast<std::size_t>(layer)].size()));
  }
  if (!out.good()) throw DomainError("short write on checkpoint '" + path + "'");
}

PolicyNet PolicyNet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw DomainError("cannot read checkpoint '" + path + "'");

  char magic[sizeof(kMagic)] = {};
  read_raw(in, magic, sizeof(magic), path);
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError(path + ": not a policy checkpoint");
  const std::uint32_t version = read_u32(in, path);
  if (version != kFormatVersion)
    throw VersionError(path + ": checkpoint format version " + std::to_string(version) +
                       ", expected " + std::to_string(kFormatVersion));
  const std::uint32_t n_dims = read_u32(in, path);
  if (n_dims != 4) throw FormatError(path + ": expected 4 layer dimensions");
  const std::uint32_t expected[4] = {kInputs, kHidden, kHidden, kActions};
  for (std::uint32_t d : expected) {
    const std::uint32_t got = read_u32(in, path);
    if (got != d)
      throw FormatError(path + ": dimension mismatch, got " + std::to_string(got) +
                        " where " + std::to_string(d) + " was expected");
  }

  PolicyNet net;
  std::uint8_t frozen = 0;
  read_raw(in, &frozen, 1, path);
  net.norm_frozen_ = frozen != 0;
  net.norm_mean_ = read_vector(in, kInputs, path);
  net.norm_scale_ = read_vector(in, kInputs, path);

  const int dims[4] = {kInputs, kHidden, kHidden, kActions};
  for (int layer = 0; layer < 3; ++layer) {
    const int rows = dims[layer + 1];
    const int cols = dims[layer];
    net.w_.push_back(read_matrix(in, rows, cols, path));
    net.b_.push_back(read_vector(in, rows, path));
    net.vel_w_.emplace_back(Eigen::MatrixXd::Zero(rows, cols));
    net.vel_b_.emplace_back(Eigen::VectorXd::Zero(rows));
  }

  char extra = 0;
  in.read(&extra, 1);
  if (in.gcount() != 0) throw FormatError(path + ": trailing bytes after the checkpoint");

  if (!net.norm_mean_.allFinite() || !net.norm_scale_.allFinite() ||
      (net.norm_scale_.array() <= 0.0).any())
    throw FormatError(path + ": invalid normalization statistics");
  for (int layer = 0; layer < 3; ++layer)
    if (!net.w_[static_cast<std::size_t>(layer)].allFinite() ||
        !net.b_[static_cast<std::size_t>(layer)].allFinite())
      throw FormatError(path + ": non-finite weight");
  return net;
}

}  // namespace topogrid
