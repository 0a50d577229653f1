#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topogrid/environment.hpp"

namespace topogrid {

// One supervised example: an observation and the action index an elite
// episode chose there.
struct TrainingPair {
  Eigen::VectorXd observation;
  int action = 0;
};

// Feed-forward softmax policy, 324 -> 300 -> 300 -> 112, rectifier hidden
// units. Training is stochastic gradient descent with momentum 0.9 over the
// cross-entropy loss; the momentum state is ephemeral and never serialized.
//
// Input normalization is a per-feature affine map fitted once on the first
// training batch and applied inside forward(); the busbar-assignment and
// line-status blocks of the observation pass through unscaled.
class PolicyNet {
 public:
  static constexpr int kInputs = ObservationLayout::size;
  static constexpr int kHidden = 300;
  static constexpr int kActions = 112;
  static constexpr double kMomentum = 0.9;

  // Fan-in scaled uniform weights, zero biases, identity normalization.
  explicit PolicyNet(std::uint64_t seed);

  // Action probabilities for one observation: non-negative, summing to one.
  Eigen::VectorXd forward(const Eigen::VectorXd& observation) const;

  // One momentum-SGD update over the whole batch. Returns the mean
  // cross-entropy loss measured before the update. A zero learning rate
  // leaves the weights untouched (the loss is still computed).
  double train_step(const std::vector<TrainingPair>& pairs, double learning_rate);

  // Freezes the input map on this batch: mean/standard-deviation per feature,
  // scale 1 where a feature never varies, identity on the pass-through
  // blocks. A net can be fitted only once; checkpoints carry the result.
  void fit_normalization(const std::vector<TrainingPair>& pairs);
  bool normalization_frozen() const { return norm_frozen_; }
  const Eigen::VectorXd& normalization_mean() const { return norm_mean_; }
  const Eigen::VectorXd& normalization_scale() const { return norm_scale_; }

  int n_layers() const { return 3; }
  const Eigen::MatrixXd& weight(int layer) const;
  const Eigen::VectorXd& bias(int layer) const;
  Eigen::MatrixXd& weight(int layer);
  Eigen::VectorXd& bias(int layer);

  // Binary checkpoint: magic, format version, layer dimensions, the
  // normalization vectors, then weights and biases row-major as
  // little-endian 64-bit floats.
  void save(const std::string& path) const;
  static PolicyNet load(const std::string& path);

 private:
  PolicyNet() = default;

  Eigen::VectorXd normalize(const Eigen::VectorXd& observation) const;
  void check_layer(int layer) const;

  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
  std::vector<Eigen::MatrixXd> vel_w_;
  std::vector<Eigen::VectorXd> vel_b_;
  Eigen::VectorXd norm_mean_;
  Eigen::VectorXd norm_scale_;
  bool norm_frozen_ = false;
};

}  // namespace topogrid
