#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace aloq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A single simulator input: a policy paired with an environment variable.
struct InputPoint {
  Vec policy;
  Vec env;

  Vec joint() const {
    Vec x(policy.size() + env.size());
    x << policy, env;
    return x;
  }
};

/// Growing set of evaluated inputs and their returns. All coordinates live in
/// the unit box; callers map task-native ranges before appending.
class Dataset {
 public:
  Dataset(int policy_dim, int env_dim) : d_pi_(policy_dim), d_env_(env_dim) {
    if (policy_dim < 0 || env_dim < 0 || policy_dim + env_dim == 0)
      throw std::invalid_argument("Dataset: dimensions must be non-negative and not both zero");
  }

  void append(const Vec& policy, const Vec& env, double f) {
    if (policy.size() != d_pi_ || env.size() != d_env_)
      throw std::invalid_argument("Dataset::append: dimension mismatch");
    check_unit_box(policy);
    check_unit_box(env);
    if (!std::isfinite(f)) throw std::invalid_argument("Dataset::append: non-finite return");
    policies_.push_back(policy);
    envs_.push_back(env);
    returns_.push_back(f);
  }

  int size() const { return static_cast<int>(returns_.size()); }
  int policy_dim() const { return d_pi_; }
  int env_dim() const { return d_env_; }
  int input_dim() const { return d_pi_ + d_env_; }

  const Vec& policy(int i) const { return policies_[i]; }
  const Vec& env(int i) const { return envs_[i]; }
  double value(int i) const { return returns_[i]; }

  /// l x (d_pi + d_env) matrix of all inputs, policies first.
  Mat inputs() const {
    Mat X(size(), input_dim());
    for (int i = 0; i < size(); ++i) {
      X.row(i).head(d_pi_) = policies_[i].transpose();
      X.row(i).tail(d_env_) = envs_[i].transpose();
    }
    return X;
  }

  Vec values() const {
    return Eigen::Map<const Vec>(returns_.data(), static_cast<long>(returns_.size()));
  }

 private:
  static void check_unit_box(const Vec& x) {
    for (int d = 0; d < x.size(); ++d)
      if (!(x[d] >= 0.0 && x[d] <= 1.0))
        throw std::domain_error("Dataset: coordinate outside [0,1]");
  }

  int d_pi_, d_env_;
  std::vector<Vec> policies_, envs_;
  std::vector<double> returns_;
};

}  // namespace aloq
