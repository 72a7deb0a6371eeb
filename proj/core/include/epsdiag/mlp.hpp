#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace epsdiag::mlp {

/// Three-layer perceptron: tanh hidden layer, linear output layer.
/// y = w2 * tanh(w1 * x + b1) + b2.
struct MlpNetwork {
  Eigen::MatrixXd w1;  // hidden x inputs
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // outputs x hidden
  Eigen::VectorXd b2;  // outputs

  int inputs() const { return static_cast<int>(w1.cols()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  int outputs() const { return static_cast<int>(w2.rows()); }

  /// Total trainable parameter count.
  int parameter_count() const {
    return static_cast<int>(w1.size() + b1.size() + w2.size() + b2.size());
  }
};

/// Seeded network with weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
/// Draw order: w1 row-major, b1, w2 row-major, b2.
MlpNetwork make_network(int n_in, int n_hidden, int n_out, std::uint64_t seed);

Eigen::VectorXd forward(const MlpNetwork& net, const Eigen::VectorXd& x);

/// Row-per-sample batch forward.
Eigen::MatrixXd forward_batch(const MlpNetwork& net, const Eigen::MatrixXd& x);

/// (1/n) * sum over samples of the squared error norm. Rows are samples.
double mse(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat);

/// Jacobian of the per-sample errors e = y - y_hat with respect to all
/// parameters (so every entry is -d y_hat/d theta; the result does not
/// depend on y). Rows are sample-major, output-minor: row = sample * n_out
/// + output. Columns follow the flattened parameter order
/// [w1 row-major, b1, w2 row-major, b2].
Eigen::MatrixXd jacobian(const MlpNetwork& net, const Eigen::MatrixXd& x);

struct TrainConfig {
  double mu_init = 1e-3;
  double mu_inc = 10.0;
  double mu_dec = 0.1;
  double max_mu = 1e10;
  int max_epochs = 1000;
  double goal_mse = 1e-10;
  std::uint64_t seed = 0;  // controls weight initialization

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct TrainReport {
  double final_mse = 0.0;
  int epochs = 0;
  std::vector<double> mse_history;  // initial MSE followed by accepted steps
  double error_mean = 0.0;
  double error_std = 0.0;
  std::optional<double> correlation_r;
  double rmse = 0.0;
};

/// Levenberg-Marquardt batch training. Per iteration solves
/// (J^T J + mu I) delta = J^T e and tries theta' = theta - delta; accepted
/// steps strictly reduce the MSE and scale mu by mu_dec, rejected trials
/// scale mu by mu_inc. Stops at goal_mse, max_epochs, or mu > max_mu.
/// A non-finite starting loss throws TrainingDiverged; non-finite trial
/// losses are rejected like any uphill step. Deterministic for a fixed
/// (net, x, y, cfg).
std::pair<MlpNetwork, TrainReport> lm_train(MlpNetwork net,
                                            const Eigen::MatrixXd& x,
                                            const Eigen::MatrixXd& y,
                                            const TrainConfig& cfg);

/// Per-feature affine map onto [-1, 1], fitted to the data range.
/// Constant features map to 0 with unit scale.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(Eigen::VectorXd scale, Eigen::VectorXd offset)
      : scale_(std::move(scale)), offset_(std::move(offset)) {}

  int features() const { return static_cast<int>(scale_.size()); }
  const Eigen::VectorXd& scale() const { return scale_; }
  const Eigen::VectorXd& offset() const { return offset_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;  // rows = samples
  Eigen::VectorXd invert(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& y) const;

 private:
  Eigen::VectorXd scale_;   // y = (x - offset) * scale
  Eigen::VectorXd offset_;
};

Normalizer fit_normalizer(const Eigen::MatrixXd& data);

struct ErrorStats {
  double mean = 0.0;
  double std = 0.0;
  std::optional<double> correlation_r;  // absent when y or y_hat is constant
  double rmse = 0.0;
};

/// Sample statistics of e = y - y_hat plus the Pearson correlation between
/// y and y_hat. Requires at least 2 samples.
ErrorStats error_stats(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat);

/// Versioned text serialization ("mlp-v1" header, layer sizes, then the
/// flattened parameters at 17 significant digits, one per line).
/// Re-serializing a loaded model reproduces the bytes exactly.
void save_mlp(const MlpNetwork& net, std::ostream& out);
void save_mlp(const MlpNetwork& net, const std::string& path);
MlpNetwork load_mlp(std::istream& in, const std::string& name);
MlpNetwork load_mlp(const std::string& path);

}  // namespace epsdiag::mlp
