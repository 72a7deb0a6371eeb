#include "epsdiag/mlp.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "epsdiag/errors.hpp"
#include "epsdiag/rng.hpp"

namespace epsdiag::mlp {

namespace {

void check_input_width(const MlpNetwork& net, Eigen::Index cols) {
  if (cols != net.inputs()) {
    throw ShapeError("mlp: expected " + std::to_string(net.inputs()) +
                     " input features, got " + std::to_string(cols));
  }
}

}  // namespace

MlpNetwork make_network(int n_in, int n_hidden, int n_out,
                        std::uint64_t seed) {
  if (n_in < 1 || n_hidden < 1 || n_out < 1) {
    throw ShapeError("mlp: layer sizes must be >= 1");
  }
  rng::SplitMix64 stream(rng::derive(seed, "mlp.init"));
  MlpNetwork net;
  net.w1.resize(n_hidden, n_in);
  net.b1.resize(n_hidden);
  net.w2.resize(n_out, n_hidden);
  net.b2.resize(n_out);

  const double r1 = 1.0 / std::sqrt(static_cast<double>(n_in));
  for (int i = 0; i < n_hidden; ++i)
    for (int j = 0; j < n_in; ++j) net.w1(i, j) = stream.uniform(-r1, r1);
  for (int i = 0; i < n_hidden; ++i) net.b1(i) = stream.uniform(-r1, r1);

  const double r2 = 1.0 / std::sqrt(static_cast<double>(n_hidden));
  for (int i = 0; i < n_out; ++i)
    for (int j = 0; j < n_hidden; ++j) net.w2(i, j) = stream.uniform(-r2, r2);
  for (int i = 0; i < n_out; ++i) net.b2(i) = stream.uniform(-r2, r2);
  return net;
}

Eigen::VectorXd forward(const MlpNetwork& net, const Eigen::VectorXd& x) {
  check_input_width(net, x.size());
  Eigen::VectorXd t = (net.w1 * x + net.b1).array().tanh();
  return net.w2 * t + net.b2;
}

Eigen::MatrixXd forward_batch(const MlpNetwork& net, const Eigen::MatrixXd& x) {
  check_input_width(net, x.cols());
  Eigen::MatrixXd a = x * net.w1.transpose();
  a.rowwise() += net.b1.transpose();
  Eigen::MatrixXd t = a.array().tanh();
  Eigen::MatrixXd y = t * net.w2.transpose();
  y.rowwise() += net.b2.transpose();
  return y;
}

double mse(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat) {
  if (y.rows() == 0) {
    throw std::domain_error("mse: empty input");
  }
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols()) {
    throw ShapeError("mse: shape mismatch");
  }
  return (y - y_hat).squaredNorm() / static_cast<double>(y.rows());
}

namespace {

/// Fills `block` (n_out x P) with the Jacobian of sample errors w.r.t. the
/// flattened parameters, given the sample input and its tanh activations.
void sample_jacobian_block(const MlpNetwork& net, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& t, Eigen::MatrixXd& block) {
  const int n_in = net.inputs();
  const int n_hid = net.hidden();
  const int n_out = net.outputs();
  const int off_b1 = n_hid * n_in;
  const int off_w2 = off_b1 + n_hid;
  const int off_b2 = off_w2 + n_out * n_hid;

  // e = y - y_hat; d e / d theta = - d y_hat / d theta.
  for (int k = 0; k < n_out; ++k) {
    for (int j = 0; j < n_hid; ++j) {
      const double sech2 = 1.0 - t(j) * t(j);
      const double gate = net.w2(k, j) * sech2;
      for (int i = 0; i < n_in; ++i) {
        block(k, j * n_in + i) = -gate * x(i);
      }
      block(k, off_b1 + j) = -gate;
      block(k, off_w2 + k * n_hid + j) = -t(j);
    }
    block(k, off_b2 + k) = -1.0;
  }
}

}  // namespace

Eigen::MatrixXd jacobian(const MlpNetwork& net, const Eigen::MatrixXd& x) {
  if (x.rows() == 0) {
    throw std::domain_error("jacobian: empty batch");
  }
  check_input_width(net, x.cols());
  const int n = static_cast<int>(x.rows());
  const int n_out = net.outputs();
  const int p = net.parameter_count();

  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(n) * n_out, p);
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n_out, p);
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd xs = x.row(s).transpose();
    const Eigen::VectorXd t = (net.w1 * xs + net.b1).array().tanh();
    block.setZero();
    sample_jacobian_block(net, xs, t, block);
    j.middleRows(static_cast<Eigen::Index>(s) * n_out, n_out) = block;
  }
  return j;
}

void TrainConfig::validate() const {
  if (!(mu_init > 0.0)) throw ConfigError("TrainConfig: mu_init must be > 0");
  if (!(mu_inc > 1.0)) throw ConfigError("TrainConfig: mu_inc must be > 1");
  if (!(mu_dec > 0.0 && mu_dec < 1.0)) {
    throw ConfigError("TrainConfig: mu_dec must be in (0, 1)");
  }
  if (!(goal_mse >= 0.0)) throw ConfigError("TrainConfig: goal_mse must be >= 0");
  if (max_epochs < 0) throw ConfigError("TrainConfig: max_epochs must be >= 0");
  if (!(max_mu > 0.0)) throw ConfigError("TrainConfig: max_mu must be > 0");
}

namespace {

struct NormalEquations {
  Eigen::MatrixXd jtj;  // P x P
  Eigen::VectorXd jte;  // P
};

/// Accumulates J^T J and J^T e sample by sample without materializing J.
/// Summation order is fixed (sample-major), so results are reproducible.
NormalEquations accumulate_normal_equations(const MlpNetwork& net,
                                            const Eigen::MatrixXd& x,
                                            const Eigen::MatrixXd& err) {
  const int n = static_cast<int>(x.rows());
  const int n_out = net.outputs();
  const int p = net.parameter_count();

  NormalEquations eq;
  eq.jtj = Eigen::MatrixXd::Zero(p, p);
  eq.jte = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n_out, p);
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd xs = x.row(s).transpose();
    const Eigen::VectorXd t = (net.w1 * xs + net.b1).array().tanh();
    block.setZero();
    sample_jacobian_block(net, xs, t, block);
    eq.jtj.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose(), 1.0);
    eq.jte.noalias() += block.transpose() * err.row(s).transpose();
  }
  eq.jtj = eq.jtj.selfadjointView<Eigen::Lower>();
  return eq;
}

Eigen::VectorXd flatten_parameters(const MlpNetwork& net) {
  Eigen::VectorXd theta(net.parameter_count());
  int pos = 0;
  for (int i = 0; i < net.w1.rows(); ++i)
    for (int j = 0; j < net.w1.cols(); ++j) theta(pos++) = net.w1(i, j);
  for (int i = 0; i < net.b1.size(); ++i) theta(pos++) = net.b1(i);
  for (int i = 0; i < net.w2.rows(); ++i)
    for (int j = 0; j < net.w2.cols(); ++j) theta(pos++) = net.w2(i, j);
  for (int i = 0; i < net.b2.size(); ++i) theta(pos++) = net.b2(i);
  return theta;
}

void unflatten_parameters(const Eigen::VectorXd& theta, MlpNetwork& net) {
  int pos = 0;
  for (int i = 0; i < net.w1.rows(); ++i)
    for (int j = 0; j < net.w1.cols(); ++j) net.w1(i, j) = theta(pos++);
  for (int i = 0; i < net.b1.size(); ++i) net.b1(i) = theta(pos++);
  for (int i = 0; i < net.w2.rows(); ++i)
    for (int j = 0; j < net.w2.cols(); ++j) net.w2(i, j) = theta(pos++);
  for (int i = 0; i < net.b2.size(); ++i) net.b2(i) = theta(pos++);
}

void fill_training_stats(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat,
                         TrainReport& report) {
  Eigen::Map<const Eigen::VectorXd> yf(y.data(), y.size());
  Eigen::Map<const Eigen::VectorXd> pf(y_hat.data(), y_hat.size());
  if (y.size() >= 2) {
    const ErrorStats stats = error_stats(yf, pf);
    report.error_mean = stats.mean;
    report.error_std = stats.std;
    report.correlation_r = stats.correlation_r;
  }
  report.rmse = std::sqrt(report.final_mse);
}

}  // namespace

std::pair<MlpNetwork, TrainReport> lm_train(MlpNetwork net,
                                            const Eigen::MatrixXd& x,
                                            const Eigen::MatrixXd& y,
                                            const TrainConfig& cfg) {
  cfg.validate();
  if (x.rows() == 0) {
    throw std::domain_error("lm_train: empty dataset");
  }
  if (x.rows() != y.rows()) {
    throw ShapeError("lm_train: input/target row mismatch");
  }
  check_input_width(net, x.cols());
  if (y.cols() != net.outputs()) {
    throw ShapeError("lm_train: target width does not match network outputs");
  }

  TrainReport report;

  Eigen::MatrixXd y_hat = forward_batch(net, x);
  double current_mse = mse(y, y_hat);
  if (!std::isfinite(current_mse)) {
    throw TrainingDiverged("lm_train: non-finite loss at start");
  }
  report.mse_history.push_back(current_mse);

  double mu = cfg.mu_init;
  Eigen::VectorXd theta = flatten_parameters(net);
  MlpNetwork trial = net;

  while (current_mse > cfg.goal_mse && report.epochs < cfg.max_epochs &&
         mu <= cfg.max_mu) {
    const Eigen::MatrixXd err = y - y_hat;
    const NormalEquations eq = accumulate_normal_equations(net, x, err);

    while (mu <= cfg.max_mu) {
      Eigen::MatrixXd damped = eq.jtj;
      damped.diagonal().array() += mu;
      const Eigen::LLT<Eigen::MatrixXd> llt(damped);
      if (llt.info() != Eigen::Success) {
        mu *= cfg.mu_inc;  // singular normal equations: raise mu, retry
        continue;
      }
      const Eigen::VectorXd delta = llt.solve(eq.jte);
      const Eigen::VectorXd theta_trial = theta - delta;
      unflatten_parameters(theta_trial, trial);
      const Eigen::MatrixXd y_trial = forward_batch(trial, x);
      const double trial_mse = mse(y, y_trial);
      ++report.epochs;
      if (std::isfinite(trial_mse) && trial_mse < current_mse) {
        theta = theta_trial;
        net = trial;
        y_hat = y_trial;
        current_mse = trial_mse;
        mu *= cfg.mu_dec;
        report.mse_history.push_back(current_mse);
      } else {
        mu *= cfg.mu_inc;
      }
      break;
    }
  }

  report.final_mse = current_mse;
  fill_training_stats(y, y_hat, report);
  return {std::move(net), std::move(report)};
}

Eigen::VectorXd Normalizer::apply(const Eigen::VectorXd& x) const {
  if (x.size() != scale_.size()) throw ShapeError("Normalizer: width mismatch");
  return (x - offset_).cwiseProduct(scale_);
}

Eigen::MatrixXd Normalizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != scale_.size()) throw ShapeError("Normalizer: width mismatch");
  Eigen::MatrixXd y = x;
  y.rowwise() -= offset_.transpose();
  y.array().rowwise() *= scale_.transpose().array();
  return y;
}

Eigen::VectorXd Normalizer::invert(const Eigen::VectorXd& y) const {
  if (y.size() != scale_.size()) throw ShapeError("Normalizer: width mismatch");
  return y.cwiseQuotient(scale_) + offset_;
}

Eigen::MatrixXd Normalizer::invert(const Eigen::MatrixXd& y) const {
  if (y.cols() != scale_.size()) throw ShapeError("Normalizer: width mismatch");
  Eigen::MatrixXd x = y;
  x.array().rowwise() /= scale_.transpose().array();
  x.rowwise() += offset_.transpose();
  return x;
}

Normalizer fit_normalizer(const Eigen::MatrixXd& data) {
  if (data.rows() == 0) {
    throw std::domain_error("fit_normalizer: empty data");
  }
  const Eigen::VectorXd lo = data.colwise().minCoeff();
  const Eigen::VectorXd hi = data.colwise().maxCoeff();
  Eigen::VectorXd scale(data.cols());
  Eigen::VectorXd offset(data.cols());
  for (int j = 0; j < data.cols(); ++j) {
    const double range = hi(j) - lo(j);
    if (range > 0.0) {
      scale(j) = 2.0 / range;
      offset(j) = 0.5 * (hi(j) + lo(j));
    } else {
      scale(j) = 1.0;
      offset(j) = lo(j);
    }
  }
  return Normalizer(std::move(scale), std::move(offset));
}

ErrorStats error_stats(const Eigen::VectorXd& y,
                       const Eigen::VectorXd& y_hat) {
  if (y.size() != y_hat.size()) throw ShapeError("error_stats: length mismatch");
  const Eigen::Index n = y.size();
  if (n < 2) throw std::domain_error("error_stats: need at least 2 samples");

  const Eigen::VectorXd e = y - y_hat;
  ErrorStats s;
  s.mean = e.mean();
  s.std = std::sqrt((e.array() - s.mean).square().sum() /
                    static_cast<double>(n - 1));
  s.rmse = std::sqrt(e.squaredNorm() / static_cast<double>(n));

  const double my = y.mean();
  const double mp = y_hat.mean();
  const double vy = (y.array() - my).square().sum();
  const double vp = (y_hat.array() - mp).square().sum();
  if (vy > 0.0 && vp > 0.0) {
    const double cov = ((y.array() - my) * (y_hat.array() - mp)).sum();
    double r = cov / std::sqrt(vy * vp);
    r = std::clamp(r, -1.0, 1.0);
    s.correlation_r = r;
  }
  return s;
}

namespace {

void write_value(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf << '\n';
}

}  // namespace

void save_mlp(const MlpNetwork& net, std::ostream& out) {
  out << "mlp-v1\n";
  out << net.inputs() << ' ' << net.hidden() << ' ' << net.outputs() << '\n';
  for (int i = 0; i < net.w1.rows(); ++i)
    for (int j = 0; j < net.w1.cols(); ++j) write_value(out, net.w1(i, j));
  for (int i = 0; i < net.b1.size(); ++i) write_value(out, net.b1(i));
  for (int i = 0; i < net.w2.rows(); ++i)
    for (int j = 0; j < net.w2.cols(); ++j) write_value(out, net.w2(i, j));
  for (int i = 0; i < net.b2.size(); ++i) write_value(out, net.b2(i));
}

void save_mlp(const MlpNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  save_mlp(net, out);
}

MlpNetwork load_mlp(std::istream& in, const std::string& name) {
  std::string line;
  int line_no = 0;

  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line)) {
      throw FormatError(name, line_no + 1, "unexpected end of file");
    }
    ++line_no;
    return line;
  };

  if (next_line() != "mlp-v1") {
    throw FormatError(name, line_no, "expected header 'mlp-v1'");
  }
  int n_in = 0, n_hid = 0, n_out = 0;
  {
    std::istringstream sizes(next_line());
    if (!(sizes >> n_in >> n_hid >> n_out) || n_in < 1 || n_hid < 1 ||
        n_out < 1) {
      throw FormatError(name, line_no, "bad layer sizes");
    }
  }
  MlpNetwork net;
  net.w1.resize(n_hid, n_in);
  net.b1.resize(n_hid);
  net.w2.resize(n_out, n_hid);
  net.b2.resize(n_out);

  auto read_value = [&]() -> double {
    std::istringstream ss(next_line());
    double v = 0.0;
    if (!(ss >> v)) {
      throw FormatError(name, line_no, "expected a numeric parameter");
    }
    return v;
  };

  for (int i = 0; i < n_hid; ++i)
    for (int j = 0; j < n_in; ++j) net.w1(i, j) = read_value();
  for (int i = 0; i < n_hid; ++i) net.b1(i) = read_value();
  for (int i = 0; i < n_out; ++i)
    for (int j = 0; j < n_hid; ++j) net.w2(i, j) = read_value();
  for (int i = 0; i < n_out; ++i) net.b2(i) = read_value();
  return net;
}

MlpNetwork load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  return load_mlp(in, path);
}

}  // namespace epsdiag::mlp
