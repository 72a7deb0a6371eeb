#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "epsdiag/faults.hpp"
#include "epsdiag/mlp.hpp"

namespace epsdiag::cls {

using faults::FaultClass;

struct LabeledDataset {
  Eigen::MatrixXd features;            // n x d
  std::vector<FaultClass> labels;      // n
  std::vector<FaultClass> class_order; // fixed canonical order

  int n() const { return static_cast<int>(features.rows()); }
  int dims() const { return static_cast<int>(features.cols()); }
  int class_index(FaultClass f) const;  // throws std::domain_error if absent
  void validate() const;
};

/// Stratified deterministic 70/30-style split; train and validation
/// partition the input. Classes with < 2 samples raise ConfigError.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                double train_frac,
                                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// confusion accounting

struct ConfusionMatrix {
  std::vector<FaultClass> class_order;
  Eigen::MatrixX<std::int64_t> counts;  // rows = true, cols = predicted

  std::int64_t total() const { return counts.sum(); }
  double overall_accuracy() const;
  std::vector<double> per_class_accuracy() const;  // NaN for empty rows
};

ConfusionMatrix confusion(const std::vector<FaultClass>& class_order,
                          const std::vector<FaultClass>& true_labels,
                          const std::vector<FaultClass>& predicted);

struct LossReport {
  double resubstitution_loss = 0.0;
  double kfold_loss = 0.0;
  int folds = 0;
};

// ---------------------------------------------------------------------------
// MLP one-hot classifier

struct MlpClassifierConfig {
  int hidden = 14;
  mlp::TrainConfig train;
  MlpClassifierConfig() {
    train.max_epochs = 120;
    train.goal_mse = 5e-4;
  }
};

/// One-hot targets, argmax prediction, ties resolved to the lowest class
/// index. Inputs are range-normalized with training statistics.
class MlpClassifier {
 public:
  static MlpClassifier fit(const LabeledDataset& train,
                           const MlpClassifierConfig& cfg);

  FaultClass classify(const Eigen::VectorXd& x) const;
  std::vector<FaultClass> classify_batch(const Eigen::MatrixXd& x) const;
  double train_mse() const { return train_mse_; }
  const std::vector<FaultClass>& class_order() const { return order_; }

 private:
  void require_trained() const;

  bool trained_ = false;
  mlp::MlpNetwork net_;
  mlp::Normalizer norm_;
  std::vector<FaultClass> order_;
  double train_mse_ = 0.0;
};

// ---------------------------------------------------------------------------
// KNN (lazy classifier over stored points)

struct KnnModel {
  int k = 3;
  Eigen::MatrixXd points;  // stored (I_L, SOC) pairs, optionally standardized
  std::vector<FaultClass> labels;
  std::vector<FaultClass> class_order;
  bool standardized = false;
  Eigen::VectorXd feature_mean;   // train statistics when standardized
  Eigen::VectorXd feature_sigma;

  Eigen::VectorXd transform(const Eigen::VectorXd& x) const;
};

/// k > n or empty data raise std::domain_error.
KnnModel knn_fit(const LabeledDataset& train, int k, bool standardize);

/// Majority label among the k nearest by Euclidean distance. Distance ties
/// break by stored-point index, vote ties by smallest summed distance, then
/// lowest class index.
FaultClass knn_classify(const KnnModel& model, const Eigen::VectorXd& query);

/// Resubstitution loss (training set classified against itself, each point
/// its own nearest neighbor) and stratified k-fold cross-validation loss,
/// per requested neighbor count. Neighbor lists are shared across the k
/// values, so the curve costs one distance pass.
std::map<int, LossReport> knn_loss_curve(const LabeledDataset& data,
                                         const std::vector<int>& k_values,
                                         int folds, std::uint64_t seed,
                                         bool standardize);

// ---------------------------------------------------------------------------
// decision tree (ID3-style entropy gain with continuous thresholds)

struct DecisionTree {
  struct Node {
    bool leaf = true;
    FaultClass label = FaultClass::NoFault;
    std::vector<std::int64_t> class_counts;
    int feature = -1;
    double threshold = 0.0;
    int left = -1;   // x[feature] <= threshold
    int right = -1;  // x[feature] >  threshold
  };
  std::vector<Node> nodes;  // nodes[0] is the root
  std::vector<FaultClass> class_order;
  int depth = 0;
};

struct DtConfig {
  int max_depth = 16;
  int min_leaf = 1;
};

/// Greedy binary splits on continuous features maximizing information gain
/// (entropy, log base 2); candidate thresholds are midpoints between
/// consecutive sorted distinct values. Splits with zero gain or undersized
/// children become leaves; leaf label = majority class, ties to the lowest
/// class index.
DecisionTree id3_fit(const LabeledDataset& train, const DtConfig& cfg);

FaultClass dt_classify(const DecisionTree& tree, const Eigen::VectorXd& x);

LossReport dt_loss(const LabeledDataset& data, const DtConfig& cfg, int folds,
                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// PCA projection classifier

struct PcaModel {
  Eigen::VectorXd mean;         // zero when fitted with center=false
  Eigen::MatrixXd q;            // orthonormal eigenvectors, descending order
  Eigen::VectorXd eigenvalues;  // descending, nonnegative
  bool standardized = false;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_sigma;

  struct ClassInterval {
    FaultClass label = FaultClass::NoFault;
    double center = 0.0;
    double halfwidth = 0.0;  // 3 sigma of training projections
  };
  std::vector<ClassInterval> intervals;  // present on classifier fits
  std::vector<FaultClass> class_order;

  Eigen::VectorXd transform(const Eigen::VectorXd& x) const;
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations (off-diagonal
/// Frobenius norm driven to <= 1e-12), eigenvalues sorted descending, each
/// column's largest-magnitude entry made positive. a must be square
/// symmetric.
void jacobi_eigen(Eigen::MatrixXd a, Eigen::VectorXd& eigenvalues,
                  Eigen::MatrixXd& q);

/// PCA of raw features (n >= 2). center=false reproduces the uncentered
/// covariance reading of the source method.
PcaModel pca_fit(const Eigen::MatrixXd& features, bool center = true);

/// Classifier fit: PCA plus per-class [mean +- 3 sigma] intervals of the
/// training projections on the first component.
PcaModel pca_classifier_fit(const LabeledDataset& train, bool standardize,
                            bool center = true);

Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& x);

/// Nearest interval on the first component (distance 0 inside), ties by
/// nearest center then lowest class index.
FaultClass pca_classify(const PcaModel& model, const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// four-method comparison

struct CompareOptions {
  double train_frac = 0.7;
  std::uint64_t seed = 1;
  int knn_k = 3;
  int folds = 10;
  int knn_curve_k_max = 15;
  bool knn_standardize = false;  // distance on raw (I_L, SOC), per Eq 9
  bool pca_standardize = true;
  bool pca_center = true;
  DtConfig dt;
  MlpClassifierConfig mlp;
};

struct MethodEval {
  std::string method;
  ConfusionMatrix matrix;
  double overall_accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::optional<LossReport> loss;                    // knn / dt
  std::map<int, LossReport> loss_curve;              // knn only
  std::vector<double> eigenvalues;                   // pca only
  std::vector<PcaModel::ClassInterval> intervals;    // pca only
};

/// Feature views of one labeled sample set: classifier inputs i1/i2 and the
/// raw (I_L, SOC) channels, in identical sample order.
struct TaskDatasets {
  LabeledDataset i1;
  LabeledDataset i2;
  LabeledDataset raw;
};

struct ComparisonReport {
  std::vector<MethodEval> methods;  // mlp, knn, dt, pca (Table 5 analogue)
  MethodEval mlp_i1;                // feature-augmentation reference row
  MethodEval mlp_i2;
  bool ordering_ok = false;  // mlp_i2 >= dt, pca >= dt, dt > knn
};

/// Runs all four classifiers under one split/seed.
ComparisonReport compare_methods(const TaskDatasets& data,
                                 const CompareOptions& options);

}  // namespace epsdiag::cls
