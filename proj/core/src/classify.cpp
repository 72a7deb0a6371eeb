#include "epsdiag/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "epsdiag/errors.hpp"
#include "epsdiag/rng.hpp"

namespace epsdiag::cls {

namespace {

std::vector<int> label_indices(const std::vector<FaultClass>& labels,
                               const std::vector<FaultClass>& order) {
  std::vector<int> idx(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::find(order.begin(), order.end(), labels[i]);
    if (it == order.end()) {
      throw std::domain_error("label outside the task class set: " +
                              std::string(faults::to_token(labels[i])));
    }
    idx[i] = static_cast<int>(it - order.begin());
  }
  return idx;
}

/// Stratified index split shared by every feature view of a sample set.
std::pair<std::vector<int>, std::vector<int>> split_indices(
    const std::vector<FaultClass>& labels,
    const std::vector<FaultClass>& order, double train_frac,
    std::uint64_t seed) {
  std::vector<std::vector<int>> per_class(order.size());
  const std::vector<int> lab = label_indices(labels, order);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    per_class[static_cast<std::size_t>(lab[i])].push_back(
        static_cast<int>(i));
  }
  std::vector<int> train, val;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    auto& members = per_class[c];
    if (members.size() < 2) {
      throw ConfigError("split: class '" +
                        std::string(faults::to_token(order[c])) +
                        "' has fewer than 2 samples");
    }
    rng::SplitMix64 stream(rng::derive(
        seed, "split." + std::string(faults::to_token(order[c]))));
    for (int i = static_cast<int>(members.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(stream.next() %
                                     static_cast<std::uint64_t>(i + 1));
      std::swap(members[static_cast<std::size_t>(i)],
                members[static_cast<std::size_t>(j)]);
    }
    const int n_train = std::max(
        1, static_cast<int>(static_cast<double>(members.size()) * train_frac));
    for (std::size_t i = 0; i < members.size(); ++i) {
      (static_cast<int>(i) < n_train ? train : val).push_back(members[i]);
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

LabeledDataset take_rows(const LabeledDataset& data,
                         const std::vector<int>& rows) {
  LabeledDataset out;
  out.class_order = data.class_order;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.dims());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(rows[i]);
    out.labels.push_back(data.labels[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

}  // namespace

int LabeledDataset::class_index(FaultClass f) const {
  const auto it = std::find(class_order.begin(), class_order.end(), f);
  if (it == class_order.end()) {
    throw std::domain_error("class not in dataset order: " +
                            std::string(faults::to_token(f)));
  }
  return static_cast<int>(it - class_order.begin());
}

void LabeledDataset::validate() const {
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ShapeError("LabeledDataset: feature/label count mismatch");
  }
  if (n() < 1) throw std::domain_error("LabeledDataset: empty");
  if (!features.allFinite()) {
    throw std::domain_error("LabeledDataset: non-finite feature values");
  }
  (void)label_indices(labels, class_order);
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                double train_frac,
                                                std::uint64_t seed) {
  data.validate();
  if (data.n() < 10) throw std::domain_error("split: need at least 10 samples");
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw ConfigError("split: train_frac must be in (0, 1)");
  }
  const auto [train_idx, val_idx] =
      split_indices(data.labels, data.class_order, train_frac, seed);
  return {take_rows(data, train_idx), take_rows(data, val_idx)};
}

// ---------------------------------------------------------------------------

double ConfusionMatrix::overall_accuracy() const {
  const std::int64_t t = total();
  if (t == 0) return 0.0;
  return static_cast<double>(counts.diagonal().sum()) /
         static_cast<double>(t);
}

std::vector<double> ConfusionMatrix::per_class_accuracy() const {
  std::vector<double> acc;
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    const std::int64_t row = counts.row(i).sum();
    acc.push_back(row == 0
                      ? std::numeric_limits<double>::quiet_NaN()
                      : static_cast<double>(counts(i, i)) /
                            static_cast<double>(row));
  }
  return acc;
}

ConfusionMatrix confusion(const std::vector<FaultClass>& class_order,
                          const std::vector<FaultClass>& true_labels,
                          const std::vector<FaultClass>& predicted) {
  if (true_labels.size() != predicted.size()) {
    throw ShapeError("confusion: label count mismatch");
  }
  ConfusionMatrix m;
  m.class_order = class_order;
  const int c = static_cast<int>(class_order.size());
  m.counts = Eigen::MatrixX<std::int64_t>::Zero(c, c);
  const std::vector<int> t = label_indices(true_labels, class_order);
  const std::vector<int> p = label_indices(predicted, class_order);
  for (std::size_t i = 0; i < t.size(); ++i) {
    ++m.counts(t[i], p[i]);
  }
  return m;
}

// ---------------------------------------------------------------------------
// MLP classifier

MlpClassifier MlpClassifier::fit(const LabeledDataset& train,
                                 const MlpClassifierConfig& cfg) {
  train.validate();
  MlpClassifier c;
  c.order_ = train.class_order;
  c.norm_ = mlp::fit_normalizer(train.features);

  const int n = train.n();
  const int n_classes = static_cast<int>(c.order_.size());
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, n_classes);
  const std::vector<int> lab = label_indices(train.labels, c.order_);
  for (int i = 0; i < n; ++i) targets(i, lab[static_cast<std::size_t>(i)]) = 1.0;

  mlp::MlpNetwork net = mlp::make_network(train.dims(), cfg.hidden, n_classes,
                                          cfg.train.seed);
  auto [trained, report] = mlp::lm_train(
      std::move(net), c.norm_.apply(train.features), targets, cfg.train);
  c.net_ = std::move(trained);
  c.train_mse_ = report.final_mse;
  c.trained_ = true;
  return c;
}

void MlpClassifier::require_trained() const {
  if (!trained_) throw std::logic_error("MlpClassifier: not trained");
}

FaultClass MlpClassifier::classify(const Eigen::VectorXd& x) const {
  require_trained();
  const Eigen::VectorXd out = mlp::forward(net_, norm_.apply(x));
  int best = 0;
  for (int i = 1; i < out.size(); ++i) {
    if (out(i) > out(best)) best = i;  // ties keep the lowest class index
  }
  return order_[static_cast<std::size_t>(best)];
}

std::vector<FaultClass> MlpClassifier::classify_batch(
    const Eigen::MatrixXd& x) const {
  require_trained();
  const Eigen::MatrixXd out = mlp::forward_batch(net_, norm_.apply(x));
  std::vector<FaultClass> labels;
  labels.reserve(static_cast<std::size_t>(out.rows()));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    int best = 0;
    for (int i = 1; i < out.cols(); ++i) {
      if (out(r, i) > out(r, best)) best = i;
    }
    labels.push_back(order_[static_cast<std::size_t>(best)]);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// KNN

Eigen::VectorXd KnnModel::transform(const Eigen::VectorXd& x) const {
  if (!standardized) return x;
  return (x - feature_mean).cwiseQuotient(feature_sigma);
}

namespace {

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd sigma;
};

Standardization fit_standardization(const Eigen::MatrixXd& x) {
  Standardization s;
  s.mean = x.colwise().mean();
  s.sigma.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().sum() /
                       std::max<double>(1.0, static_cast<double>(x.rows() - 1));
    s.sigma(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

struct Neighbor {
  double dist2;
  int idx;
  bool operator<(const Neighbor& o) const {
    return dist2 < o.dist2 || (dist2 == o.dist2 && idx < o.idx);
  }
};

/// k nearest reference rows by squared distance; ties by row index.
std::vector<Neighbor> nearest(const Eigen::MatrixXd& ref,
                              const Eigen::VectorXd& q, int k,
                              int exclude = -1) {
  std::vector<Neighbor> all;
  all.reserve(static_cast<std::size_t>(ref.rows()));
  for (Eigen::Index i = 0; i < ref.rows(); ++i) {
    if (static_cast<int>(i) == exclude) continue;
    all.push_back({(ref.row(i).transpose() - q).squaredNorm(),
                   static_cast<int>(i)});
  }
  const std::size_t kk = std::min<std::size_t>(all.size(),
                                               static_cast<std::size_t>(k));
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(kk),
                    all.end());
  all.resize(kk);
  return all;
}

int vote(const std::vector<Neighbor>& neighbors, int k,
         const std::vector<int>& ref_labels, int n_classes) {
  std::vector<int> count(static_cast<std::size_t>(n_classes), 0);
  std::vector<double> dist_sum(static_cast<std::size_t>(n_classes), 0.0);
  const int kk = std::min<int>(k, static_cast<int>(neighbors.size()));
  for (int i = 0; i < kk; ++i) {
    const int c = ref_labels[static_cast<std::size_t>(neighbors[i].idx)];
    ++count[static_cast<std::size_t>(c)];
    dist_sum[static_cast<std::size_t>(c)] += std::sqrt(neighbors[i].dist2);
  }
  int best = -1;
  for (int c = 0; c < n_classes; ++c) {
    if (count[c] == 0) continue;
    if (best < 0 || count[c] > count[best] ||
        (count[c] == count[best] && dist_sum[c] < dist_sum[best])) {
      best = c;  // equal count and sum keep the lower class index
    }
  }
  return best;
}

}  // namespace

KnnModel knn_fit(const LabeledDataset& train, int k, bool standardize) {
  train.validate();
  if (k < 1) throw std::domain_error("knn_fit: k must be >= 1");
  if (k > train.n()) {
    throw std::domain_error("knn_fit: k exceeds the stored point count");
  }
  KnnModel m;
  m.k = k;
  m.labels = train.labels;
  m.class_order = train.class_order;
  m.standardized = standardize;
  if (standardize) {
    const Standardization s = fit_standardization(train.features);
    m.feature_mean = s.mean;
    m.feature_sigma = s.sigma;
    m.points = train.features;
    m.points.rowwise() -= s.mean.transpose();
    m.points.array().rowwise() /= s.sigma.transpose().array();
  } else {
    m.points = train.features;
  }
  return m;
}

FaultClass knn_classify(const KnnModel& model, const Eigen::VectorXd& query) {
  if (model.points.rows() == 0) throw std::domain_error("knn: empty model");
  const std::vector<int> lab = label_indices(model.labels, model.class_order);
  const auto neighbors = nearest(model.points, model.transform(query), model.k);
  const int c = vote(neighbors, model.k, lab,
                     static_cast<int>(model.class_order.size()));
  return model.class_order[static_cast<std::size_t>(c)];
}

std::map<int, LossReport> knn_loss_curve(const LabeledDataset& data,
                                         const std::vector<int>& k_values,
                                         int folds, std::uint64_t seed,
                                         bool standardize) {
  data.validate();
  if (folds < 2) throw std::domain_error("knn_loss_curve: folds must be >= 2");
  const int n = data.n();
  const int n_classes = static_cast<int>(data.class_order.size());
  int k_max = 1;
  for (int k : k_values) {
    if (k < 1) throw std::domain_error("knn_loss_curve: k must be >= 1");
    k_max = std::max(k_max, k);
  }

  // Stratified fold assignment, deterministic per seed.
  std::vector<int> fold_of(static_cast<std::size_t>(n), 0);
  {
    const std::vector<int> lab = label_indices(data.labels, data.class_order);
    for (int c = 0; c < n_classes; ++c) {
      std::vector<int> members;
      for (int i = 0; i < n; ++i) {
        if (lab[static_cast<std::size_t>(i)] == c) members.push_back(i);
      }
      rng::SplitMix64 stream(rng::derive(
          seed, "knn.folds." +
                    std::string(faults::to_token(data.class_order[c]))));
      for (int i = static_cast<int>(members.size()) - 1; i > 0; --i) {
        const int j = static_cast<int>(stream.next() %
                                       static_cast<std::uint64_t>(i + 1));
        std::swap(members[static_cast<std::size_t>(i)],
                  members[static_cast<std::size_t>(j)]);
      }
      for (std::size_t i = 0; i < members.size(); ++i) {
        fold_of[static_cast<std::size_t>(members[i])] =
            static_cast<int>(i) % folds;
      }
    }
  }

  std::vector<int> fold_sizes(static_cast<std::size_t>(folds), 0);
  for (int f : fold_of) ++fold_sizes[static_cast<std::size_t>(f)];
  const int min_train =
      n - *std::max_element(fold_sizes.begin(), fold_sizes.end());
  if (k_max > min_train) {
    throw std::domain_error("knn_loss_curve: a fold leaves fewer training "
                            "points than the largest k");
  }

  Eigen::MatrixXd pts = data.features;
  if (standardize) {
    const Standardization s = fit_standardization(pts);
    pts.rowwise() -= s.mean.transpose();
    pts.array().rowwise() /= s.sigma.transpose().array();
  }
  const std::vector<int> lab = label_indices(data.labels, data.class_order);

  std::map<int, LossReport> reports;
  for (int k : k_values) reports[k] = LossReport{0.0, 0.0, folds};

  // Resubstitution: the query is a stored point, so it is its own nearest
  // neighbor at distance zero.
  std::map<int, std::int64_t> resub_errors;
  for (int i = 0; i < n; ++i) {
    const auto neighbors =
        nearest(pts, pts.row(i).transpose().eval(), k_max);
    for (int k : k_values) {
      const int c = vote(neighbors, k, lab, n_classes);
      if (c != lab[static_cast<std::size_t>(i)]) ++resub_errors[k];
    }
  }
  for (int k : k_values) {
    reports[k].resubstitution_loss =
        static_cast<double>(resub_errors[k]) / static_cast<double>(n);
  }

  // Stratified k-fold: score each held-out fold against the rest; the loss
  // is the mean of the per-fold error rates.
  std::map<int, std::vector<double>> fold_rates;
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train_rows, test_rows;
    for (int i = 0; i < n; ++i) {
      (fold_of[static_cast<std::size_t>(i)] == f ? test_rows : train_rows)
          .push_back(i);
    }
    Eigen::MatrixXd train_pts(static_cast<Eigen::Index>(train_rows.size()),
                              pts.cols());
    std::vector<int> train_lab(train_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      train_pts.row(static_cast<Eigen::Index>(i)) = pts.row(train_rows[i]);
      train_lab[i] = lab[static_cast<std::size_t>(train_rows[i])];
    }
    std::map<int, std::int64_t> errors;
    for (int row : test_rows) {
      const auto neighbors =
          nearest(train_pts, pts.row(row).transpose().eval(), k_max);
      for (int k : k_values) {
        const int c = vote(neighbors, k, train_lab, n_classes);
        if (c != lab[static_cast<std::size_t>(row)]) ++errors[k];
      }
    }
    for (int k : k_values) {
      fold_rates[k].push_back(static_cast<double>(errors[k]) /
                              static_cast<double>(test_rows.size()));
    }
  }
  for (int k : k_values) {
    const auto& rates = fold_rates[k];
    reports[k].kfold_loss =
        std::accumulate(rates.begin(), rates.end(), 0.0) /
        static_cast<double>(rates.size());
  }
  return reports;
}

// ---------------------------------------------------------------------------
// decision tree

namespace {

double entropy(const std::vector<std::int64_t>& counts, std::int64_t total) {
  if (total == 0) return 0.0;
  double h = 0.0;
  for (std::int64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  const std::vector<int>& labels;
  int n_classes;
  DtConfig cfg;
  DecisionTree tree;

  int majority(const std::vector<std::int64_t>& counts) const {
    int best = 0;
    for (int c = 1; c < n_classes; ++c) {
      if (counts[static_cast<std::size_t>(c)] >
          counts[static_cast<std::size_t>(best)]) {
        best = c;  // ties keep the lowest class index
      }
    }
    return best;
  }

  int build(std::vector<int>& rows, int depth) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (int r : rows) ++counts[static_cast<std::size_t>(labels[r])];
    const std::int64_t total = static_cast<std::int64_t>(rows.size());

    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[node_id].class_counts = counts;
    tree.nodes[node_id].label = tree.class_order[majority(counts)];
    tree.depth = std::max(tree.depth, depth);

    const double h_parent = entropy(counts, total);
    const bool pure = h_parent == 0.0;
    if (pure || depth >= cfg.max_depth ||
        total < 2 * static_cast<std::int64_t>(cfg.min_leaf)) {
      return node_id;
    }

    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    for (int f = 0; f < x.cols(); ++f) {
      std::sort(rows.begin(), rows.end(), [&](int a, int b) {
        const double va = x(a, f), vb = x(b, f);
        return va < vb || (va == vb && a < b);
      });
      std::vector<std::int64_t> left(static_cast<std::size_t>(n_classes), 0);
      for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        ++left[static_cast<std::size_t>(labels[rows[i]])];
        const double v = x(rows[i], f);
        const double v_next = x(rows[i + 1], f);
        if (v == v_next) continue;  // threshold only between distinct values
        const std::int64_t nl = static_cast<std::int64_t>(i + 1);
        const std::int64_t nr = total - nl;
        if (nl < cfg.min_leaf || nr < cfg.min_leaf) continue;
        std::vector<std::int64_t> right(counts);
        for (int c = 0; c < n_classes; ++c) {
          right[static_cast<std::size_t>(c)] -=
              left[static_cast<std::size_t>(c)];
        }
        const double gain =
            h_parent -
            (static_cast<double>(nl) / static_cast<double>(total)) *
                entropy(left, nl) -
            (static_cast<double>(nr) / static_cast<double>(total)) *
                entropy(right, nr);
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (v + v_next);
        }
      }
    }

    if (best_feature < 0 || best_gain <= 0.0) return node_id;

    std::vector<int> left_rows, right_rows;
    for (int r : rows) {
      (x(r, best_feature) <= best_threshold ? left_rows : right_rows)
          .push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    const int left_id = build(left_rows, depth + 1);
    const int right_id = build(right_rows, depth + 1);
    tree.nodes[node_id].leaf = false;
    tree.nodes[node_id].feature = best_feature;
    tree.nodes[node_id].threshold = best_threshold;
    tree.nodes[node_id].left = left_id;
    tree.nodes[node_id].right = right_id;
    return node_id;
  }
};

}  // namespace

DecisionTree id3_fit(const LabeledDataset& train, const DtConfig& cfg) {
  train.validate();
  if (cfg.max_depth < 0) throw ConfigError("dt: max_depth must be >= 0");
  if (cfg.min_leaf < 1) throw ConfigError("dt: min_leaf must be >= 1");
  const std::vector<int> lab = label_indices(train.labels, train.class_order);
  TreeBuilder builder{train.features, lab,
                      static_cast<int>(train.class_order.size()), cfg, {}};
  builder.tree.class_order = train.class_order;
  std::vector<int> rows(static_cast<std::size_t>(train.n()));
  std::iota(rows.begin(), rows.end(), 0);
  builder.build(rows, 0);
  return std::move(builder.tree);
}

FaultClass dt_classify(const DecisionTree& tree, const Eigen::VectorXd& x) {
  if (tree.nodes.empty()) throw std::logic_error("dt_classify: empty tree");
  int id = 0;
  while (!tree.nodes[static_cast<std::size_t>(id)].leaf) {
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    id = x(node.feature) <= node.threshold ? node.left : node.right;
  }
  return tree.nodes[static_cast<std::size_t>(id)].label;
}

LossReport dt_loss(const LabeledDataset& data, const DtConfig& cfg, int folds,
                   std::uint64_t seed) {
  data.validate();
  if (folds < 2) throw std::domain_error("dt_loss: folds must be >= 2");
  const int n = data.n();

  LossReport report;
  report.folds = folds;

  const DecisionTree full = id3_fit(data, cfg);
  std::int64_t errors = 0;
  for (int i = 0; i < n; ++i) {
    if (dt_classify(full, data.features.row(i).transpose().eval()) !=
        data.labels[static_cast<std::size_t>(i)]) {
      ++errors;
    }
  }
  report.resubstitution_loss =
      static_cast<double>(errors) / static_cast<double>(n);

  // Stratified folds, same dealing scheme as the KNN evaluator.
  std::vector<int> fold_of(static_cast<std::size_t>(n), 0);
  const std::vector<int> lab = label_indices(data.labels, data.class_order);
  for (std::size_t c = 0; c < data.class_order.size(); ++c) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      if (lab[static_cast<std::size_t>(i)] == static_cast<int>(c)) {
        members.push_back(i);
      }
    }
    rng::SplitMix64 stream(rng::derive(
        seed,
        "dt.folds." + std::string(faults::to_token(data.class_order[c]))));
    for (int i = static_cast<int>(members.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(stream.next() %
                                     static_cast<std::uint64_t>(i + 1));
      std::swap(members[static_cast<std::size_t>(i)],
                members[static_cast<std::size_t>(j)]);
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
      fold_of[static_cast<std::size_t>(members[i])] =
          static_cast<int>(i) % folds;
    }
  }

  std::vector<double> rates;
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train_rows, test_rows;
    for (int i = 0; i < n; ++i) {
      (fold_of[static_cast<std::size_t>(i)] == f ? test_rows : train_rows)
          .push_back(i);
    }
    const LabeledDataset train = take_rows(data, train_rows);
    const DecisionTree tree = id3_fit(train, cfg);
    std::int64_t fold_errors = 0;
    for (int row : test_rows) {
      if (dt_classify(tree, data.features.row(row).transpose().eval()) !=
          data.labels[static_cast<std::size_t>(row)]) {
        ++fold_errors;
      }
    }
    rates.push_back(static_cast<double>(fold_errors) /
                    static_cast<double>(test_rows.size()));
  }
  report.kfold_loss = std::accumulate(rates.begin(), rates.end(), 0.0) /
                      static_cast<double>(rates.size());
  return report;
}

// ---------------------------------------------------------------------------
// PCA

void jacobi_eigen(Eigen::MatrixXd a, Eigen::VectorXd& eigenvalues,
                  Eigen::MatrixXd& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw ShapeError("jacobi_eigen: matrix must be square");
  q = Eigen::MatrixXd::Identity(n, n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index r = p + 1; r < n; ++r) s += 2.0 * a(p, r) * a(p, r);
    return std::sqrt(s);
  };

  constexpr double kTol = 1e-12;
  for (int sweep = 0; sweep < 128 && off_norm() > kTol; ++sweep) {
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index r = p + 1; r < n; ++r) {
        if (a(p, r) == 0.0) continue;
        const double tau = (a(r, r) - a(p, p)) / (2.0 * a(p, r));
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // A <- G^T A G and Q <- Q G with the Givens rotation G(p, r).
        for (Eigen::Index i = 0; i < n; ++i) {
          const double aip = a(i, p), air = a(i, r);
          a(i, p) = c * aip - s * air;
          a(i, r) = s * aip + c * air;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double api = a(p, i), ari = a(r, i);
          a(p, i) = c * api - s * ari;
          a(r, i) = s * api + c * ari;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double qip = q(i, p), qir = q(i, r);
          q(i, p) = c * qip - s * qir;
          q(i, r) = s * qip + c * qir;
        }
      }
    }
  }

  eigenvalues = a.diagonal();

  // Descending eigenvalue order, stable under exact ties.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i,
                                                   Eigen::Index j) {
    return eigenvalues(i) > eigenvalues(j);
  });
  Eigen::VectorXd sorted_vals(n);
  Eigen::MatrixXd sorted_q(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sorted_vals(i) = eigenvalues(order[static_cast<std::size_t>(i)]);
    sorted_q.col(i) = q.col(order[static_cast<std::size_t>(i)]);
  }

  // Sign convention: the largest-magnitude entry of each column is positive.
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index arg_max = 0;
    sorted_q.col(j).cwiseAbs().maxCoeff(&arg_max);
    if (sorted_q(arg_max, j) < 0.0) sorted_q.col(j) *= -1.0;
  }

  eigenvalues = sorted_vals;
  q = sorted_q;
}

Eigen::VectorXd PcaModel::transform(const Eigen::VectorXd& x) const {
  if (!standardized) return x;
  return (x - feature_mean).cwiseQuotient(feature_sigma);
}

PcaModel pca_fit(const Eigen::MatrixXd& features, bool center) {
  const Eigen::Index n = features.rows();
  if (n < 2) throw std::domain_error("pca_fit: need at least 2 samples");
  PcaModel model;
  model.mean = center ? features.colwise().mean().transpose().eval()
                      : Eigen::VectorXd::Zero(features.cols()).eval();
  Eigen::MatrixXd centered = features;
  centered.rowwise() -= model.mean.transpose();
  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n - 1);
  jacobi_eigen(std::move(cov), model.eigenvalues, model.q);
  // Roundoff can leave tiny negative eigenvalues on a PSD matrix.
  for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i) {
    if (model.eigenvalues(i) < 0.0 && model.eigenvalues(i) > -1e-9) {
      model.eigenvalues(i) = 0.0;
    }
  }
  return model;
}

PcaModel pca_classifier_fit(const LabeledDataset& train, bool standardize,
                            bool center) {
  train.validate();
  Eigen::MatrixXd feats = train.features;
  Standardization std_params;
  if (standardize) {
    std_params = fit_standardization(feats);
    feats.rowwise() -= std_params.mean.transpose();
    feats.array().rowwise() /= std_params.sigma.transpose().array();
  }
  PcaModel model = pca_fit(feats, center);
  model.standardized = standardize;
  if (standardize) {
    model.feature_mean = std_params.mean;
    model.feature_sigma = std_params.sigma;
  }
  model.class_order = train.class_order;

  // Per-class first-component statistics -> [mean +- 3 sigma] intervals.
  const Eigen::VectorXd pc1 =
      (feats.rowwise() - model.mean.transpose()) * model.q.col(0);
  const std::vector<int> lab = label_indices(train.labels, train.class_order);
  for (std::size_t c = 0; c < train.class_order.size(); ++c) {
    double sum = 0.0;
    std::int64_t count = 0;
    for (Eigen::Index i = 0; i < pc1.size(); ++i) {
      if (lab[static_cast<std::size_t>(i)] == static_cast<int>(c)) {
        sum += pc1(i);
        ++count;
      }
    }
    PcaModel::ClassInterval interval;
    interval.label = train.class_order[c];
    interval.center = count > 0 ? sum / static_cast<double>(count) : 0.0;
    double var = 0.0;
    for (Eigen::Index i = 0; i < pc1.size(); ++i) {
      if (lab[static_cast<std::size_t>(i)] == static_cast<int>(c)) {
        const double d = pc1(i) - interval.center;
        var += d * d;
      }
    }
    interval.halfwidth =
        count > 1 ? 3.0 * std::sqrt(var / static_cast<double>(count - 1)) : 0.0;
    model.intervals.push_back(interval);
  }
  return model;
}

Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.q.rows()) {
    throw ShapeError("pca_project: dimension mismatch");
  }
  return model.q.transpose() * (model.transform(x) - model.mean);
}

FaultClass pca_classify(const PcaModel& model, const Eigen::VectorXd& x) {
  if (model.intervals.empty()) {
    throw std::logic_error("pca_classify: model has no class intervals");
  }
  const double y = pca_project(model, x)(0);
  int best = -1;
  double best_outside = 0.0, best_center = 0.0;
  for (std::size_t c = 0; c < model.intervals.size(); ++c) {
    const auto& iv = model.intervals[c];
    const double center_dist = std::abs(y - iv.center);
    const double outside = std::max(0.0, center_dist - iv.halfwidth);
    if (best < 0 || outside < best_outside ||
        (outside == best_outside && center_dist < best_center)) {
      best = static_cast<int>(c);
      best_outside = outside;
      best_center = center_dist;
    }
  }
  return model.intervals[static_cast<std::size_t>(best)].label;
}

// ---------------------------------------------------------------------------
// comparison

namespace {

MethodEval evaluate_predictions(const std::string& method,
                                const LabeledDataset& val,
                                const std::vector<FaultClass>& predicted) {
  MethodEval eval;
  eval.method = method;
  eval.matrix = confusion(val.class_order, val.labels, predicted);
  eval.overall_accuracy = eval.matrix.overall_accuracy();
  eval.per_class_accuracy = eval.matrix.per_class_accuracy();
  return eval;
}

}  // namespace

ComparisonReport compare_methods(const TaskDatasets& data,
                                 const CompareOptions& options) {
  data.i1.validate();
  data.i2.validate();
  data.raw.validate();
  if (data.i1.n() != data.raw.n() || data.i2.n() != data.raw.n() ||
      data.i1.labels != data.raw.labels || data.i2.labels != data.raw.labels) {
    throw ShapeError("compare_methods: feature views disagree on samples");
  }

  const auto [train_idx, val_idx] = split_indices(
      data.raw.labels, data.raw.class_order, options.train_frac, options.seed);

  const LabeledDataset i1_train = take_rows(data.i1, train_idx);
  const LabeledDataset i1_val = take_rows(data.i1, val_idx);
  const LabeledDataset i2_train = take_rows(data.i2, train_idx);
  const LabeledDataset i2_val = take_rows(data.i2, val_idx);
  const LabeledDataset raw_train = take_rows(data.raw, train_idx);
  const LabeledDataset raw_val = take_rows(data.raw, val_idx);

  ComparisonReport report;

  {
    MlpClassifierConfig cfg = options.mlp;
    cfg.train.seed = rng::derive(options.seed, "compare.mlp_i1");
    const MlpClassifier c = MlpClassifier::fit(i1_train, cfg);
    report.mlp_i1 = evaluate_predictions("mlp_i1", i1_val,
                                         c.classify_batch(i1_val.features));
  }
  {
    MlpClassifierConfig cfg = options.mlp;
    cfg.train.seed = rng::derive(options.seed, "compare.mlp_i2");
    const MlpClassifier c = MlpClassifier::fit(i2_train, cfg);
    report.mlp_i2 = evaluate_predictions("mlp_i2", i2_val,
                                         c.classify_batch(i2_val.features));
  }

  MethodEval knn_eval;
  {
    const KnnModel model =
        knn_fit(raw_train, options.knn_k, options.knn_standardize);
    std::vector<FaultClass> predicted;
    predicted.reserve(static_cast<std::size_t>(raw_val.n()));
    for (int i = 0; i < raw_val.n(); ++i) {
      predicted.push_back(
          knn_classify(model, raw_val.features.row(i).transpose().eval()));
    }
    knn_eval = evaluate_predictions("knn", raw_val, predicted);
    std::vector<int> ks;
    for (int k = 1; k <= options.knn_curve_k_max; ++k) ks.push_back(k);
    knn_eval.loss_curve =
        knn_loss_curve(data.raw, ks, options.folds,
                       rng::derive(options.seed, "compare.knn"),
                       options.knn_standardize);
    knn_eval.loss = knn_eval.loss_curve.at(options.knn_k);
  }

  MethodEval dt_eval;
  {
    const DecisionTree tree = id3_fit(raw_train, options.dt);
    std::vector<FaultClass> predicted;
    predicted.reserve(static_cast<std::size_t>(raw_val.n()));
    for (int i = 0; i < raw_val.n(); ++i) {
      predicted.push_back(
          dt_classify(tree, raw_val.features.row(i).transpose().eval()));
    }
    dt_eval = evaluate_predictions("dt", raw_val, predicted);
    dt_eval.loss = dt_loss(data.raw, options.dt, options.folds,
                           rng::derive(options.seed, "compare.dt"));
  }

  MethodEval pca_eval;
  {
    const PcaModel model = pca_classifier_fit(raw_train,
                                              options.pca_standardize,
                                              options.pca_center);
    std::vector<FaultClass> predicted;
    predicted.reserve(static_cast<std::size_t>(raw_val.n()));
    for (int i = 0; i < raw_val.n(); ++i) {
      predicted.push_back(
          pca_classify(model, raw_val.features.row(i).transpose().eval()));
    }
    pca_eval = evaluate_predictions("pca", raw_val, predicted);
    pca_eval.eigenvalues.assign(model.eigenvalues.data(),
                                model.eigenvalues.data() +
                                    model.eigenvalues.size());
    pca_eval.intervals = model.intervals;
  }

  MethodEval mlp_eval = report.mlp_i2;
  mlp_eval.method = "mlp";

  report.ordering_ok = report.mlp_i2.overall_accuracy >=
                           dt_eval.overall_accuracy &&
                       pca_eval.overall_accuracy >= dt_eval.overall_accuracy &&
                       dt_eval.overall_accuracy > knn_eval.overall_accuracy;

  report.methods.push_back(std::move(mlp_eval));
  report.methods.push_back(std::move(knn_eval));
  report.methods.push_back(std::move(dt_eval));
  report.methods.push_back(std::move(pca_eval));
  return report;
}

}  // namespace epsdiag::cls
