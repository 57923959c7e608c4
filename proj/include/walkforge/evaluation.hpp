#pragma once

// Measurement protocols:
//  * transition-probability MAE between a uniform-walk corpus and the 1/out-degree
//    transition matrix of the graph it was sampled on;
//  * balanced node classification with L2-regularised logistic regression on
//    the learned embeddings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "walkforge/common.hpp"
#include "walkforge/embedding.hpp"
#include "walkforge/graph.hpp"
#include "walkforge/incremental.hpp"
#include "walkforge/walk.hpp"

namespace walkforge {

// ---------------------------------------------------------------------------
// Transition MAE.

struct TransitionTable {
  std::unordered_map<std::uint64_t, std::uint64_t> counts;  // key: src << 32 | dst
  std::unordered_map<NodeId, std::uint64_t> row_totals;
  WalkMode mode = WalkMode::Uniform;
  std::uint64_t graph_version = 0;

  static std::uint64_t key(NodeId u, NodeId v) { return (static_cast<std::uint64_t>(u) << 32) | v; }

  std::uint64_t count(NodeId u, NodeId v) const {
    auto it = counts.find(key(u, v));
    return it == counts.end() ? 0 : it->second;
  }

  double probability(NodeId u, NodeId v) const {
    auto it = row_totals.find(u);
    if (it == row_totals.end() || it->second == 0) return 0.0;
    return static_cast<double>(count(u, v)) / static_cast<double>(it->second);
  }
};

inline TransitionTable empirical_transitions(const WalkCorpus& corpus) {
  if (corpus.empty()) throw PreconditionError("empty corpus");
  TransitionTable t;
  t.mode = corpus.mode;
  t.graph_version = corpus.graph_version;
  for (const auto& w : corpus.walks) {
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      ++t.counts[TransitionTable::key(w[i], w[i + 1])];
      ++t.row_totals[w[i]];
    }
  }
  return t;
}

struct EdgeProbability {
  NodeId src = 0;
  NodeId dst = 0;
  double probability = 0.0;
};

struct TheoreticalTransitions {
  std::vector<EdgeProbability> edges;  // canonical (src, dst) order
  std::uint64_t graph_version = 0;
};

// P(u,v) = 1 / out_degree(u) for every edge.
inline TheoreticalTransitions theoretical_transitions(const TransactionGraph& g) {
  TheoreticalTransitions t;
  t.graph_version = g.version();
  t.edges.reserve(g.num_edges());
  g.for_each_edge([&](const TxEdge& e) {
    t.edges.push_back({e.src, e.dst, 1.0 / static_cast<double>(g.out_degree(e.src))});
  });
  return t;
}

// Mean |P_hat - P| over all edges of the graph; unvisited edges count as P_hat = 0.
inline double delta_mae(const TransitionTable& emp, const TheoreticalTransitions& theo) {
  if (emp.mode != WalkMode::Uniform)
    throw ModeMismatchError("transition MAE is only defined for uniform-walk corpora");
  if (emp.graph_version != theo.graph_version)
    throw StateError("corpus graph version " + std::to_string(emp.graph_version) +
                     " differs from reference graph version " + std::to_string(theo.graph_version));
  if (theo.edges.empty()) throw PreconditionError("graph has no edges");
  double total = 0.0;
  for (const auto& e : theo.edges) total += std::abs(emp.probability(e.src, e.dst) - e.probability);
  return total / static_cast<double>(theo.edges.size());
}

inline double delta_mae(const WalkCorpus& corpus, const TransactionGraph& g) {
  return delta_mae(empirical_transitions(corpus), theoretical_transitions(g));
}

// ---------------------------------------------------------------------------
// Logistic regression.

struct LogRegHyper {
  double learning_rate = 1.0;  // initial step; backtracking halves it as needed
  std::size_t epochs = 20000;
  double l2 = 1e-3;
  double tolerance = 1e-6;  // stop once the gradient norm drops below
};

struct LogRegModel {
  std::vector<double> weights;  // feature weights followed by the bias
  bool trained = false;

  std::size_t dim() const noexcept { return weights.empty() ? 0 : weights.size() - 1; }

  double decision(std::span<const double> x) const {
    double z = weights.back();
    for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
    return z;
  }
  double probability(std::span<const double> x) const { return detail::sigmoid(decision(x)); }
  int predict(std::span<const double> x) const { return decision(x) >= 0.0 ? 1 : 0; }
};

using FeatureMatrix = std::vector<std::vector<double>>;

// Mean logistic loss plus (l2/2)|w|^2 (bias not penalised) and its gradient.
inline double logreg_objective(const FeatureMatrix& X, std::span<const int> y, std::span<const double> w, double l2,
                               std::vector<double>* grad) {
  const std::size_t d = w.size() - 1;
  const double inv_n = 1.0 / static_cast<double>(X.size());
  if (grad) grad->assign(w.size(), 0.0);
  double loss = 0.0;
  for (std::size_t r = 0; r < X.size(); ++r) {
    double z = w[d];
    for (std::size_t i = 0; i < d; ++i) z += w[i] * X[r][i];
    const double label = y[r] ? 1.0 : 0.0;
    loss -= label ? detail::log_sigmoid(z) : detail::log_sigmoid(-z);
    if (grad) {
      const double c = (detail::sigmoid(z) - label) * inv_n;
      for (std::size_t i = 0; i < d; ++i) (*grad)[i] += c * X[r][i];
      (*grad)[d] += c;
    }
  }
  loss *= inv_n;
  for (std::size_t i = 0; i < d; ++i) {
    loss += 0.5 * l2 * w[i] * w[i];
    if (grad) (*grad)[i] += l2 * w[i];
  }
  return loss;
}

// Full-batch gradient descent with Armijo backtracking.
inline LogRegModel train_logreg(const FeatureMatrix& X, std::span<const int> y, const LogRegHyper& hyper = {}) {
  if (X.size() != y.size()) throw InputError("feature and label counts differ");
  if (X.size() < 2) throw InputError("logistic regression needs at least two rows");
  const std::size_t d = X.front().size();
  for (const auto& row : X)
    if (row.size() != d) throw InputError("ragged feature matrix");
  const bool has_pos = std::ranges::any_of(y, [](int v) { return v != 0; });
  const bool has_neg = std::ranges::any_of(y, [](int v) { return v == 0; });
  if (!has_pos || !has_neg) throw InputError("degenerate labels: both classes are required");

  std::vector<double> w(d + 1, 0.0), g, trial(d + 1);
  double f = logreg_objective(X, y, w, hyper.l2, &g);
  double step = hyper.learning_rate;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    double gnorm2 = 0.0;
    for (double v : g) gnorm2 += v * v;
    if (std::sqrt(gnorm2) < hyper.tolerance) break;
    double f_trial = 0.0;
    while (true) {
      for (std::size_t i = 0; i <= d; ++i) trial[i] = w[i] - step * g[i];
      f_trial = logreg_objective(X, y, trial, hyper.l2, nullptr);
      if (f_trial <= f - 0.5 * step * gnorm2 || step < 1e-12) break;
      step *= 0.5;
    }
    w.swap(trial);
    f = logreg_objective(X, y, w, hyper.l2, &g);
    step = std::min(step * 2.0, hyper.learning_rate);
  }
  return LogRegModel{std::move(w), true};
}

// ---------------------------------------------------------------------------
// Balanced classification.

struct LabeledSet {
  std::vector<NodeId> nodes;
  std::vector<int> labels;
};

// Every set holds all positives plus as many negatives, drawn uniformly without
// replacement from rows [0, num_rows) outside the positive set.
inline std::vector<LabeledSet> balanced_sets(std::size_t num_rows, std::span<const NodeId> positives,
                                             std::size_t repeats, std::uint64_t seed) {
  if (positives.empty()) throw InputError("no positive nodes");
  std::vector<NodeId> pos(positives.begin(), positives.end());
  std::sort(pos.begin(), pos.end());
  pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  for (NodeId p : pos)
    if (p >= num_rows) throw LookupError("positive node " + std::to_string(p) + " has no embedding row");
  std::vector<NodeId> candidates;
  candidates.reserve(num_rows - pos.size());
  for (NodeId u = 0; u < num_rows; ++u)
    if (!std::binary_search(pos.begin(), pos.end(), u)) candidates.push_back(u);
  if (candidates.size() < pos.size())
    throw InputError("need " + std::to_string(pos.size()) + " negatives but only " +
                     std::to_string(candidates.size()) + " unlabeled nodes exist");

  std::vector<LabeledSet> out;
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng = substream(seed, 0x6e6567ULL, r);
    std::vector<NodeId> pool = candidates;
    for (std::size_t i = 0; i < pos.size(); ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    LabeledSet s;
    for (NodeId p : pos) {
      s.nodes.push_back(p);
      s.labels.push_back(1);
    }
    for (std::size_t i = 0; i < pos.size(); ++i) {
      s.nodes.push_back(pool[i]);
      s.labels.push_back(0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  double accuracy() const { return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0; }
  // F1 of the positive class; 0 when it is undefined.
  double f1() const {
    const double denom = static_cast<double>(2 * tp + fp + fn);
    return denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
  }
};

struct RepeatMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  ConfusionCounts confusion;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

struct EvalReport {
  std::optional<double> delta_mae;
  std::optional<double> mean_defacto_length;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::uint64_t split_seed = 0;
  std::size_t repeats = 0;
  double split = 0.8;
  std::vector<RepeatMetrics> per_repeat;
};

template <typename Real>
std::vector<double> feature_row(const BasicEmbedding<Real>& emb, NodeId u) {
  auto r = emb.input(u);
  return std::vector<double>(r.begin(), r.end());
}

// Per repeat: balanced set, stratified split, logistic regression, test metrics.
template <typename Real>
EvalReport classify_eval(const BasicEmbedding<Real>& emb, std::span<const NodeId> positives, double split,
                         std::size_t repeats, std::uint64_t seed, const LogRegHyper& hyper = {}) {
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("split must lie in (0,1)");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  EvalReport rep;
  rep.split_seed = seed;
  rep.repeats = repeats;
  rep.split = split;
  const auto sets = balanced_sets(emb.rows(), positives, repeats, seed);
  for (std::size_t r = 0; r < sets.size(); ++r) {
    const auto& s = sets[r];
    Rng rng = substream(seed, 0x73706c6974ULL, r);
    std::vector<std::size_t> train_rows, test_rows;
    for (int cls : {1, 0}) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < s.nodes.size(); ++i)
        if (s.labels[i] == cls) members.push_back(i);
      for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[uniform_index(rng, i)]);
      const auto n_train = static_cast<std::size_t>(std::llround(split * static_cast<double>(members.size())));
      for (std::size_t i = 0; i < members.size(); ++i) (i < n_train ? train_rows : test_rows).push_back(members[i]);
    }
    FeatureMatrix X;
    std::vector<int> y;
    for (auto i : train_rows) {
      X.push_back(feature_row(emb, s.nodes[i]));
      y.push_back(s.labels[i]);
    }
    const LogRegModel model = train_logreg(X, y, hyper);
    RepeatMetrics m;
    m.train_size = train_rows.size();
    m.test_size = test_rows.size();
    for (auto i : test_rows) {
      const int pred = model.predict(feature_row(emb, s.nodes[i]));
      const int truth = s.labels[i];
      if (pred && truth) ++m.confusion.tp;
      else if (pred && !truth) ++m.confusion.fp;
      else if (!pred && truth) ++m.confusion.fn;
      else ++m.confusion.tn;
    }
    m.accuracy = m.confusion.accuracy();
    m.f1 = m.confusion.f1();
    rep.per_repeat.push_back(m);
  }
  for (const auto& m : rep.per_repeat) {
    rep.accuracy += m.accuracy;
    rep.f1 += m.f1;
  }
  rep.accuracy /= static_cast<double>(rep.per_repeat.size());
  rep.f1 /= static_cast<double>(rep.per_repeat.size());
  return rep;
}

// Labels CSV `address,label`; rows with label 1 are positives. Addresses are
// resolved through `lookup`, which returns kNoNode for unknown ones.
template <typename Lookup>
std::vector<NodeId> read_positive_labels(std::istream& in, Lookup&& lookup) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<NodeId> out;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = detail::trim(line);
    if (body.empty()) continue;
    const auto f = detail::split(body, ',');
    if (f.size() != 2) throw ParseError("expected address,label", lineno);
    const auto addr = detail::trim(f[0]);
    const auto label = detail::trim(f[1]);
    if (lineno == 1 && addr == "address") continue;
    if (label != "1" && label != "0") throw ParseError("label must be 1 (or 0)", lineno);
    if (label == "0") continue;
    const NodeId id = lookup(addr);
    if (id == kNoNode) throw ParseError("unknown address '" + std::string(addr) + "'", lineno);
    out.push_back(id);
  }
  return out;
}

}  // namespace walkforge
