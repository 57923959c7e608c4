#pragma once

// Skip-gram node embeddings trained on a walk corpus.
//
// Pr(v | u) = exp(z_u . z'_v) / sum_k exp(z_u . z'_k), with z the input
// ("the embedding") and z' the output vectors. negatives == 0 trains that
// softmax exactly; negatives > 0 uses negative sampling with a unigram^0.75
// noise distribution.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "walkforge/common.hpp"
#include "walkforge/graph.hpp"
#include "walkforge/walk.hpp"

namespace walkforge {

struct SkipGramConfig {
  std::size_t dim = 64;
  std::size_t window = 5;
  double learning_rate = 0.05;
  std::size_t epochs = 1;
  std::size_t negatives = 5;  // 0 selects the full softmax
  std::size_t min_count = 1;
  std::uint64_t seed = 42;

  void validate() const {
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (window < 1) throw ConfigError("window must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
  }
};

template <typename Real>
class BasicEmbedding {
 public:
  using value_type = Real;

  BasicEmbedding() = default;
  BasicEmbedding(std::size_t rows, std::size_t dim)
      : rows_(rows), dim_(dim), input_(rows * dim, Real(0)), output_(rows * dim, Real(0)) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<Real> input(NodeId u) { return {input_.data() + row_offset(u), dim_}; }
  std::span<const Real> input(NodeId u) const { return {input_.data() + row_offset(u), dim_}; }
  std::span<Real> output(NodeId u) { return {output_.data() + row_offset(u), dim_}; }
  std::span<const Real> output(NodeId u) const { return {output_.data() + row_offset(u), dim_}; }

  std::vector<Real>& input_data() noexcept { return input_; }
  const std::vector<Real>& input_data() const noexcept { return input_; }
  std::vector<Real>& output_data() noexcept { return output_; }
  const std::vector<Real>& output_data() const noexcept { return output_; }

  // Optional row names (addresses) used by export and label matching.
  std::vector<std::string> labels;
  std::uint64_t graph_version = 0;

  friend bool operator==(const BasicEmbedding&, const BasicEmbedding&) = default;

 private:
  std::size_t row_offset(NodeId u) const {
    if (u >= rows_) throw LookupError("node " + std::to_string(u) + " has no embedding row");
    return static_cast<std::size_t>(u) * dim_;
  }

  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<Real> input_;
  std::vector<Real> output_;
};

using EmbeddingMatrix = BasicEmbedding<float>;

template <typename Real>
double dot(std::span<const Real> a, std::span<const Real> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Context pairs.

using NodePair = std::pair<NodeId, NodeId>;  // (center, context)

template <typename F>
void for_each_context_pair(std::span<const Walk> walks, std::size_t window, F&& f) {
  for (const auto& w : walks) {
    const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(w.size());
    const auto c = static_cast<std::ptrdiff_t>(window);
    for (std::ptrdiff_t i = 0; i < len; ++i) {
      for (std::ptrdiff_t j = -c; j <= c; ++j) {
        if (j == 0 || i + j < 0 || i + j >= len) continue;
        f(w[i], w[i + j]);
      }
    }
  }
}

inline std::size_t count_context_pairs(std::span<const Walk> walks, std::size_t window) {
  std::size_t total = 0;
  for (const auto& w : walks) {
    const std::size_t len = w.size();
    for (std::size_t i = 0; i < len; ++i) total += std::min(i, window) + std::min(len - 1 - i, window);
  }
  return total;
}

inline std::vector<NodePair> context_pairs(const WalkCorpus& corpus, std::size_t window) {
  if (window < 1) throw ConfigError("window must be >= 1");
  std::vector<NodePair> out;
  out.reserve(count_context_pairs(corpus.walks, window));
  for_each_context_pair(corpus.walks, window, [&](NodeId a, NodeId b) { out.emplace_back(a, b); });
  return out;
}

// ---------------------------------------------------------------------------
// Full softmax decoder.

namespace detail {

// Scores z_u . z'_k for every row and their log-sum-exp.
template <typename Real>
double softmax_scores(const BasicEmbedding<Real>& emb, NodeId u, std::vector<double>& scores) {
  scores.resize(emb.rows());
  const auto zu = emb.input(u);
  double mx = -INFINITY;
  for (NodeId k = 0; k < emb.rows(); ++k) {
    scores[k] = dot<Real>(zu, emb.output(k));
    mx = std::max(mx, scores[k]);
  }
  double s = 0.0;
  for (double x : scores) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

}  // namespace detail

template <typename Real>
double decode_prob(const BasicEmbedding<Real>& emb, NodeId u, NodeId v) {
  emb.input(u);
  emb.output(v);
  std::vector<double> scores;
  const double lse = detail::softmax_scores(emb, u, scores);
  return std::exp(scores[v] - lse);
}

// Mean negative log-likelihood of the pairs under the softmax decoder.
template <typename Real>
double nll_loss(const BasicEmbedding<Real>& emb, std::span<const NodePair> pairs) {
  if (pairs.empty()) throw PreconditionError("nll_loss needs at least one pair");
  std::vector<double> scores;
  double total = 0.0;
  for (const auto& [u, v] : pairs) {
    const double lse = detail::softmax_scores(emb, u, scores);
    total += lse - scores.at(v);
  }
  return total / static_cast<double>(pairs.size());
}

// Gradient with the same shape as an embedding.
template <typename Real>
struct EmbeddingGradient {
  std::vector<double> input;
  std::vector<double> output;

  explicit EmbeddingGradient(const BasicEmbedding<Real>& emb)
      : input(emb.input_data().size(), 0.0), output(emb.output_data().size(), 0.0) {}
};

// Loss and gradient of nll_loss.
template <typename Real>
double softmax_loss_grad(const BasicEmbedding<Real>& emb, std::span<const NodePair> pairs,
                         EmbeddingGradient<Real>& grad) {
  if (pairs.empty()) throw PreconditionError("softmax_loss_grad needs at least one pair");
  const std::size_t d = emb.dim();
  const double scale = 1.0 / static_cast<double>(pairs.size());
  std::vector<double> scores;
  double total = 0.0;
  for (const auto& [u, v] : pairs) {
    const double lse = detail::softmax_scores(emb, u, scores);
    total += lse - scores.at(v);
    const auto zu = emb.input(u);
    double* gu = grad.input.data() + static_cast<std::size_t>(u) * d;
    for (NodeId k = 0; k < emb.rows(); ++k) {
      const double coef = (std::exp(scores[k] - lse) - (k == v ? 1.0 : 0.0)) * scale;
      const auto zk = emb.output(k);
      double* gk = grad.output.data() + static_cast<std::size_t>(k) * d;
      for (std::size_t i = 0; i < d; ++i) {
        gu[i] += coef * zk[i];
        gk[i] += coef * zu[i];
      }
    }
  }
  return total * scale;
}

struct NegativeSample {
  NodeId center = 0;
  NodeId context = 0;
  std::vector<NodeId> negatives;
};

// Mean over samples of -log s(z_u.z'_v) - sum_n log s(-z_u.z'_n).
template <typename Real>
double negative_sampling_loss_grad(const BasicEmbedding<Real>& emb, std::span<const NegativeSample> samples,
                                   EmbeddingGradient<Real>* grad) {
  if (samples.empty()) throw PreconditionError("negative_sampling_loss_grad needs at least one sample");
  const std::size_t d = emb.dim();
  const double scale = 1.0 / static_cast<double>(samples.size());
  double total = 0.0;
  for (const auto& s : samples) {
    const auto zu = emb.input(s.center);
    auto term = [&](NodeId t, double label) {
      const auto zt = emb.output(t);
      const double f = dot<Real>(zu, zt);
      total -= detail::log_sigmoid(label > 0 ? f : -f);
      if (!grad) return;
      const double coef = (detail::sigmoid(f) - label) * scale;
      double* gu = grad->input.data() + static_cast<std::size_t>(s.center) * d;
      double* gt = grad->output.data() + static_cast<std::size_t>(t) * d;
      for (std::size_t i = 0; i < d; ++i) {
        gu[i] += coef * zt[i];
        gt[i] += coef * zu[i];
      }
    };
    term(s.context, 1.0);
    for (NodeId n : s.negatives) term(n, 0.0);
  }
  return total * scale;
}

// ---------------------------------------------------------------------------
// Training.

// Sampling table for the unigram^0.75 noise distribution.
class NoiseDistribution {
 public:
  NoiseDistribution(std::span<const Walk> walks, std::size_t rows) {
    std::vector<double> freq(rows, 0.0);
    for (const auto& w : walks)
      for (NodeId u : w)
        if (u < rows) freq[u] += 1.0;
    cumulative_.resize(rows);
    double acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      acc += freq[i] > 0 ? std::pow(freq[i], 0.75) : 0.0;
      cumulative_[i] = acc;
    }
  }

  bool empty() const noexcept { return cumulative_.empty() || cumulative_.back() <= 0.0; }

  NodeId sample(Rng& rng) const {
    const double x = uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    if (it == cumulative_.end()) --it;
    return static_cast<NodeId>(it - cumulative_.begin());
  }

  // Probability mass of row u.
  double probability(NodeId u) const {
    const double prev = u == 0 ? 0.0 : cumulative_[u - 1];
    return (cumulative_[u] - prev) / cumulative_.back();
  }

 private:
  std::vector<double> cumulative_;
};

template <typename Real>
void init_row(BasicEmbedding<Real>& emb, NodeId u, std::uint64_t seed) {
  Rng rng = substream(seed, u, 0x696e6974ULL);
  const double half = 0.5 / static_cast<double>(emb.dim());
  for (auto& x : emb.input(u)) x = static_cast<Real>((uniform01(rng) * 2.0 - 1.0) * half);
  for (auto& x : emb.output(u)) x = Real(0);
}

template <typename Real = float>
BasicEmbedding<Real> init_embedding(std::size_t rows, const SkipGramConfig& cfg) {
  BasicEmbedding<Real> emb(rows, cfg.dim);
  for (NodeId u = 0; u < rows; ++u) init_row(emb, u, cfg.seed);
  return emb;
}

inline std::size_t corpus_rows(const WalkCorpus& corpus) {
  std::size_t rows = corpus.index.num_nodes();
  for (const auto& w : corpus.walks)
    for (NodeId u : w) rows = std::max(rows, static_cast<std::size_t>(u) + 1);
  return rows;
}

// Runs cfg.epochs passes of SGD over the corpus pairs starting from `emb`.
// The learning rate decays linearly to 1e-4 of its initial value. Serial and
// deterministic for a fixed seed. Returns the mean loss of the last epoch.
template <typename Real>
double sgd_train(BasicEmbedding<Real>& emb, const WalkCorpus& corpus, const SkipGramConfig& cfg) {
  cfg.validate();
  if (emb.dim() != cfg.dim) throw ConfigError("embedding dimension does not match configuration");
  if (corpus_rows(corpus) > emb.rows()) throw PreconditionError("corpus references nodes without embedding rows");

  // min_count: nodes with fewer occurrences keep their initial rows.
  std::vector<std::size_t> occurrences(emb.rows(), 0);
  for (const auto& w : corpus.walks)
    for (NodeId u : w) ++occurrences[u];
  auto active = [&](NodeId u) { return occurrences[u] >= cfg.min_count; };

  const NoiseDistribution noise(corpus.walks, emb.rows());
  const std::size_t total_pairs = count_context_pairs(corpus.walks, cfg.window) * cfg.epochs;
  const std::size_t d = emb.dim();
  const double lr0 = cfg.learning_rate;
  std::vector<double> grad_u(d);
  std::vector<double> scores;
  std::vector<double> zu_copy(d);
  Rng rng = substream(cfg.seed, 0x736b6970ULL);

  std::size_t step = 0;
  double last_epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0.0;
    std::size_t pairs = 0;
    for_each_context_pair(corpus.walks, cfg.window, [&](NodeId u, NodeId v) {
      const double lr = lr0 * std::max(1e-4, 1.0 - static_cast<double>(step) / std::max<std::size_t>(total_pairs, 1));
      ++step;
      if (!active(u) || !active(v)) return;
      ++pairs;
      auto zu = emb.input(u);
      std::fill(grad_u.begin(), grad_u.end(), 0.0);
      if (cfg.negatives == 0) {
        const double lse = detail::softmax_scores(emb, u, scores);
        loss += lse - scores[v];
        for (std::size_t i = 0; i < d; ++i) zu_copy[i] = zu[i];
        for (NodeId k = 0; k < emb.rows(); ++k) {
          const double coef = std::exp(scores[k] - lse) - (k == v ? 1.0 : 0.0);
          auto zk = emb.output(k);
          for (std::size_t i = 0; i < d; ++i) {
            grad_u[i] += coef * zk[i];
            zk[i] = static_cast<Real>(zk[i] - lr * coef * zu_copy[i]);
          }
        }
      } else {
        auto term = [&](NodeId t, double label) {
          auto zt = emb.output(t);
          const double f = dot<Real>(std::span<const Real>(zu), std::span<const Real>(zt));
          loss -= detail::log_sigmoid(label > 0 ? f : -f);
          const double coef = detail::sigmoid(f) - label;
          for (std::size_t i = 0; i < d; ++i) {
            grad_u[i] += coef * zt[i];
            zt[i] = static_cast<Real>(zt[i] - lr * coef * zu[i]);
          }
        };
        term(v, 1.0);
        for (std::size_t k = 0; k < cfg.negatives; ++k) {
          const NodeId n = noise.sample(rng);
          if (n == v) continue;
          term(n, 0.0);
        }
      }
      for (std::size_t i = 0; i < d; ++i) zu[i] = static_cast<Real>(zu[i] - lr * grad_u[i]);
    });
    last_epoch_loss = pairs ? loss / static_cast<double>(pairs) : 0.0;
  }
  return last_epoch_loss;
}

template <typename Real = float>
BasicEmbedding<Real> train(const WalkCorpus& corpus, const SkipGramConfig& cfg, std::size_t rows = 0) {
  cfg.validate();
  if (corpus.empty()) throw PreconditionError("cannot train on an empty corpus");
  auto emb = init_embedding<Real>(std::max(rows, corpus_rows(corpus)), cfg);
  emb.graph_version = corpus.graph_version;
  sgd_train(emb, corpus, cfg);
  return emb;
}

// Rows of `prev` seed the persisting nodes; rows for new nodes get a fresh
// initialization; then training continues on `corpus_next`.
template <typename Real>
BasicEmbedding<Real> warm_retrain(const BasicEmbedding<Real>& prev, const WalkCorpus& corpus_next,
                                  const SkipGramConfig& cfg, std::size_t rows = 0) {
  cfg.validate();
  if (prev.dim() != cfg.dim) throw ConfigError("previous embedding dimension does not match configuration");
  if (corpus_next.graph_version < prev.graph_version)
    throw StateError("corpus is older than the embedding it would update");
  const std::size_t n = std::max({rows, corpus_rows(corpus_next), prev.rows()});
  BasicEmbedding<Real> emb(n, cfg.dim);
  for (NodeId u = 0; u < n; ++u) {
    if (u < prev.rows()) {
      std::ranges::copy(prev.input(u), emb.input(u).begin());
      std::ranges::copy(prev.output(u), emb.output(u).begin());
    } else {
      init_row(emb, u, cfg.seed);
    }
  }
  emb.labels = prev.labels;
  emb.graph_version = corpus_next.graph_version;
  if (cfg.epochs > 0) sgd_train(emb, corpus_next, cfg);
  return emb;
}

// ---------------------------------------------------------------------------
// word2vec text format: "<rows> <dim>" then "<label> f1 ... fd" per row.
// Labels are addresses when known, otherwise decimal ids.

template <typename Real>
void write_embeddings(std::ostream& out, const BasicEmbedding<Real>& emb) {
  out << emb.rows() << ' ' << emb.dim() << '\n';
  std::string line;
  char buf[64];
  for (NodeId u = 0; u < emb.rows(); ++u) {
    line = u < emb.labels.size() ? emb.labels[u] : std::to_string(u);
    for (Real x : emb.input(u)) {
      auto res = std::to_chars(buf, buf + sizeof buf, x);
      line.push_back(' ');
      line.append(buf, res.ptr);
    }
    line.push_back('\n');
    out << line;
  }
}

template <typename Real = float>
BasicEmbedding<Real> read_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty embedding file", 1);
  const auto head = detail::split(detail::trim(line), ' ');
  std::size_t rows = 0, dim = 0;
  if (head.size() != 2 || !detail::parse_number(head[0], rows) || !detail::parse_number(head[1], dim) || dim == 0)
    throw ParseError("expected '<rows> <dim>' header", 1);
  BasicEmbedding<Real> emb(rows, dim);
  emb.labels.resize(rows);
  std::size_t lineno = 1;
  for (NodeId u = 0; u < rows; ++u) {
    if (!std::getline(in, line))
      throw ParseError("header declares " + std::to_string(rows) + " rows, file has " + std::to_string(u), lineno + 1);
    ++lineno;
    const auto f = detail::split(detail::trim(line), ' ');
    if (f.size() != dim + 1)
      throw ParseError("expected " + std::to_string(dim) + " values, found " + std::to_string(f.size() - 1), lineno);
    emb.labels[u] = std::string(f[0]);
    auto row = emb.input(u);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!detail::parse_number(f[i + 1], row[i]) || !std::isfinite(static_cast<double>(row[i])))
        throw ParseError("bad value '" + std::string(f[i + 1]) + "'", lineno);
    }
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::trim(line).empty())
      throw ParseError("header declares " + std::to_string(rows) + " rows but more follow", lineno);
  }
  return emb;
}

template <typename Real>
void export_embeddings(const BasicEmbedding<Real>& emb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write embedding file '" + path + "'");
  write_embeddings(out, emb);
  if (!out) throw InputError("write failed for '" + path + "'");
}

template <typename Real = float>
BasicEmbedding<Real> import_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open embedding file '" + path + "'");
  return read_embeddings<Real>(in);
}

// Row labels from the graph's address dictionary.
template <typename Real>
void label_with_addresses(BasicEmbedding<Real>& emb, const TransactionGraph& g) {
  emb.labels.resize(emb.rows());
  for (NodeId u = 0; u < emb.rows(); ++u) emb.labels[u] = g.contains(u) ? g.address(u) : std::to_string(u);
}

}  // namespace walkforge
