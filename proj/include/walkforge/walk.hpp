#pragma once

// Walk corpora: uniform random walks and Metropolis-Hastings leap-walks.
//
// A leap-walk proposes, at every step, a node drawn uniformly from the nodes
// at directed distance exactly h from the current node, and moves there when
// r < alpha + alpha_min with
//
//   alpha = min(1, (p(v)+eps) q(curr|v) / ((p(curr)+eps) q(v|curr))).
//
// p is one of the per-node transaction statistics, q is either 1/dist or
// exp(-lambda*dist). q(curr|v) uses the return distance from v to curr when it
// is within h hops and a fixed nominal probability otherwise. A rejected
// proposal consumes the step without appending anything.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "walkforge/common.hpp"
#include "walkforge/graph.hpp"

namespace walkforge {

using Walk = std::vector<NodeId>;

enum class WalkMode { Uniform, MH };

inline std::string_view to_string(WalkMode m) { return m == WalkMode::Uniform ? "uniform" : "mh"; }

inline WalkMode parse_walk_mode(std::string_view s) {
  if (s == "uniform") return WalkMode::Uniform;
  if (s == "mh") return WalkMode::MH;
  throw ConfigError("unknown walk mode '" + std::string(s) + "'");
}

enum class ProposalKind {
  Reciprocal,  // q_S: 1 / dist
  ExpDecay,    // q_E: exp(-lambda * dist)
};

inline std::string_view to_string(ProposalKind q) { return q == ProposalKind::Reciprocal ? "S" : "E"; }

inline ProposalKind parse_proposal(std::string_view s) {
  if (s == "S" || s == "s") return ProposalKind::Reciprocal;
  if (s == "E" || s == "e") return ProposalKind::ExpDecay;
  throw ConfigError("unknown proposal '" + std::string(s) + "' (expected S or E)");
}

struct MHConfig {
  std::uint32_t num_walks = 10;   // n, walks per origin node
  std::uint32_t walk_length = 5;  // l, maximum nodes per walk
  unsigned hops = 2;              // h
  double alpha_min = 0.5;
  StatKind target = StatKind::DIn;
  ProposalKind proposal = ProposalKind::Reciprocal;
  double lambda = 0.5;
  double nominal_return = 0.1;
  double p_smoothing = 1.0;
  std::uint64_t seed = 42;
  // Frontiers larger than this are sampled by random expansion instead of
  // being materialized. 0 selects 64*h.
  std::size_t frontier_cap = 0;

  std::size_t effective_frontier_cap() const { return frontier_cap ? frontier_cap : std::size_t{64} * hops; }

  void validate() const {
    if (num_walks < 1) throw ConfigError("num_walks must be >= 1");
    if (walk_length < 2) throw ConfigError("walk_length must be >= 2");
    if (hops < 1) throw ConfigError("hops must be >= 1");
    if (!(alpha_min >= 0.0 && alpha_min <= 1.0)) throw ConfigError("alpha_min must lie in [0,1]");
    if (!(nominal_return > 0.0 && nominal_return <= 1.0)) throw ConfigError("nominal_return must lie in (0,1]");
    if (!(p_smoothing > 0.0)) throw ConfigError("p_smoothing must be positive");
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  }
};

// ---------------------------------------------------------------------------
// Samplers. Both are cheap to construct, hold a reference to an immutable
// graph, and are meant to be used from a single thread.

class UniformSampler {
 public:
  explicit UniformSampler(const TransactionGraph& g) : g_(g) {}

  // Next node, or kNoNode at a sink.
  NodeId step(NodeId curr, Rng& rng) {
    auto out = g_.out_edges(curr);
    if (out.empty()) return kNoNode;
    ++draws_;
    return out[uniform_index(rng, out.size())].dst;
  }

  // Appends up to `budget` steps to `w`.
  void extend(Walk& w, std::size_t budget, Rng& rng) {
    NodeId curr = w.back();
    for (std::size_t s = 0; s < budget; ++s) {
      NodeId next = step(curr, rng);
      if (next == kNoNode) return;
      w.push_back(next);
      curr = next;
    }
  }

  std::uint64_t draws() const noexcept { return draws_; }

 private:
  const TransactionGraph& g_;
  std::uint64_t draws_ = 0;
};

class MHSampler {
 public:
  MHSampler(const TransactionGraph& g, const MHConfig& cfg)
      : g_(g), cfg_(cfg), cache_(g.num_nodes()), state_(g.num_nodes(), Unknown) {
    cfg_.validate();
  }

  const MHConfig& config() const noexcept { return cfg_; }

  // Smoothed target density p(u) + eps.
  double target(NodeId u) const { return node_stat(g_, u, cfg_.target) + cfg_.p_smoothing; }

  double proposal(unsigned dist) const {
    return cfg_.proposal == ProposalKind::Reciprocal ? 1.0 / dist : std::exp(-cfg_.lambda * dist);
  }

  // q(curr | v): probability of proposing the way back.
  double return_proposal(NodeId v, NodeId curr) {
    auto d = shortest_hop(g_, v, curr, cfg_.hops, scratch_);
    return d ? proposal(*d) : cfg_.nominal_return;
  }

  // Acceptance probability for moving curr -> v. v must be at exact distance h.
  double acceptance(NodeId curr, NodeId v) {
    if (!at_exact_distance(curr, v))
      throw PreconditionError("node " + std::to_string(v) + " is not exactly " + std::to_string(cfg_.hops) +
                              " hops from " + std::to_string(curr));
    return acceptance_unchecked(curr, v);
  }

  // Exact frontier N_h(u), ascending. Always materialized, bypassing the cap.
  std::vector<NodeId> frontier(NodeId u) {
    if (auto f = cached(u)) return std::vector<NodeId>(f->begin(), f->end());
    return *bounded_frontier(g_, u, cfg_.hops, scratch_);
  }

  // Uniform candidate from N_h(curr), or kNoNode when it is empty.
  NodeId propose(NodeId curr, Rng& rng) {
    classify(curr);
    if (state_[curr] == Small) {
      const auto& f = cache_[curr];
      if (f.empty()) return kNoNode;
      ++draws_;
      return f[uniform_index(rng, f.size())];
    }
    ++draws_;
    return propose_by_expansion(curr, rng);
  }

  // One chain transition. Returns the next state (curr itself on rejection)
  // or kNoNode when curr has no candidates.
  NodeId step(NodeId curr, Rng& rng) {
    const NodeId v = propose(curr, rng);
    if (v == kNoNode) return kNoNode;
    const double alpha = acceptance_unchecked(curr, v);
    const double r = uniform01(rng);
    return r < alpha + cfg_.alpha_min ? v : curr;
  }

  // Runs `budget` proposal steps from w.back(), appending accepted nodes.
  void extend(Walk& w, std::size_t budget, Rng& rng) {
    NodeId curr = w.back();
    for (std::size_t s = 0; s < budget; ++s) {
      const NodeId next = step(curr, rng);
      if (next == kNoNode) return;
      if (next != curr) {
        w.push_back(next);
        curr = next;
      }
    }
  }

  std::uint64_t draws() const noexcept { return draws_; }

 private:
  enum State : unsigned char { Unknown, Small, Large };

  const std::vector<NodeId>* cached(NodeId u) {
    classify(u);
    return state_[u] == Small ? &cache_[u] : nullptr;
  }

  bool at_exact_distance(NodeId curr, NodeId v) {
    if (auto f = cached(curr)) return std::binary_search(f->begin(), f->end(), v);
    auto d = shortest_hop(g_, curr, v, cfg_.hops, scratch_);
    return d && *d == cfg_.hops;
  }

  double acceptance_unchecked(NodeId curr, NodeId v) {
    const double forward = proposal(cfg_.hops);
    const double backward = return_proposal(v, curr);
    const double r = (target(v) * backward) / (target(curr) * forward);
    return std::min(1.0, r);
  }

  // BFS to depth h. Stores the frontier when it has at most `cap` nodes;
  // otherwise stores the inner ball (distance < h) for rejection sampling.
  void classify(NodeId u) {
    if (!g_.contains(u)) throw LookupError("unknown node id " + std::to_string(u));
    if (state_[u] != Unknown) return;
    const std::size_t cap = cfg_.effective_frontier_cap();
    auto& s = scratch_;
    s.reset(g_.num_nodes());
    std::vector<NodeId> ball{u};
    s.visit(u);
    s.level.assign(1, u);
    for (unsigned depth = 1; depth <= cfg_.hops && !s.level.empty(); ++depth) {
      const bool last = depth == cfg_.hops;
      s.next.clear();
      for (NodeId x : s.level) {
        for (const auto& e : g_.out_edges(x)) {
          if (!s.visit(e.dst)) continue;
          s.next.push_back(e.dst);
          if (last && s.next.size() > cap) {
            std::sort(ball.begin(), ball.end());
            cache_[u] = std::move(ball);
            state_[u] = Large;
            return;
          }
        }
      }
      if (!last) ball.insert(ball.end(), s.next.begin(), s.next.end());
      std::swap(s.level, s.next);
    }
    std::sort(s.level.begin(), s.level.end());
    cache_[u].assign(s.level.begin(), s.level.end());
    state_[u] = Small;
  }

  // Random h-step forward path; accepted when its endpoint is outside the
  // inner ball, i.e. at exact distance h. Falls back to the full frontier
  // after a bounded number of dead ends.
  NodeId propose_by_expansion(NodeId curr, Rng& rng) {
    const auto& ball = cache_[curr];
    const unsigned retries = 32 * cfg_.hops;
    for (unsigned attempt = 0; attempt < retries; ++attempt) {
      NodeId x = curr;
      bool dead = false;
      for (unsigned k = 0; k < cfg_.hops; ++k) {
        auto out = g_.out_edges(x);
        if (out.empty()) {
          dead = true;
          break;
        }
        x = out[uniform_index(rng, out.size())].dst;
      }
      if (!dead && !std::binary_search(ball.begin(), ball.end(), x)) return x;
    }
    auto full = *bounded_frontier(g_, curr, cfg_.hops, scratch_);
    return full.empty() ? kNoNode : full[uniform_index(rng, full.size())];
  }

  const TransactionGraph& g_;
  MHConfig cfg_;
  std::vector<std::vector<NodeId>> cache_;
  std::vector<State> state_;
  BfsScratch scratch_;
  std::uint64_t draws_ = 0;
};

// ---------------------------------------------------------------------------
// Single walks.

inline Walk uniform_walk(const TransactionGraph& g, NodeId u, std::size_t length, Rng& rng) {
  if (!g.contains(u)) throw LookupError("unknown node id " + std::to_string(u));
  UniformSampler s(g);
  Walk w{u};
  if (length > 0) s.extend(w, length - 1, rng);
  return w;
}

inline double mh_acceptance(const TransactionGraph& g, NodeId curr, NodeId v, const MHConfig& cfg) {
  MHSampler s(g, cfg);
  return s.acceptance(curr, v);
}

inline Walk mh_walk(const TransactionGraph& g, NodeId u, const MHConfig& cfg, Rng& rng) {
  MHSampler s(g, cfg);
  Walk w{u};
  s.extend(w, cfg.walk_length - 1, rng);
  return w;
}

// Extends `prefix` from its last node with the step budget a fresh walk of the
// remaining length would get: l - |prefix| proposals.
template <typename Sampler>
Walk resume_with(Sampler& s, Walk prefix, std::size_t walk_length, Rng& rng) {
  if (prefix.empty()) throw PreconditionError("cannot resume an empty walk");
  if (prefix.size() < walk_length) s.extend(prefix, walk_length - prefix.size(), rng);
  return prefix;
}

inline Walk resume_walk(const TransactionGraph& g, Walk prefix, const MHConfig& cfg, WalkMode mode, Rng& rng) {
  if (prefix.empty()) throw PreconditionError("cannot resume an empty walk");
  if (!g.contains(prefix.back())) throw LookupError("resume node not in graph");
  if (mode == WalkMode::Uniform) {
    UniformSampler s(g);
    return resume_with(s, std::move(prefix), cfg.walk_length, rng);
  }
  MHSampler s(g, cfg);
  return resume_with(s, std::move(prefix), cfg.walk_length, rng);
}

// ---------------------------------------------------------------------------
// Corpus.

// node -> ascending indices of the walks that contain it.
class NodeIndex {
 public:
  void resize(std::size_t num_nodes) {
    if (lists_.size() < num_nodes) lists_.resize(num_nodes);
  }

  void add(std::uint32_t walk_id, const Walk& w) {
    for (NodeId u : distinct(w)) {
      resize(static_cast<std::size_t>(u) + 1);
      auto& l = lists_[u];
      auto it = std::lower_bound(l.begin(), l.end(), walk_id);
      if (it == l.end() || *it != walk_id) l.insert(it, walk_id);
    }
  }

  void remove(std::uint32_t walk_id, const Walk& w) {
    for (NodeId u : distinct(w)) {
      if (u >= lists_.size()) continue;
      auto& l = lists_[u];
      auto it = std::lower_bound(l.begin(), l.end(), walk_id);
      if (it != l.end() && *it == walk_id) l.erase(it);
    }
  }

  std::span<const std::uint32_t> walks_containing(NodeId u) const {
    if (u >= lists_.size()) return {};
    return lists_[u];
  }

  std::size_t num_nodes() const noexcept { return lists_.size(); }

  static NodeIndex build(std::span<const Walk> walks, std::size_t num_nodes) {
    NodeIndex idx;
    idx.resize(num_nodes);
    // Appending in walk order keeps every list sorted.
    for (std::uint32_t i = 0; i < walks.size(); ++i) {
      for (NodeId u : distinct(walks[i])) {
        idx.resize(static_cast<std::size_t>(u) + 1);
        idx.lists_[u].push_back(i);
      }
    }
    return idx;
  }

  friend bool operator==(const NodeIndex& a, const NodeIndex& b) {
    const std::size_t n = std::max(a.lists_.size(), b.lists_.size());
    for (std::size_t u = 0; u < n; ++u)
      if (!std::ranges::equal(a.walks_containing(static_cast<NodeId>(u)), b.walks_containing(static_cast<NodeId>(u))))
        return false;
    return true;
  }

 private:
  static Walk distinct(Walk w) {
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end()), w.end());
    return w;
  }

  std::vector<std::vector<std::uint32_t>> lists_;
};

struct WalkCorpus {
  std::vector<Walk> walks;
  NodeIndex index;
  std::uint64_t graph_version = 0;
  WalkMode mode = WalkMode::Uniform;
  MHConfig config;
  std::uint64_t draws = 0;  // candidate draws spent producing the current walks (not persisted)

  std::size_t size() const noexcept { return walks.size(); }
  bool empty() const noexcept { return walks.empty(); }
};

namespace detail {

template <typename Sampler>
void fill_walks(Sampler& s, const MHConfig& cfg, NodeId begin, NodeId end, std::vector<Walk>& walks) {
  for (NodeId u = begin; u < end; ++u) {
    for (std::uint32_t i = 0; i < cfg.num_walks; ++i) {
      Rng rng = substream(cfg.seed, u, i);
      Walk w{u};
      s.extend(w, cfg.walk_length - 1, rng);
      walks[static_cast<std::size_t>(u) * cfg.num_walks + i] = std::move(w);
    }
  }
}

}  // namespace detail

// n walks from every node, ordered by (origin, walk number). Each walk draws
// from its own substream keyed by (seed, origin, walk number), so the result
// does not depend on `threads`.
inline WalkCorpus generate_corpus(const TransactionGraph& g, const MHConfig& cfg, WalkMode mode,
                                  unsigned threads = 1) {
  cfg.validate();
  WalkCorpus c;
  c.mode = mode;
  c.config = cfg;
  c.graph_version = g.version();
  const auto n = static_cast<NodeId>(g.num_nodes());
  c.walks.resize(static_cast<std::size_t>(n) * cfg.num_walks);
  threads = std::max(1u, std::min<unsigned>(threads, std::max<NodeId>(n, 1)));
  std::vector<std::uint64_t> draws(threads, 0);

  auto work = [&](unsigned t) {
    const NodeId begin = static_cast<NodeId>(static_cast<std::uint64_t>(n) * t / threads);
    const NodeId end = static_cast<NodeId>(static_cast<std::uint64_t>(n) * (t + 1) / threads);
    if (mode == WalkMode::Uniform) {
      UniformSampler s(g);
      detail::fill_walks(s, cfg, begin, end, c.walks);
      draws[t] = s.draws();
    } else {
      MHSampler s(g, cfg);
      detail::fill_walks(s, cfg, begin, end, c.walks);
      draws[t] = s.draws();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }
  for (auto d : draws) c.draws += d;
  c.index = NodeIndex::build(c.walks, g.num_nodes());
  return c;
}

inline double mean_defacto_length(const WalkCorpus& c) {
  if (c.walks.empty()) throw PreconditionError("empty corpus");
  double total = 0.0;
  for (const auto& w : c.walks) total += static_cast<double>(w.size());
  return total / static_cast<double>(c.walks.size());
}

// ---------------------------------------------------------------------------
// Corpus file:
//   WALKFORGE-WALKS v1 graph_version=<t> n=<n> l=<l> mode=<uniform|mh>[ <mh parameters>]
//   <id> <id> ...
// MH corpora append h, alpha_min, p, q, lambda, nominal_return, epsilon and
// frontier_cap so updates can reject a mismatched sampler.

inline std::string corpus_header(const WalkCorpus& c) {
  std::ostringstream out;
  out << "WALKFORGE-WALKS v1 graph_version=" << c.graph_version << " n=" << c.config.num_walks
      << " l=" << c.config.walk_length << " mode=" << to_string(c.mode);
  if (c.mode == WalkMode::MH) {
    const auto& m = c.config;
    out << " h=" << m.hops << " alpha_min=" << detail::format_double(m.alpha_min) << " p=" << to_string(m.target)
        << " q=" << to_string(m.proposal) << " lambda=" << detail::format_double(m.lambda)
        << " nominal_return=" << detail::format_double(m.nominal_return)
        << " epsilon=" << detail::format_double(m.p_smoothing) << " frontier_cap=" << m.effective_frontier_cap();
  }
  return out.str();
}

inline void write_corpus(std::ostream& out, const WalkCorpus& c) {
  out << corpus_header(c) << '\n';
  std::string line;
  for (const auto& w : c.walks) {
    line.clear();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i) line.push_back(' ');
      line += std::to_string(w[i]);
    }
    line.push_back('\n');
    out << line;
  }
}

inline WalkCorpus read_corpus(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty corpus file", 1);
  std::string_view head = detail::trim(line);
  if (head.rfind("WALKFORGE-WALKS v1 ", 0) != 0) throw ParseError("not a WALKFORGE-WALKS v1 file", 1);
  WalkCorpus c;
  auto need = [&](std::string_view key) {
    auto v = detail::header_field(head, key);
    if (!v) throw ParseError("header lacks " + std::string(key), 1);
    return *v;
  };
  auto num = [&](std::string_view key, auto& out) {
    if (!detail::parse_number(need(key), out)) throw ParseError("bad header field " + std::string(key), 1);
  };
  num("graph_version", c.graph_version);
  num("n", c.config.num_walks);
  num("l", c.config.walk_length);
  try {
    c.mode = parse_walk_mode(need("mode"));
    if (c.mode == WalkMode::MH) {
      num("h", c.config.hops);
      num("alpha_min", c.config.alpha_min);
      c.config.target = parse_stat_kind(need("p"));
      c.config.proposal = parse_proposal(need("q"));
      num("lambda", c.config.lambda);
      num("nominal_return", c.config.nominal_return);
      num("epsilon", c.config.p_smoothing);
      num("frontier_cap", c.config.frontier_cap);
    }
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), 1);
  }

  std::size_t lineno = 1;
  NodeId max_id = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = detail::trim(line);
    if (body.empty()) throw ParseError("empty walk line", lineno);
    Walk w;
    for (auto tok : detail::split(body, ' ')) {
      NodeId id = 0;
      if (!detail::parse_number(tok, id)) throw ParseError("bad node id '" + std::string(tok) + "'", lineno);
      w.push_back(id);
      max_id = std::max(max_id, id);
    }
    if (w.size() > c.config.walk_length) throw ParseError("walk longer than l", lineno);
    c.walks.push_back(std::move(w));
  }
  c.index = NodeIndex::build(c.walks, c.walks.empty() ? 0 : static_cast<std::size_t>(max_id) + 1);
  return c;
}

inline void save_corpus(const std::string& path, const WalkCorpus& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write corpus file '" + path + "'");
  write_corpus(out, c);
  if (!out) throw InputError("write failed for '" + path + "'");
}

inline WalkCorpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus file '" + path + "'");
  return read_corpus(in);
}

}  // namespace walkforge
