#pragma once

// Evolving directed transaction graph.
//
// Nodes are addresses, interned to dense ids in first-appearance order. Raw
// transfers between the same ordered pair are folded into one TxEdge (summed
// weight and count, earliest timestamp). A TransactionGraph value is one
// immutable version; apply_batch() produces the next version plus the
// GraphDelta describing what changed.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "walkforge/common.hpp"

namespace walkforge {

struct RawTx {
  std::string src;
  std::string dst;
  double value = 0.0;
  std::int64_t timestamp = 0;
  std::uint64_t count = 1;
  std::size_t line = 0;  // source line, 0 when not read from a file
};

struct TxEdge {
  NodeId src = 0;
  NodeId dst = 0;
  double weight = 0.0;
  std::int64_t timestamp = 0;
  std::uint64_t count = 1;

  friend bool operator==(const TxEdge&, const TxEdge&) = default;
};

struct NodeStats {
  double v_in = 0.0;
  double v_out = 0.0;
  std::uint64_t freq = 0;
  std::uint32_t d_in = 0;
  std::uint32_t d_out = 0;

  friend bool operator==(const NodeStats&, const NodeStats&) = default;
};

enum class StatKind { VIn, VOut, Freq, DIn, DOut };

inline std::string_view to_string(StatKind k) {
  switch (k) {
    case StatKind::VIn: return "V_in";
    case StatKind::VOut: return "V_out";
    case StatKind::Freq: return "F";
    case StatKind::DIn: return "D_in";
    case StatKind::DOut: return "D_out";
  }
  return "?";
}

inline StatKind parse_stat_kind(std::string_view s) {
  if (s == "V_in" || s == "vin") return StatKind::VIn;
  if (s == "V_out" || s == "vout") return StatKind::VOut;
  if (s == "F" || s == "freq") return StatKind::Freq;
  if (s == "D_in" || s == "din") return StatKind::DIn;
  if (s == "D_out" || s == "dout") return StatKind::DOut;
  throw ConfigError("unknown target statistic '" + std::string(s) + "'");
}

class AddressBook {
 public:
  NodeId intern(const std::string& address) {
    auto [it, inserted] = ids_.try_emplace(address, static_cast<NodeId>(names_.size()));
    if (inserted) names_.push_back(address);
    return it->second;
  }

  std::optional<NodeId> find(std::string_view address) const {
    auto it = ids_.find(std::string(address));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& name(NodeId id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }

  friend bool operator==(const AddressBook& a, const AddressBook& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> ids_;
};

struct GraphDelta;

class TransactionGraph {
 public:
  TransactionGraph() = default;

  std::size_t num_nodes() const noexcept { return out_adj_.size(); }
  std::size_t num_edges() const noexcept { return num_edges_; }
  std::uint64_t version() const noexcept { return version_; }
  // Latest raw transaction timestamp folded into this version.
  std::optional<std::int64_t> max_timestamp() const noexcept { return max_timestamp_; }

  bool contains(NodeId u) const noexcept { return u < num_nodes(); }

  std::span<const TxEdge> out_edges(NodeId u) const { return out_adj_.at(u); }
  std::span<const TxEdge> in_edges(NodeId u) const { return in_adj_.at(u); }
  std::size_t out_degree(NodeId u) const { return out_adj_.at(u).size(); }

  const NodeStats& stats(NodeId u) const {
    if (!contains(u)) throw LookupError("unknown node id " + std::to_string(u));
    return stats_[u];
  }

  const TxEdge* find_edge(NodeId u, NodeId v) const {
    if (!contains(u)) return nullptr;
    const auto& adj = out_adj_[u];
    auto it = std::lower_bound(adj.begin(), adj.end(), v,
                               [](const TxEdge& e, NodeId x) { return e.dst < x; });
    return (it != adj.end() && it->dst == v) ? &*it : nullptr;
  }

  const AddressBook& addresses() const noexcept { return book_; }
  const std::string& address(NodeId u) const { return book_.name(u); }
  NodeId id_of(std::string_view address) const {
    auto id = book_.find(address);
    if (!id) throw LookupError("unknown address '" + std::string(address) + "'");
    return *id;
  }

  template <typename F>
  void for_each_edge(F&& f) const {
    for (const auto& adj : out_adj_)
      for (const auto& e : adj) f(e);
  }

  friend bool operator==(const TransactionGraph&, const TransactionGraph&) = default;

 private:
  friend class GraphEditor;

  AddressBook book_;
  std::vector<std::vector<TxEdge>> out_adj_;  // sorted by dst
  std::vector<std::vector<TxEdge>> in_adj_;   // sorted by src
  std::vector<NodeStats> stats_;
  std::size_t num_edges_ = 0;
  std::uint64_t version_ = 0;
  std::optional<std::int64_t> max_timestamp_;
};

// Brute-force statistics from adjacency alone. A self-loop counts towards both
// degrees but its transactions are counted once in freq.
inline NodeStats recompute_stats(const TransactionGraph& g, NodeId u) {
  NodeStats s;
  for (const auto& e : g.out_edges(u)) {
    s.v_out += e.weight;
    s.freq += e.count;
    ++s.d_out;
  }
  for (const auto& e : g.in_edges(u)) {
    s.v_in += e.weight;
    if (e.src != u) s.freq += e.count;
    ++s.d_in;
  }
  return s;
}

inline double node_stat(const TransactionGraph& g, NodeId u, StatKind kind) {
  const auto& s = g.stats(u);
  switch (kind) {
    case StatKind::VIn: return s.v_in;
    case StatKind::VOut: return s.v_out;
    case StatKind::Freq: return static_cast<double>(s.freq);
    case StatKind::DIn: return s.d_in;
    case StatKind::DOut: return s.d_out;
  }
  return 0.0;
}

struct GraphDelta {
  std::uint64_t from_version = 0;
  std::uint64_t to_version = 0;
  std::vector<NodeId> new_nodes;            // V_n, ascending
  std::vector<std::string> new_addresses;   // parallel to new_nodes
  std::vector<NodeId> affected_nodes;       // V_a, ascending
  std::vector<TxEdge> new_edges;            // post-update state of every inserted or re-weighted edge
  std::optional<std::int64_t> max_timestamp;

  bool empty() const noexcept { return new_nodes.empty() && affected_nodes.empty() && new_edges.empty(); }
};

// Low-level mutation used by the builders below. Not part of the public
// surface: graphs are only ever produced by ingest/apply functions.
class GraphEditor {
 public:
  explicit GraphEditor(TransactionGraph g) : g_(std::move(g)) {}

  NodeId intern(const std::string& address) {
    NodeId id = g_.book_.intern(address);
    if (id >= g_.out_adj_.size()) {
      g_.out_adj_.resize(id + 1);
      g_.in_adj_.resize(id + 1);
      g_.stats_.resize(id + 1);
    }
    return id;
  }

  // Merge aggregated edge updates. With `replace`, incoming edges overwrite
  // existing ones (delta replay); otherwise weight and count accumulate and the
  // earliest timestamp is kept.
  void merge(std::vector<TxEdge> updates, bool replace, std::vector<NodeId>* touched_nodes = nullptr,
             std::vector<TxEdge>* changed_edges = nullptr) {
    if (updates.empty()) return;
    std::sort(updates.begin(), updates.end(), [](const TxEdge& a, const TxEdge& b) {
      return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
    });
    std::vector<NodeId> touched;
    // Outgoing side, one merge per source node.
    for (std::size_t i = 0; i < updates.size();) {
      std::size_t j = i;
      while (j < updates.size() && updates[j].src == updates[i].src) ++j;
      auto& adj = g_.out_adj_[updates[i].src];
      std::vector<TxEdge> merged;
      merged.reserve(adj.size() + (j - i));
      std::size_t a = 0;
      for (std::size_t k = i; k < j; ++k) {
        const TxEdge& up = updates[k];
        while (a < adj.size() && adj[a].dst < up.dst) merged.push_back(adj[a++]);
        if (a < adj.size() && adj[a].dst == up.dst) {
          TxEdge e = adj[a++];
          if (replace) {
            e = up;
          } else {
            e.weight += up.weight;
            e.count += up.count;
            e.timestamp = std::min(e.timestamp, up.timestamp);
          }
          merged.push_back(e);
        } else {
          merged.push_back(up);
          ++g_.num_edges_;
        }
        touched.push_back(up.src);
        touched.push_back(up.dst);
      }
      while (a < adj.size()) merged.push_back(adj[a++]);
      adj = std::move(merged);
      i = j;
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

    // Rebuild the incoming side of every touched destination from the
    // authoritative outgoing lists of the updated edges.
    std::sort(updates.begin(), updates.end(), [](const TxEdge& a, const TxEdge& b) {
      return std::tie(a.dst, a.src) < std::tie(b.dst, b.src);
    });
    for (std::size_t i = 0; i < updates.size();) {
      std::size_t j = i;
      while (j < updates.size() && updates[j].dst == updates[i].dst) ++j;
      auto& adj = g_.in_adj_[updates[i].dst];
      std::vector<TxEdge> merged;
      merged.reserve(adj.size() + (j - i));
      std::size_t a = 0;
      for (std::size_t k = i; k < j; ++k) {
        const NodeId src = updates[k].src;
        while (a < adj.size() && adj[a].src < src) merged.push_back(adj[a++]);
        if (a < adj.size() && adj[a].src == src) ++a;
        merged.push_back(*g_.find_edge(src, updates[k].dst));
      }
      while (a < adj.size()) merged.push_back(adj[a++]);
      adj = std::move(merged);
      i = j;
    }

    for (NodeId u : touched) g_.stats_[u] = recompute_stats(g_, u);

    if (changed_edges) {
      for (const auto& up : updates) changed_edges->push_back(*g_.find_edge(up.src, up.dst));
    }
    if (touched_nodes) *touched_nodes = std::move(touched);
  }

  void set_version(std::uint64_t v) { g_.version_ = v; }
  void observe_timestamp(std::int64_t ts) {
    if (!g_.max_timestamp_ || ts > *g_.max_timestamp_) g_.max_timestamp_ = ts;
  }
  void set_max_timestamp(std::optional<std::int64_t> ts) { g_.max_timestamp_ = ts; }

  TransactionGraph finish() && { return std::move(g_); }

 private:
  TransactionGraph g_;
};

struct IngestSummary {
  std::size_t rows = 0;
  std::size_t accepted = 0;
  std::vector<std::size_t> rejected_rows;  // index into the input (or source line when known)

  std::size_t rejected() const noexcept { return rejected_rows.size(); }
};

namespace detail {

inline bool valid_value(double v) { return std::isfinite(v) && v >= 0.0; }

// Shared body of ingest_edges / apply_batch. Rows with a negative or
// non-finite value are skipped and reported.
inline std::pair<TransactionGraph, GraphDelta> fold_rows(const TransactionGraph& base,
                                                         std::span<const RawTx> rows,
                                                         std::uint64_t new_version,
                                                         IngestSummary* summary) {
  const std::size_t old_n = base.num_nodes();
  GraphEditor ed(base);
  std::map<std::pair<NodeId, NodeId>, TxEdge> agg;
  IngestSummary local;
  local.rows = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RawTx& r = rows[i];
    if (!valid_value(r.value) || r.count == 0) {
      local.rejected_rows.push_back(r.line ? r.line : i);
      continue;
    }
    ++local.accepted;
    const NodeId s = ed.intern(r.src);
    const NodeId d = ed.intern(r.dst);
    ed.observe_timestamp(r.timestamp);
    auto [it, inserted] = agg.try_emplace({s, d}, TxEdge{s, d, r.value, r.timestamp, r.count});
    if (!inserted) {
      it->second.weight += r.value;
      it->second.count += r.count;
      it->second.timestamp = std::min(it->second.timestamp, r.timestamp);
    }
  }
  std::vector<TxEdge> updates;
  updates.reserve(agg.size());
  for (auto& kv : agg) updates.push_back(kv.second);

  GraphDelta delta;
  delta.from_version = base.version();
  delta.to_version = new_version;
  std::vector<NodeId> touched;
  ed.merge(std::move(updates), /*replace=*/false, &touched, &delta.new_edges);
  std::sort(delta.new_edges.begin(), delta.new_edges.end(), [](const TxEdge& a, const TxEdge& b) {
    return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
  });
  ed.set_version(new_version);
  TransactionGraph g = std::move(ed).finish();

  for (NodeId u = static_cast<NodeId>(old_n); u < g.num_nodes(); ++u) {
    delta.new_nodes.push_back(u);
    delta.new_addresses.push_back(g.address(u));
  }
  for (NodeId u : touched)
    if (u < old_n) delta.affected_nodes.push_back(u);
  delta.max_timestamp = g.max_timestamp();
  if (summary) *summary = std::move(local);
  return {std::move(g), std::move(delta)};
}

}  // namespace detail

// Version-0 graph from raw rows. Node ids follow first appearance in `rows`.
inline TransactionGraph ingest_edges(std::span<const RawTx> rows, IngestSummary* summary = nullptr) {
  return detail::fold_rows(TransactionGraph{}, rows, 0, summary).first;
}

// Next version of `g` with `rows` appended. Every row must be at least as
// recent as the newest transaction already in `g`.
inline std::pair<TransactionGraph, GraphDelta> apply_batch(const TransactionGraph& g,
                                                           std::span<const RawTx> rows,
                                                           IngestSummary* summary = nullptr) {
  if (auto latest = g.max_timestamp()) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].timestamp < *latest) {
        throw AppendOrderError("row " + std::to_string(rows[i].line ? rows[i].line : i) +
                               " has timestamp " + std::to_string(rows[i].timestamp) +
                               " older than graph head " + std::to_string(*latest));
      }
    }
  }
  return detail::fold_rows(g, rows, g.version() + 1, summary);
}

inline TransactionGraph apply_delta(const TransactionGraph& g, const GraphDelta& delta) {
  if (g.version() != delta.from_version)
    throw StateError("delta expects graph version " + std::to_string(delta.from_version) + ", got " +
                     std::to_string(g.version()));
  GraphEditor ed(g);
  for (std::size_t i = 0; i < delta.new_nodes.size(); ++i) {
    if (ed.intern(delta.new_addresses[i]) != delta.new_nodes[i])
      throw StateError("delta node id does not match interning order");
  }
  ed.merge(delta.new_edges, /*replace=*/true);
  ed.set_version(delta.to_version);
  ed.set_max_timestamp(delta.max_timestamp);
  return std::move(ed).finish();
}

// Delta between two stored versions of the same evolving graph.
inline GraphDelta diff_graphs(const TransactionGraph& prev, const TransactionGraph& next) {
  const std::size_t old_n = prev.num_nodes();
  if (next.num_nodes() < old_n) throw StateError("successor graph has fewer nodes than predecessor");
  for (NodeId u = 0; u < old_n; ++u) {
    if (prev.address(u) != next.address(u))
      throw StateError("node " + std::to_string(u) + " address differs between versions");
  }
  GraphDelta d;
  d.from_version = prev.version();
  d.to_version = next.version();
  d.max_timestamp = next.max_timestamp();
  std::vector<char> affected(old_n, 0);
  for (NodeId u = 0; u < next.num_nodes(); ++u) {
    for (const auto& e : next.out_edges(u)) {
      const TxEdge* old = prev.find_edge(e.src, e.dst);
      if (old && *old == e) continue;
      if (old && (old->weight > e.weight || old->count > e.count))
        throw StateError("edge weight decreased between versions");
      d.new_edges.push_back(e);
      if (e.src < old_n) affected[e.src] = 1;
      if (e.dst < old_n) affected[e.dst] = 1;
    }
  }
  for (NodeId u = 0; u < old_n; ++u) {
    for (const auto& e : prev.out_edges(u))
      if (!next.find_edge(e.src, e.dst)) throw StateError("edge removed between versions");
    if (affected[u]) d.affected_nodes.push_back(u);
  }
  for (NodeId u = static_cast<NodeId>(old_n); u < next.num_nodes(); ++u) {
    d.new_nodes.push_back(u);
    d.new_addresses.push_back(next.address(u));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Traversal.

// Epoch-stamped visit marks so repeated BFS calls do not pay O(|V|) each.
class BfsScratch {
 public:
  void reset(std::size_t n) {
    if (mark_.size() < n) mark_.resize(n, 0);
    if (++epoch_ == 0) {
      std::fill(mark_.begin(), mark_.end(), 0);
      epoch_ = 1;
    }
  }
  bool visit(NodeId u) {
    if (mark_[u] == epoch_) return false;
    mark_[u] = epoch_;
    return true;
  }
  bool seen(NodeId u) const { return mark_[u] == epoch_; }

  std::vector<NodeId> level;
  std::vector<NodeId> next;

 private:
  std::vector<std::uint32_t> mark_;
  std::uint32_t epoch_ = 0;
};

// Nodes at exact directed distance h from u, ascending. Stops early and
// returns nullopt once the number of visited nodes exceeds `visit_budget`.
inline std::optional<std::vector<NodeId>> bounded_frontier(const TransactionGraph& g, NodeId u, unsigned h,
                                                           BfsScratch& s,
                                                           std::size_t visit_budget = SIZE_MAX) {
  if (!g.contains(u)) throw LookupError("unknown node id " + std::to_string(u));
  if (h == 0) throw PreconditionError("hop count must be positive");
  s.reset(g.num_nodes());
  s.level.assign(1, u);
  s.visit(u);
  std::size_t visited = 1;
  for (unsigned depth = 0; depth < h && !s.level.empty(); ++depth) {
    s.next.clear();
    for (NodeId x : s.level) {
      for (const auto& e : g.out_edges(x)) {
        if (s.visit(e.dst)) {
          s.next.push_back(e.dst);
          if (++visited > visit_budget) return std::nullopt;
        }
      }
    }
    std::swap(s.level, s.next);
  }
  std::vector<NodeId> out(s.level.begin(), s.level.end());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<NodeId> h_hop_frontier(const TransactionGraph& g, NodeId u, unsigned h) {
  BfsScratch s;
  return *bounded_frontier(g, u, h, s);
}

// Directed hop distance from u to v if it is at most `cap`.
inline std::optional<unsigned> shortest_hop(const TransactionGraph& g, NodeId u, NodeId v, unsigned cap,
                                            BfsScratch& s) {
  if (!g.contains(u)) throw LookupError("unknown node id " + std::to_string(u));
  if (!g.contains(v)) throw LookupError("unknown node id " + std::to_string(v));
  if (u == v) return 0u;
  s.reset(g.num_nodes());
  s.level.assign(1, u);
  s.visit(u);
  for (unsigned depth = 1; depth <= cap && !s.level.empty(); ++depth) {
    s.next.clear();
    for (NodeId x : s.level) {
      for (const auto& e : g.out_edges(x)) {
        if (e.dst == v) return depth;
        if (s.visit(e.dst)) s.next.push_back(e.dst);
      }
    }
    std::swap(s.level, s.next);
  }
  return std::nullopt;
}

inline std::optional<unsigned> shortest_hop(const TransactionGraph& g, NodeId u, NodeId v, unsigned cap) {
  BfsScratch s;
  return shortest_hop(g, u, v, cap, s);
}

// ---------------------------------------------------------------------------
// Temporal segmentation.

// Stable sort by timestamp; ties keep input order.
inline std::vector<RawTx> sort_by_time(std::vector<RawTx> rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RawTx& a, const RawTx& b) { return a.timestamp < b.timestamp; });
  return rows;
}

// Cumulative row counts at fractions initial, initial+step, ..., 1.0.
inline std::vector<std::size_t> segment_bounds(std::size_t total, double initial_frac, double step_frac) {
  if (!(initial_frac > 0.0 && initial_frac < 1.0))
    throw ConfigError("initial fraction must lie in (0,1)");
  if (!(step_frac > 0.0 && step_frac <= 1.0)) throw ConfigError("step fraction must lie in (0,1]");
  std::vector<std::size_t> out;
  for (std::size_t k = 0;; ++k) {
    const double f = initial_frac + static_cast<double>(k) * step_frac;
    if (f >= 1.0 - 1e-9) break;
    out.push_back(std::min<std::size_t>(total, static_cast<std::size_t>(std::llround(f * total))));
  }
  out.push_back(total);
  return out;
}

// Streams each cumulative graph (with the delta from its predecessor; null for
// the first) to `sink` without keeping earlier versions alive.
inline void for_each_segment(
    std::span<const RawTx> rows, double initial_frac, double step_frac,
    const std::function<void(const TransactionGraph&, const GraphDelta*, std::size_t rows)>& sink) {
  std::vector<RawTx> sorted = sort_by_time(std::vector<RawTx>(rows.begin(), rows.end()));
  const auto bounds = segment_bounds(sorted.size(), initial_frac, step_frac);
  std::span<const RawTx> all(sorted);
  TransactionGraph g = ingest_edges(all.first(bounds.front()));
  sink(g, nullptr, bounds.front());
  for (std::size_t k = 1; k < bounds.size(); ++k) {
    auto [next, delta] = apply_batch(g, all.subspan(bounds[k - 1], bounds[k] - bounds[k - 1]));
    sink(next, &delta, bounds[k]);
    g = std::move(next);
  }
}

struct SegmentSeries {
  std::vector<std::size_t> row_counts;
  std::vector<TransactionGraph> graphs;
  std::vector<GraphDelta> deltas;  // deltas[k] takes graphs[k] to graphs[k+1]
};

inline SegmentSeries segment_schedule(std::span<const RawTx> rows, double initial_frac, double step_frac) {
  SegmentSeries out;
  for_each_segment(rows, initial_frac, step_frac,
                   [&](const TransactionGraph& g, const GraphDelta* d, std::size_t n) {
                     out.row_counts.push_back(n);
                     out.graphs.push_back(g);
                     if (d) out.deltas.push_back(*d);
                   });
  return out;
}

// ---------------------------------------------------------------------------
// Text formats.

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// "key=value" lookup in a whitespace-separated header line.
inline std::optional<std::string_view> header_field(std::string_view line, std::string_view key) {
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    std::size_t end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    std::string_view tok = line.substr(pos, end - pos);
    if (tok.size() > key.size() && tok.substr(0, key.size()) == key && tok[key.size()] == '=')
      return tok.substr(key.size() + 1);
    pos = end;
  }
  return std::nullopt;
}

}  // namespace detail

// CSV with header `src,dst,value,timestamp[,count]`. Malformed rows throw
// ParseError; negative values parse fine and are rejected later by ingest.
inline std::vector<RawTx> parse_edge_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) return {};
  ++lineno;
  const auto header = detail::split(detail::trim(line), ',');
  bool has_count = false;
  if (header.size() == 5 && detail::trim(header[4]) == "count") has_count = true;
  if (header.size() < 4 || header.size() > 5 || detail::trim(header[0]) != "src" ||
      detail::trim(header[1]) != "dst" || detail::trim(header[2]) != "value" ||
      detail::trim(header[3]) != "timestamp" || (header.size() == 5 && !has_count))
    throw ParseError("expected header src,dst,value,timestamp[,count]", lineno);

  std::vector<RawTx> rows;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = detail::trim(line);
    if (body.empty()) continue;
    const auto f = detail::split(body, ',');
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()),
                       lineno);
    RawTx r;
    r.src = std::string(detail::trim(f[0]));
    r.dst = std::string(detail::trim(f[1]));
    r.line = lineno;
    if (r.src.empty() || r.dst.empty()) throw ParseError("empty address", lineno);
    if (!detail::parse_number(detail::trim(f[2]), r.value) || std::isnan(r.value) || std::isinf(r.value))
      throw ParseError("value is not a decimal number", lineno);
    if (!detail::parse_number(detail::trim(f[3]), r.timestamp))
      throw ParseError("timestamp is not an integer", lineno);
    if (has_count) {
      if (!detail::parse_number(detail::trim(f[4]), r.count) || r.count == 0)
        throw ParseError("count must be a positive integer", lineno);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<RawTx> read_edge_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open edge file '" + path + "'");
  return parse_edge_csv(in);
}

// Graph dump:
//   WALKFORGE-GRAPH v1 nodes=<N> edges=<M>
//   version=<t> max_timestamp=<ts|none>
//   [nodes]
//   <id>\t<address>
//   [edges]
//   <src> <dst> <weight> <timestamp> <count>
inline void write_graph(std::ostream& out, const TransactionGraph& g) {
  out << "WALKFORGE-GRAPH v1 nodes=" << g.num_nodes() << " edges=" << g.num_edges() << '\n';
  out << "version=" << g.version() << " max_timestamp=";
  if (auto ts = g.max_timestamp())
    out << *ts;
  else
    out << "none";
  out << "\n[nodes]\n";
  for (NodeId u = 0; u < g.num_nodes(); ++u) out << u << '\t' << g.address(u) << '\n';
  out << "[edges]\n";
  g.for_each_edge([&](const TxEdge& e) {
    out << e.src << ' ' << e.dst << ' ' << detail::format_double(e.weight) << ' ' << e.timestamp << ' ' << e.count
        << '\n';
  });
}

inline TransactionGraph read_graph(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&](const char* what) -> std::string_view {
    if (!std::getline(in, line)) throw ParseError(std::string("unexpected end of file, expected ") + what, lineno + 1);
    ++lineno;
    return detail::trim(line);
  };

  std::string_view head = next_line("header");
  if (head.rfind("WALKFORGE-GRAPH v1 ", 0) != 0) throw ParseError("not a WALKFORGE-GRAPH v1 file", lineno);
  std::size_t n = 0, m = 0;
  auto nf = detail::header_field(head, "nodes");
  auto mf = detail::header_field(head, "edges");
  if (!nf || !mf || !detail::parse_number(*nf, n) || !detail::parse_number(*mf, m))
    throw ParseError("bad graph header", lineno);

  std::string_view meta = next_line("version line");
  std::uint64_t version = 0;
  auto vf = detail::header_field(meta, "version");
  auto tf = detail::header_field(meta, "max_timestamp");
  if (!vf || !tf || !detail::parse_number(*vf, version)) throw ParseError("bad version line", lineno);
  std::optional<std::int64_t> max_ts;
  if (*tf != "none") {
    std::int64_t ts = 0;
    if (!detail::parse_number(*tf, ts)) throw ParseError("bad max_timestamp", lineno);
    max_ts = ts;
  }

  if (next_line("[nodes]") != "[nodes]") throw ParseError("expected [nodes]", lineno);
  GraphEditor ed{TransactionGraph{}};
  for (std::size_t i = 0; i < n; ++i) {
    std::string row(next_line("node row"));
    auto tab = row.find('\t');
    NodeId id = 0;
    if (tab == std::string::npos || !detail::parse_number(std::string_view(row).substr(0, tab), id) || id != i)
      throw ParseError("bad node row", lineno);
    if (ed.intern(row.substr(tab + 1)) != id) throw ParseError("duplicate address", lineno);
  }
  if (next_line("[edges]") != "[edges]") throw ParseError("expected [edges]", lineno);
  std::vector<TxEdge> edges;
  edges.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto f = detail::split(next_line("edge row"), ' ');
    TxEdge e;
    if (f.size() != 5 || !detail::parse_number(f[0], e.src) || !detail::parse_number(f[1], e.dst) ||
        !detail::parse_number(f[2], e.weight) || !detail::parse_number(f[3], e.timestamp) ||
        !detail::parse_number(f[4], e.count) || e.src >= n || e.dst >= n || !detail::valid_value(e.weight) ||
        e.count == 0)
      throw ParseError("bad edge row", lineno);
    if (!edges.empty() && std::tie(edges.back().src, edges.back().dst) >= std::tie(e.src, e.dst))
      throw ParseError("edges not in canonical order", lineno);
    edges.push_back(e);
  }
  ed.merge(std::move(edges), /*replace=*/true);
  ed.set_version(version);
  ed.set_max_timestamp(max_ts);
  return std::move(ed).finish();
}

inline void save_graph(const std::string& path, const TransactionGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write graph file '" + path + "'");
  write_graph(out, g);
  if (!out) throw InputError("write failed for '" + path + "'");
}

inline TransactionGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open graph file '" + path + "'");
  return read_graph(in);
}

}  // namespace walkforge
