#pragma once

// Synthetic transaction streams used by tests, the acceptance suite and the
// CLI's `synth` command.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "walkforge/common.hpp"
#include "walkforge/graph.hpp"

namespace walkforge::synth {

inline std::string node_name(std::size_t i) { return "n" + std::to_string(i); }

struct GrowthParams {
  std::size_t nodes = 1000;
  double tx_per_node = 4.0;  // total transactions = nodes * tx_per_node
  // Probability that an existing-node transaction reuses the sender's most
  // recent counterparty instead of a preferential draw.
  double repeat_prob = 0.5;
  // Probability that a sender (and, independently, a fresh receiver) is drawn
  // uniformly from the `recent_window` most recently joined addresses.
  double recency = 0.9;
  std::size_t recent_window = 50;
  // Receivers are drawn proportionally to in-degree + attractiveness.
  double attractiveness = 1.0;
  std::uint64_t seed = 1;
};

// Growing preferential-attachment transaction stream. Addresses join at a
// constant rate over the whole time span; each joins by receiving from an
// existing address. Receivers of other transfers are drawn proportionally to
// received transfers + attractiveness, senders uniformly (optionally biased
// towards recent joiners). Timestamps increase by one per row.
inline std::vector<RawTx> preferential_attachment(const GrowthParams& p) {
  Rng rng = substream(p.seed, 0x7061ULL);
  const std::size_t seed_nodes = 5;
  const std::size_t total_tx = static_cast<std::size_t>(static_cast<double>(p.nodes) * p.tx_per_node);
  std::vector<RawTx> rows;
  rows.reserve(total_tx);
  std::vector<std::size_t> receivers;  // one entry per received transfer
  std::vector<std::size_t> last_partner;
  std::size_t n = 0;
  std::int64_t ts = 0;
  auto add_node = [&] {
    last_partner.push_back(SIZE_MAX);
    return n++;
  };
  auto emit = [&](std::size_t s, std::size_t d) {
    Rng vr = substream(p.seed, 0x76616cULL, rows.size());
    const double value = 0.01 + 10.0 * uniform01(vr) * uniform01(vr);
    rows.push_back({node_name(s), node_name(d), value, ts++, 1, 0});
    receivers.push_back(d);
    last_partner[s] = d;
  };
  for (std::size_t i = 0; i < seed_nodes; ++i) add_node();
  for (std::size_t i = 0; i < seed_nodes; ++i) emit(i, (i + 1) % seed_nodes);

  const std::size_t remaining_nodes = p.nodes > seed_nodes ? p.nodes - seed_nodes : 0;
  const std::size_t remaining_tx = total_tx > rows.size() ? total_tx - rows.size() : 0;
  std::size_t joined = 0;
  for (std::size_t t = 0; t < remaining_tx; ++t) {
    // Joins are spread evenly: the k-th join happens at tx floor(k * remaining_tx / remaining_nodes).
    const bool join = joined < remaining_nodes &&
                      t >= static_cast<std::size_t>(static_cast<double>(joined) * remaining_tx / remaining_nodes);
    if (join) {
      const std::size_t s = uniform_index(rng, n);
      const std::size_t d = add_node();
      ++joined;
      emit(s, d);
      continue;
    }
    std::size_t s;
    if (n > p.recent_window && uniform01(rng) < p.recency)
      s = n - 1 - uniform_index(rng, p.recent_window);
    else
      s = uniform_index(rng, n);
    std::size_t d;
    if (last_partner[s] != SIZE_MAX && uniform01(rng) < p.repeat_prob) {
      d = last_partner[s];
    } else if (n > p.recent_window && uniform01(rng) < p.recency) {
      d = n - 1 - uniform_index(rng, p.recent_window);
    } else {
      const double base = p.attractiveness * static_cast<double>(n);
      if (uniform01(rng) * (base + static_cast<double>(receivers.size())) < base)
        d = uniform_index(rng, n);
      else
        d = receivers[uniform_index(rng, receivers.size())];
    }
    emit(s, d);
  }
  return rows;
}

struct SbmSample {
  std::vector<RawTx> rows;
  std::vector<int> block;  // block of node_name(i)
};

// Directed stochastic block model: each ordered pair (u, v), u != v, carries
// an edge with probability p_in inside a block and p_out across blocks.
// Rows list every node as a sender first so node_name(i) interns to id i.
inline SbmSample stochastic_block_model(const std::vector<std::size_t>& block_sizes, double p_in, double p_out,
                                        std::uint64_t seed) {
  SbmSample s;
  for (std::size_t b = 0; b < block_sizes.size(); ++b)
    for (std::size_t i = 0; i < block_sizes[b]; ++i) s.block.push_back(static_cast<int>(b));
  const std::size_t n = s.block.size();
  Rng rng = substream(seed, 0x73626dULL);
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      const double p = s.block[u] == s.block[v] ? p_in : p_out;
      if (uniform01(rng) < p) out[u].push_back(v);
    }
  // Guarantee every node appears: isolated nodes get one in-block edge.
  for (std::size_t u = 0; u < n; ++u) {
    if (!out[u].empty()) continue;
    for (std::size_t v = 0; v < n; ++v)
      if (v != u && s.block[v] == s.block[u]) {
        out[u].push_back(v);
        break;
      }
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v : out[u]) s.rows.push_back({node_name(u), node_name(v), 1.0 + uniform01(rng), 0, 1, 0});
  }
  return s;
}

// Reciprocal core (undirected random graph, both directions present) plus
// receive-only sinks, each fed by `feeders` distinct random core nodes.
// Core nodes are named first, so ids [0, core) are core and the rest sinks.
inline std::vector<RawTx> core_with_sinks(std::size_t nodes, double sink_fraction, double core_degree,
                                          std::uint64_t seed, std::size_t feeders = 1) {
  const auto sinks = static_cast<std::size_t>(std::llround(sink_fraction * static_cast<double>(nodes)));
  const std::size_t core = nodes - sinks;
  Rng rng = substream(seed, 0x73696e6bULL);
  std::vector<RawTx> rows;
  std::int64_t ts = 0;
  auto tx = [&](std::size_t a, std::size_t b) { rows.push_back({node_name(a), node_name(b), 1.0, ts++, 1, 0}); };
  // Ring keeps the core connected and fixes interning order.
  for (std::size_t i = 0; i < core; ++i) {
    tx(i, (i + 1) % core);
    tx((i + 1) % core, i);
  }
  const double extra = std::max(0.0, core_degree - 2.0) / 2.0;
  const auto extra_edges = static_cast<std::size_t>(extra * static_cast<double>(core));
  for (std::size_t k = 0; k < extra_edges; ++k) {
    const std::size_t a = uniform_index(rng, core);
    const std::size_t b = uniform_index(rng, core);
    if (a == b) continue;
    tx(a, b);
    tx(b, a);
  }
  for (std::size_t i = 0; i < sinks; ++i) {
    std::vector<std::size_t> from;
    while (from.size() < std::min(feeders, core)) {
      const std::size_t a = uniform_index(rng, core);
      if (std::find(from.begin(), from.end(), a) == from.end()) from.push_back(a);
    }
    for (std::size_t a : from) tx(a, core + i);
  }
  return rows;
}

// Random digraph on n nodes: a directed Hamiltonian cycle (strong
// connectivity) plus each remaining ordered pair with probability p.
inline std::vector<RawTx> strongly_connected(std::size_t n, double p, std::uint64_t seed) {
  Rng rng = substream(seed, 0x7363ULL);
  std::vector<RawTx> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back({node_name(i), node_name((i + 1) % n), 1.0 + i, 0, 1, 0});
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v || v == (u + 1) % n) continue;
      if (uniform01(rng) < p) rows.push_back({node_name(u), node_name(v), 1.0 + uniform01(rng) * 5.0, 0, 1, 0});
    }
  return rows;
}

// Cycle with both directions, edge i <-> i+1 carrying weight `weights[i]`.
inline std::vector<RawTx> bidirected_cycle(const std::vector<double>& weights) {
  const std::size_t n = weights.size();
  std::vector<RawTx> rows;
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back({node_name(i), node_name((i + 1) % n), weights[i], 0, 1, 0});
    rows.push_back({node_name((i + 1) % n), node_name(i), weights[i], 0, 1, 0});
  }
  return rows;
}

}  // namespace walkforge::synth
