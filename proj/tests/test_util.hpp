#pragma once

#include <random>
#include <string>
#include <vector>

#include "walkforge/graph.hpp"
#include "walkforge/synth.hpp"

namespace testutil {

inline walkforge::RawTx tx(std::string s, std::string d, double value = 1.0, std::int64_t ts = 0) {
  return {std::move(s), std::move(d), value, ts, 1, 0};
}

inline std::string name(std::size_t i) { return "a" + std::to_string(i); }

// Random transaction rows over n addresses, timestamps non-decreasing.
inline std::vector<walkforge::RawTx> random_rows(std::size_t n, std::size_t m, unsigned seed, bool self_loops = false) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<std::size_t> node(0, n - 1);
  std::uniform_real_distribution<double> value(0.0, 10.0);
  std::vector<walkforge::RawTx> rows;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t a = node(rng), b = node(rng);
    if (a == b && !self_loops) b = (b + 1) % n;
    rows.push_back(tx(name(a), name(b), value(rng), static_cast<std::int64_t>(i / 3)));
  }
  return rows;
}

inline walkforge::TransactionGraph graph_of(const std::vector<walkforge::RawTx>& rows) {
  return walkforge::ingest_edges(rows);
}

struct SbmGraph {
  walkforge::TransactionGraph graph;
  std::vector<int> block;                  // by node id
  std::vector<walkforge::NodeId> positives;  // block 0
};

// Two equal blocks; block 0 is the positive class.
inline SbmGraph sbm_graph(std::size_t block_size, double p_in, double p_out, std::uint64_t seed) {
  auto s = walkforge::synth::stochastic_block_model({block_size, block_size}, p_in, p_out, seed);
  SbmGraph out{walkforge::ingest_edges(s.rows), {}, {}};
  out.block.assign(out.graph.num_nodes(), -1);
  for (std::size_t i = 0; i < s.block.size(); ++i) {
    const auto id = out.graph.addresses().find(walkforge::synth::node_name(i));
    if (!id) continue;
    out.block[*id] = s.block[i];
    if (s.block[i] == 0) out.positives.push_back(*id);
  }
  return out;
}

}  // namespace testutil
