#pragma once

// Reference computations shared by unit and acceptance tests. Everything here
// is recomputed from the edge list with textbook algorithms and none of it
// calls into the samplers.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "walkforge/graph.hpp"
#include "walkforge/walk.hpp"

namespace oracle {

using walkforge::NodeId;
using Matrix = std::vector<std::vector<double>>;

constexpr int kUnreachable = 1 << 20;

// Floyd-Warshall hop distances.
inline std::vector<std::vector<int>> all_pairs_hops(const walkforge::TransactionGraph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<int>> d(n, std::vector<int>(n, kUnreachable));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  g.for_each_edge([&](const walkforge::TxEdge& e) { d[e.src][e.dst] = std::min(d[e.src][e.dst], 1); });
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

// Target statistic summed directly from the edge list.
inline double raw_stat(const walkforge::TransactionGraph& g, NodeId u, walkforge::StatKind k) {
  double v = 0.0;
  g.for_each_edge([&](const walkforge::TxEdge& e) {
    switch (k) {
      case walkforge::StatKind::VIn: v += e.dst == u ? e.weight : 0.0; break;
      case walkforge::StatKind::VOut: v += e.src == u ? e.weight : 0.0; break;
      case walkforge::StatKind::Freq: v += (e.src == u || e.dst == u) ? static_cast<double>(e.count) : 0.0; break;
      case walkforge::StatKind::DIn: v += e.dst == u ? 1.0 : 0.0; break;
      case walkforge::StatKind::DOut: v += e.src == u ? 1.0 : 0.0; break;
    }
  });
  return v;
}

inline double proposal(const walkforge::MHConfig& cfg, int dist) {
  return cfg.proposal == walkforge::ProposalKind::Reciprocal ? 1.0 / dist : std::exp(-cfg.lambda * dist);
}

inline double acceptance(const walkforge::TransactionGraph& g, const std::vector<std::vector<int>>& d, NodeId u,
                         NodeId v, const walkforge::MHConfig& cfg) {
  const double pu = raw_stat(g, u, cfg.target) + cfg.p_smoothing;
  const double pv = raw_stat(g, v, cfg.target) + cfg.p_smoothing;
  const int back = d[v][u];
  const double q_back = back <= static_cast<int>(cfg.hops) ? proposal(cfg, back) : cfg.nominal_return;
  return std::min(1.0, pv * q_back / (pu * proposal(cfg, static_cast<int>(cfg.hops))));
}

// Exact one-step matrix of the MH chain with acceptance r < alpha + alpha_min;
// rows of nodes with an empty frontier are left all zero.
inline Matrix mh_matrix(const walkforge::TransactionGraph& g, const walkforge::MHConfig& cfg) {
  const auto d = all_pairs_hops(g);
  const std::size_t n = g.num_nodes();
  Matrix P(n, std::vector<double>(n, 0.0));
  for (NodeId u = 0; u < n; ++u) {
    std::vector<NodeId> frontier;
    for (NodeId v = 0; v < n; ++v)
      if (d[u][v] == static_cast<int>(cfg.hops)) frontier.push_back(v);
    if (frontier.empty()) continue;
    double stay = 1.0;
    for (NodeId v : frontier) {
      const double a = std::min(1.0, acceptance(g, d, u, v, cfg) + cfg.alpha_min);
      P[u][v] = a / static_cast<double>(frontier.size());
      stay -= P[u][v];
    }
    P[u][u] = stay;
  }
  return P;
}

// Two-sample chi-squared test on category counts from equal-size samples.
// Categories whose pooled count is below `min_pooled` are merged into one bin.
template <typename Key>
double chi2_two_sample_p(const std::map<Key, std::size_t>& a, const std::map<Key, std::size_t>& b,
                         std::size_t min_pooled = 10) {
  std::map<Key, std::pair<double, double>> cells;
  for (const auto& [k, c] : a) cells[k].first += static_cast<double>(c);
  for (const auto& [k, c] : b) cells[k].second += static_cast<double>(c);
  std::vector<std::pair<double, double>> bins;
  std::pair<double, double> rare{0.0, 0.0};
  for (const auto& [k, c] : cells) {
    if (c.first + c.second < static_cast<double>(min_pooled)) {
      rare.first += c.first;
      rare.second += c.second;
    } else {
      bins.push_back(c);
    }
  }
  if (rare.first + rare.second > 0) bins.push_back(rare);
  if (bins.size() < 2) return 1.0;
  double na = 0, nb = 0;
  for (const auto& [x, y] : bins) {
    na += x;
    nb += y;
  }
  const double ka = std::sqrt(nb / na), kb = std::sqrt(na / nb);
  double stat = 0.0;
  for (const auto& [x, y] : bins) {
    if (x + y <= 0) continue;
    stat += (ka * x - kb * y) * (ka * x - kb * y) / (x + y);
  }
  boost::math::chi_squared dist(static_cast<double>(bins.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace oracle
