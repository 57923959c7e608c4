#pragma once

// Walk-corpus maintenance across graph versions.
//
// unbiased_update: every walk that visits an affected node is cut right after
// the first affected node and resumed from there on the new graph; new nodes
// get fresh walks. naive_update only adds walks for new nodes. from_scratch
// regenerates everything.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "walkforge/common.hpp"
#include "walkforge/graph.hpp"
#include "walkforge/walk.hpp"

namespace walkforge {

class ModeMismatchError : public StateError {
 public:
  using StateError::StateError;
};

struct UpdatePlan {
  std::vector<std::uint32_t> affected_walks;  // W_a, ascending
  std::vector<NodeId> new_nodes;              // V_n
  std::vector<NodeId> affected_nodes;         // V_a

  bool empty() const noexcept { return affected_walks.empty() && new_nodes.empty() && affected_nodes.empty(); }
};

enum class UpdateStrategy { Unbiased, Naive, Scratch };

inline std::string_view to_string(UpdateStrategy s) {
  switch (s) {
    case UpdateStrategy::Unbiased: return "unbiased";
    case UpdateStrategy::Naive: return "naive";
    case UpdateStrategy::Scratch: return "scratch";
  }
  return "?";
}

inline UpdateStrategy parse_update_strategy(std::string_view s) {
  if (s == "unbiased") return UpdateStrategy::Unbiased;
  if (s == "naive") return UpdateStrategy::Naive;
  if (s == "scratch") return UpdateStrategy::Scratch;
  throw ConfigError("unknown update strategy '" + std::string(s) + "'");
}

struct UpdateReport {
  UpdateStrategy strategy = UpdateStrategy::Unbiased;
  std::uint64_t from_version = 0;
  std::uint64_t to_version = 0;
  std::size_t new_nodes = 0;
  std::size_t affected_nodes = 0;
  std::size_t affected_walks = 0;
  std::size_t walks_before = 0;
  std::size_t walks_after = 0;
  std::uint64_t draws = 0;
  std::optional<double> wall_time_ms;
};

inline void check_versions(const WalkCorpus& corpus, const GraphDelta& delta) {
  if (corpus.graph_version != delta.from_version)
    throw StateError("corpus was built on graph version " + std::to_string(corpus.graph_version) +
                     " but the update starts from version " + std::to_string(delta.from_version));
}

// W_a from index lookups only.
inline UpdatePlan plan_update(const WalkCorpus& corpus, const GraphDelta& delta) {
  check_versions(corpus, delta);
  UpdatePlan p;
  p.new_nodes = delta.new_nodes;
  p.affected_nodes = delta.affected_nodes;
  for (NodeId u : delta.affected_nodes) {
    auto ws = corpus.index.walks_containing(u);
    p.affected_walks.insert(p.affected_walks.end(), ws.begin(), ws.end());
  }
  std::sort(p.affected_walks.begin(), p.affected_walks.end());
  p.affected_walks.erase(std::unique(p.affected_walks.begin(), p.affected_walks.end()), p.affected_walks.end());
  return p;
}

// Prefix of `w` up to and including its first node in `affected` (ascending).
inline Walk trim_walk(const Walk& w, std::span<const NodeId> affected) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (std::binary_search(affected.begin(), affected.end(), w[i])) return Walk(w.begin(), w.begin() + i + 1);
  }
  throw PreconditionError("walk contains no affected node");
}

inline bool same_sampler(const WalkCorpus& c, const MHConfig& cfg, WalkMode mode) {
  if (c.mode != mode) return false;
  const auto& a = c.config;
  if (a.num_walks != cfg.num_walks || a.walk_length != cfg.walk_length) return false;
  if (mode == WalkMode::Uniform) return true;
  return a.hops == cfg.hops && a.alpha_min == cfg.alpha_min && a.target == cfg.target &&
         a.proposal == cfg.proposal && a.lambda == cfg.lambda && a.nominal_return == cfg.nominal_return &&
         a.p_smoothing == cfg.p_smoothing && a.effective_frontier_cap() == cfg.effective_frontier_cap();
}

inline void check_sampler(const WalkCorpus& c, const MHConfig& cfg, WalkMode mode) {
  if (!same_sampler(c, cfg, mode))
    throw ModeMismatchError("corpus was generated with a different walk mode or sampler configuration");
}

namespace detail {

// Substream tag for resumed walks; keeps them disjoint from per-origin streams.
inline constexpr std::uint64_t kResumeStream = 0x726573756d65ULL;

inline void append_new_node_walks(WalkCorpus& c, const TransactionGraph& g, std::span<const NodeId> nodes,
                                  const MHConfig& cfg, WalkMode mode, std::uint64_t& draws) {
  auto run = [&](auto& sampler) {
    for (NodeId v : nodes) {
      for (std::uint32_t i = 0; i < cfg.num_walks; ++i) {
        Rng rng = substream(cfg.seed, v, i);
        Walk w{v};
        sampler.extend(w, cfg.walk_length - 1, rng);
        const auto id = static_cast<std::uint32_t>(c.walks.size());
        c.index.add(id, w);
        c.walks.push_back(std::move(w));
      }
    }
    draws += sampler.draws();
  };
  if (mode == WalkMode::Uniform) {
    UniformSampler s(g);
    run(s);
  } else {
    MHSampler s(g, cfg);
    run(s);
  }
}

inline void check_next_graph(const TransactionGraph& g_next, const GraphDelta& delta) {
  if (g_next.version() != delta.to_version)
    throw StateError("graph version " + std::to_string(g_next.version()) + " does not match delta target " +
                     std::to_string(delta.to_version));
}

}  // namespace detail

inline WalkCorpus unbiased_update(WalkCorpus corpus, const TransactionGraph& g_next, const GraphDelta& delta,
                                  const MHConfig& cfg, WalkMode mode, UpdateReport* report = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  check_sampler(corpus, cfg, mode);
  detail::check_next_graph(g_next, delta);
  const UpdatePlan plan = plan_update(corpus, delta);
  const std::size_t before = corpus.walks.size();
  corpus.index.resize(g_next.num_nodes());

  std::uint64_t draws = 0;
  auto resample = [&](auto& sampler) {
    for (std::uint32_t wid : plan.affected_walks) {
      Walk& w = corpus.walks[wid];
      Walk trimmed = trim_walk(w, plan.affected_nodes);
      Rng rng = substream(cfg.seed ^ detail::kResumeStream, delta.to_version, wid);
      Walk resumed = resume_with(sampler, std::move(trimmed), cfg.walk_length, rng);
      corpus.index.remove(wid, w);
      corpus.index.add(wid, resumed);
      w = std::move(resumed);
    }
    draws += sampler.draws();
  };
  if (mode == WalkMode::Uniform) {
    UniformSampler s(g_next);
    resample(s);
  } else {
    MHSampler s(g_next, cfg);
    resample(s);
  }
  detail::append_new_node_walks(corpus, g_next, plan.new_nodes, cfg, mode, draws);
  corpus.graph_version = delta.to_version;
  corpus.draws = draws;

  if (report) {
    *report = UpdateReport{UpdateStrategy::Unbiased, delta.from_version, delta.to_version, plan.new_nodes.size(),
                           plan.affected_nodes.size(), plan.affected_walks.size(), before, corpus.walks.size(),
                           draws, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                                      .count()};
  }
  return corpus;
}

inline WalkCorpus naive_update(WalkCorpus corpus, const TransactionGraph& g_next, const GraphDelta& delta,
                               const MHConfig& cfg, WalkMode mode, UpdateReport* report = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  check_sampler(corpus, cfg, mode);
  check_versions(corpus, delta);
  detail::check_next_graph(g_next, delta);
  const std::size_t before = corpus.walks.size();
  corpus.index.resize(g_next.num_nodes());
  std::uint64_t draws = 0;
  detail::append_new_node_walks(corpus, g_next, delta.new_nodes, cfg, mode, draws);
  corpus.graph_version = delta.to_version;
  corpus.draws = draws;
  if (report) {
    *report = UpdateReport{UpdateStrategy::Naive, delta.from_version, delta.to_version, delta.new_nodes.size(),
                           delta.affected_nodes.size(), 0, before, corpus.walks.size(), draws,
                           std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                               .count()};
  }
  return corpus;
}

inline WalkCorpus from_scratch(const TransactionGraph& g, const MHConfig& cfg, WalkMode mode, unsigned threads = 1) {
  return generate_corpus(g, cfg, mode, threads);
}

// Strategy dispatch used by the CLI.
inline WalkCorpus update_corpus(UpdateStrategy strategy, WalkCorpus corpus, const TransactionGraph& g_next,
                                const GraphDelta& delta, const MHConfig& cfg, WalkMode mode,
                                UpdateReport* report = nullptr, unsigned threads = 1) {
  switch (strategy) {
    case UpdateStrategy::Unbiased: return unbiased_update(std::move(corpus), g_next, delta, cfg, mode, report);
    case UpdateStrategy::Naive: return naive_update(std::move(corpus), g_next, delta, cfg, mode, report);
    case UpdateStrategy::Scratch: break;
  }
  const auto t0 = std::chrono::steady_clock::now();
  check_sampler(corpus, cfg, mode);
  check_versions(corpus, delta);
  detail::check_next_graph(g_next, delta);
  WalkCorpus fresh = from_scratch(g_next, cfg, mode, threads);
  if (report) {
    *report = UpdateReport{UpdateStrategy::Scratch, delta.from_version, delta.to_version, delta.new_nodes.size(),
                           delta.affected_nodes.size(), corpus.walks.size(), corpus.walks.size(),
                           fresh.walks.size(), fresh.draws,
                           std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                               .count()};
  }
  return fresh;
}

}  // namespace walkforge
