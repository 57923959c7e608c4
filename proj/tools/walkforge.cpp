// walkforge command-line front end.
//
// Exit codes: 0 success, 1 internal error, 2 input/config error,
// 3 state or mode mismatch.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "CLI11.hpp"
#include "walkforge/walkforge.hpp"

namespace fs = std::filesystem;
using namespace walkforge;

namespace {

// Holds an advisory lock on <dir>/.walkforge.lock for the lifetime of the command.
class WorkdirLock {
 public:
  explicit WorkdirLock(const fs::path& dir) {
    const fs::path p = (dir.empty() ? fs::path(".") : dir) / ".walkforge.lock";
    fd_ = ::open(p.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw InputError("cannot open lock file '" + p.string() + "'");
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw StateError("another walkforge process holds '" + p.string() + "'");
    }
  }
  ~WorkdirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  int fd_ = -1;
};

// Writes through a sibling temp file so a failed command leaves no partial output.
void write_atomically(const std::string& path, const std::function<void(std::ostream&)>& body) {
  const std::string tmp = path + ".tmp";
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw InputError("cannot write '" + path + "'");
      body(out);
      out.flush();
      if (!out) throw InputError("write failed for '" + path + "'");
    }
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

fs::path parent_of(const std::string& path) { return fs::path(path).parent_path(); }

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  write_atomically(out_path, [&](std::ostream& o) { o << text; });
}

struct Global {
  std::uint64_t seed = 42;
  unsigned threads = 1;
  bool strict = false;

  unsigned effective_threads() const { return strict ? 1 : std::max(1u, threads); }
};

struct WalkFlags {
  std::string mode = "uniform";
  MHConfig cfg;
  std::string p = "D_in";
  std::string q = "S";
  std::vector<CLI::Option*> opts;

  void add(CLI::App* app) {
    app->set_help_flag("--help", "Print this help message and exit");
    opts.push_back(app->add_option("--mode", mode, "walk mode: uniform or mh")
                       ->check(CLI::IsMember({"uniform", "mh"}))
                       ->capture_default_str());
    opts.push_back(app->add_option("--n", cfg.num_walks, "walks per node")->capture_default_str());
    opts.push_back(app->add_option("--l", cfg.walk_length, "walk length in nodes")->capture_default_str());
    opts.push_back(app->add_option("--h", cfg.hops, "leap distance (mh)")->capture_default_str());
    opts.push_back(app->add_option("--alpha-min", cfg.alpha_min, "minimum acceptance (mh)")->capture_default_str());
    opts.push_back(app->add_option("--p", p, "target: V_in, V_out, F, D_in or D_out (mh)")->capture_default_str());
    opts.push_back(app->add_option("--q", q, "proposal: S or E (mh)")->capture_default_str());
    opts.push_back(app->add_option("--lambda", cfg.lambda, "decay of the E proposal")->capture_default_str());
    opts.push_back(
        app->add_option("--nominal-return", cfg.nominal_return, "return proposal when unreachable")
            ->capture_default_str());
    opts.push_back(app->add_option("--epsilon", cfg.p_smoothing, "target smoothing")->capture_default_str());
    opts.push_back(
        app->add_option("--frontier-cap", cfg.frontier_cap, "frontier size before sampling by expansion (0: 64*h)")
            ->capture_default_str());
  }


  WalkMode resolve(std::uint64_t seed) {
    cfg.target = parse_stat_kind(p);
    cfg.proposal = parse_proposal(q);
    cfg.seed = seed;
    cfg.validate();
    return parse_walk_mode(mode);
  }

  // Options not given on the command line take the corpus header's values.
  void inherit(const WalkCorpus& c) {
    auto given = [](CLI::Option* o) { return o->count() > 0; };
    if (!given(opts[0])) mode = std::string(to_string(c.mode));
    if (!given(opts[1])) cfg.num_walks = c.config.num_walks;
    if (!given(opts[2])) cfg.walk_length = c.config.walk_length;
    if (c.mode != WalkMode::MH) return;
    if (!given(opts[3])) cfg.hops = c.config.hops;
    if (!given(opts[4])) cfg.alpha_min = c.config.alpha_min;
    if (!given(opts[5])) p = std::string(to_string(c.config.target));
    if (!given(opts[6])) q = std::string(to_string(c.config.proposal));
    if (!given(opts[7])) cfg.lambda = c.config.lambda;
    if (!given(opts[8])) cfg.nominal_return = c.config.nominal_return;
    if (!given(opts[9])) cfg.p_smoothing = c.config.p_smoothing;
    if (!given(opts[10])) cfg.frontier_cap = c.config.frontier_cap;
  }
};

void write_rows_csv(std::ostream& out, std::span<const RawTx> rows) {
  out << "src,dst,value,timestamp,count\n";
  for (const auto& r : rows)
    out << r.src << ',' << r.dst << ',' << detail::format_double(r.value) << ',' << r.timestamp << ',' << r.count
        << '\n';
}

std::string eval_output(const EvalReport& rep, const std::string& format) {
  if (format == "table") return render_table(rep);
  return to_json(rep).dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental random-walk embeddings for transaction graphs"};
  app.set_config("--config", "", "TOML config file; a [section] holds options of the subcommand it names");
  app.require_subcommand(1);
  Global global;
  app.add_option("--seed", global.seed, "random seed")->capture_default_str();
  app.add_option("--threads", global.threads, "worker threads for walk generation")->capture_default_str();
  app.add_flag("--strict-deterministic", global.strict,
               "serial execution and no wall-clock fields, for byte-identical outputs");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse an edge CSV into a graph dump");
  std::string ingest_edges_path, ingest_out;
  ingest->add_option("--edges", ingest_edges_path, "edge CSV (src,dst,value,timestamp[,count])")->required();
  ingest->add_option("--out", ingest_out, "graph dump to write")->required();

  // segment
  auto* segment = app.add_subcommand("segment", "cumulative temporal segments of an edge CSV");
  std::string seg_edges, seg_dir;
  double seg_initial = 0.5, seg_step = 0.05;
  segment->add_option("--edges", seg_edges, "edge CSV")->required();
  segment->add_option("--out-dir", seg_dir, "directory for segment graphs and manifest.txt")->required();
  segment->add_option("--initial", seg_initial, "fraction of rows in the first segment")->capture_default_str();
  segment->add_option("--step", seg_step, "fraction of rows added per segment")->capture_default_str();

  // walk
  auto* walk = app.add_subcommand("walk", "generate a walk corpus");
  std::string walk_graph, walk_out;
  WalkFlags walk_flags;
  walk->add_option("--graph", walk_graph, "graph dump")->required();
  walk->add_option("--out", walk_out, "corpus file to write")->required();
  walk_flags.add(walk);

  // update
  auto* update = app.add_subcommand("update", "carry a corpus over to the next graph version");
  std::string up_corpus, up_prev, up_next, up_out, up_report, up_strategy = "unbiased";
  WalkFlags up_flags;
  update->add_option("--corpus", up_corpus, "corpus built on --prev")->required();
  update->add_option("--prev", up_prev, "graph the corpus was built on")->required();
  update->add_option("--next", up_next, "successor graph")->required();
  update->add_option("--out", up_out, "updated corpus to write")->required();
  update->add_option("--strategy", up_strategy, "unbiased, naive or scratch")
      ->check(CLI::IsMember({"unbiased", "naive", "scratch"}))
      ->capture_default_str();
  update->add_option("--report", up_report, "also write the JSON report here");
  up_flags.add(update);

  // train
  auto* trainc = app.add_subcommand("train", "train skip-gram embeddings on a corpus");
  std::string tr_corpus, tr_out, tr_warm, tr_graph;
  SkipGramConfig sg;
  trainc->add_option("--corpus", tr_corpus, "walk corpus")->required();
  trainc->add_option("--out", tr_out, "embedding file to write")->required();
  trainc->add_option("--warm", tr_warm, "previous embedding file to warm-start from");
  trainc->add_option("--graph", tr_graph, "graph dump; rows are labelled with its addresses");
  trainc->add_option("--dim", sg.dim, "embedding dimension")->capture_default_str();
  trainc->add_option("--window", sg.window, "context window")->capture_default_str();
  trainc->add_option("--lr", sg.learning_rate, "initial learning rate")->capture_default_str();
  trainc->add_option("--epochs", sg.epochs, "passes over the corpus")->capture_default_str();
  trainc->add_option("--negatives", sg.negatives, "negative samples (0: full softmax)")->capture_default_str();
  trainc->add_option("--min-count", sg.min_count, "minimum occurrences for training a row")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluation protocols");
  eval->require_subcommand(1);
  std::string ev_format = "json", ev_out;
  auto* mae = eval->add_subcommand("mae", "transition-probability MAE of a uniform corpus");
  std::string mae_corpus, mae_graph;
  mae->add_option("--corpus", mae_corpus, "uniform walk corpus")->required();
  mae->add_option("--graph", mae_graph, "graph the corpus was built on")->required();
  auto* classify = eval->add_subcommand("classify", "balanced logistic-regression classification");
  std::string cl_emb, cl_labels;
  std::size_t cl_repeats = 10;
  double cl_split = 0.8;
  classify->add_option("--embeddings", cl_emb, "embedding file")->required();
  classify->add_option("--labels", cl_labels, "labels CSV address,label")->required();
  classify->add_option("--repeats", cl_repeats, "balanced datasets to evaluate")->capture_default_str();
  classify->add_option("--split", cl_split, "training fraction")->capture_default_str();
  for (auto* sub : {mae, classify}) {
    sub->add_option("--format", ev_format, "json or table")
        ->check(CLI::IsMember({"json", "table"}))
        ->capture_default_str();
    sub->add_option("--out", ev_out, "write the report here instead of stdout");
  }

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "write synthetic edge CSVs");
  synth_cmd->require_subcommand(1);
  std::string sy_out, sy_labels;
  auto* sy_pa = synth_cmd->add_subcommand("pa", "growing preferential-attachment transaction stream");
  synth::GrowthParams gp;
  sy_pa->add_option("--nodes", gp.nodes)->capture_default_str();
  sy_pa->add_option("--tx-per-node", gp.tx_per_node)->capture_default_str();
  sy_pa->add_option("--repeat-prob", gp.repeat_prob)->capture_default_str();
  sy_pa->add_option("--recency", gp.recency)->capture_default_str();
  sy_pa->add_option("--recent-window", gp.recent_window)->capture_default_str();
  auto* sy_sbm = synth_cmd->add_subcommand("sbm", "two-block stochastic block model with block-0 labels");
  std::size_t sbm_block = 30;
  double sbm_pin = 0.3, sbm_pout = 0.01;
  sy_sbm->add_option("--block-size", sbm_block)->capture_default_str();
  sy_sbm->add_option("--p-in", sbm_pin)->capture_default_str();
  sy_sbm->add_option("--p-out", sbm_pout)->capture_default_str();
  sy_sbm->add_option("--labels", sy_labels, "labels CSV to write (block 0 positive)");
  auto* sy_sinks = synth_cmd->add_subcommand("sinks", "reciprocal core with receive-only sinks");
  std::size_t sk_nodes = 300, sk_feeders = 1;
  double sk_frac = 0.3, sk_degree = 4.0;
  sy_sinks->add_option("--nodes", sk_nodes)->capture_default_str();
  sy_sinks->add_option("--sink-fraction", sk_frac)->capture_default_str();
  sy_sinks->add_option("--core-degree", sk_degree)->capture_default_str();
  sy_sinks->add_option("--feeders", sk_feeders)->capture_default_str();
  for (auto* sub : {sy_pa, sy_sbm, sy_sinks}) sub->add_option("--out", sy_out, "edge CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*ingest) {
      WorkdirLock lock(parent_of(ingest_out));
      IngestSummary summary;
      const auto rows = read_edge_csv(ingest_edges_path);
      const auto g = ingest_edges(rows, &summary);
      write_atomically(ingest_out, [&](std::ostream& o) { write_graph(o, g); });
      std::cout << "nodes=" << g.num_nodes() << " edges=" << g.num_edges() << " rejected=" << summary.rejected()
                << '\n';
      for (const auto& r : summary.rejected_rows) std::cerr << "rejected: " << r << '\n';
    } else if (*segment) {
      fs::create_directories(seg_dir);
      WorkdirLock lock(seg_dir);
      segment_bounds(1, seg_initial, seg_step);
      const auto rows = read_edge_csv(seg_edges);
      std::ostringstream manifest;
      manifest << "# version rows file\n";
      for_each_segment(rows, seg_initial, seg_step, [&](const TransactionGraph& g, const GraphDelta*, std::size_t n) {
        char name[32];
        std::snprintf(name, sizeof name, "segment_%03llu.graph", static_cast<unsigned long long>(g.version()));
        write_atomically((fs::path(seg_dir) / name).string(), [&](std::ostream& o) { write_graph(o, g); });
        manifest << g.version() << ' ' << n << ' ' << name << '\n';
      });
      write_atomically((fs::path(seg_dir) / "manifest.txt").string(), [&](std::ostream& o) { o << manifest.str(); });
      std::cout << manifest.str();
    } else if (*walk) {
      WorkdirLock lock(parent_of(walk_out));
      const auto mode = walk_flags.resolve(global.seed);
      const auto g = load_graph(walk_graph);
      const auto corpus = generate_corpus(g, walk_flags.cfg, mode, global.effective_threads());
      write_atomically(walk_out, [&](std::ostream& o) { write_corpus(o, corpus); });
      std::cout << "walks=" << corpus.size() << " mean_defacto_length=" << mean_defacto_length(corpus) << '\n';
    } else if (*update) {
      WorkdirLock lock(parent_of(up_out));
      auto corpus = load_corpus(up_corpus);
      up_flags.inherit(corpus);
      const auto mode = up_flags.resolve(global.seed);
      const auto prev = load_graph(up_prev);
      const auto next = load_graph(up_next);
      if (corpus.graph_version != prev.version())
        throw StateError("corpus graph_version " + std::to_string(corpus.graph_version) +
                         " does not match --prev version " + std::to_string(prev.version()));
      const auto delta = diff_graphs(prev, next);
      UpdateReport report;
      const auto strategy = parse_update_strategy(up_strategy);
      const auto updated = update_corpus(strategy, std::move(corpus), next, delta, up_flags.cfg, mode, &report,
                                         global.effective_threads());
      if (global.strict) report.wall_time_ms.reset();
      write_atomically(up_out, [&](std::ostream& o) { write_corpus(o, updated); });
      const std::string json = to_json(report).dump(2) + "\n";
      if (!up_report.empty()) write_atomically(up_report, [&](std::ostream& o) { o << json; });
      std::cout << json;
    } else if (*trainc) {
      WorkdirLock lock(parent_of(tr_out));
      sg.seed = global.seed;
      const auto corpus = load_corpus(tr_corpus);
      std::optional<TransactionGraph> g;
      std::size_t rows = 0;
      if (!tr_graph.empty()) {
        g = load_graph(tr_graph);
        if (g->version() != corpus.graph_version)
          throw StateError("corpus graph_version " + std::to_string(corpus.graph_version) +
                           " does not match --graph version " + std::to_string(g->version()));
        rows = g->num_nodes();
      }
      EmbeddingMatrix emb;
      if (!tr_warm.empty()) {
        auto prev = import_embeddings(tr_warm);
        prev.graph_version = corpus.graph_version;
        emb = warm_retrain(prev, corpus, sg, rows);
      } else {
        emb = train(corpus, sg, rows);
      }
      if (g) label_with_addresses(emb, *g);
      write_atomically(tr_out, [&](std::ostream& o) { write_embeddings(o, emb); });
      std::cout << "rows=" << emb.rows() << " dim=" << emb.dim() << '\n';
    } else if (*mae) {
      const auto corpus = load_corpus(mae_corpus);
      const auto g = load_graph(mae_graph);
      EvalReport rep;
      rep.delta_mae = delta_mae(corpus, g);
      rep.mean_defacto_length = mean_defacto_length(corpus);
      emit(eval_output(rep, ev_format), ev_out);
    } else if (*classify) {
      const auto emb = import_embeddings(cl_emb);
      std::unordered_map<std::string, NodeId> rows;
      for (NodeId u = 0; u < emb.rows(); ++u) rows.emplace(emb.labels[u], u);
      std::ifstream in(cl_labels);
      if (!in) throw InputError("cannot open labels file '" + cl_labels + "'");
      const auto positives = read_positive_labels(in, [&](std::string_view a) {
        auto it = rows.find(std::string(a));
        return it == rows.end() ? kNoNode : it->second;
      });
      const auto rep = classify_eval(emb, positives, cl_split, cl_repeats, global.seed);
      emit(eval_output(rep, ev_format), ev_out);
    } else if (*synth_cmd) {
      WorkdirLock lock(parent_of(sy_out));
      std::vector<RawTx> rows;
      if (*sy_pa) {
        gp.seed = global.seed;
        rows = synth::preferential_attachment(gp);
      } else if (*sy_sbm) {
        auto s = synth::stochastic_block_model({sbm_block, sbm_block}, sbm_pin, sbm_pout, global.seed);
        rows = std::move(s.rows);
        if (!sy_labels.empty()) {
          write_atomically(sy_labels, [&](std::ostream& o) {
            o << "address,label\n";
            for (std::size_t i = 0; i < s.block.size(); ++i)
              if (s.block[i] == 0) o << synth::node_name(i) << ",1\n";
          });
        }
      } else {
        rows = synth::core_with_sinks(sk_nodes, sk_frac, sk_degree, global.seed, sk_feeders);
      }
      write_atomically(sy_out, [&](std::ostream& o) { write_rows_csv(o, rows); });
      std::cout << "rows=" << rows.size() << '\n';
    }
  } catch (const StateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const LookupError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
