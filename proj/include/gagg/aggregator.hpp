#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gagg/gat.hpp"
#include "gagg/gpool.hpp"
#include "gagg/readout.hpp"

namespace gagg {

enum class Topology { kSingleGat, kTwoGatGlobal, kTwoGatHierarchical };

inline std::string to_string(Topology t) {
  switch (t) {
    case Topology::kSingleGat: return "single_gat";
    case Topology::kTwoGatGlobal: return "two_gat_global";
    case Topology::kTwoGatHierarchical: return "two_gat_hierarchical";
  }
  throw ConfigError("unknown topology");
}

inline Topology parse_topology(const std::string& s) {
  if (s == "single_gat") return Topology::kSingleGat;
  if (s == "two_gat_global") return Topology::kTwoGatGlobal;
  if (s == "two_gat_hierarchical") return Topology::kTwoGatHierarchical;
  throw ConfigError("unknown topology '" + s + "'");
}

/// Pipeline wiring for the aggregation module. Defaults are the best
/// SE-ResNet system: 640-dim nodes, 32 heads, top-80% pooling, sum readout.
struct AggregatorConfig {
  int in_dim = 640;
  int hidden_dim = 640;
  int heads = 32;
  double leaky_slope = 0.2;
  std::optional<double> keep_ratio = 0.8;  // nullopt = pooling disabled
  ReadoutKind readout = ReadoutKind::kSum;
  Topology topology = Topology::kSingleGat;
  std::uint64_t seed = 0;

  void validate() const {
    if (in_dim < 1 || hidden_dim < 1 || heads < 1) {
      throw ConfigError("aggregator config: dims and heads must be positive");
    }
    if (hidden_dim % heads != 0) {
      throw ConfigError("aggregator config: hidden_dim " + std::to_string(hidden_dim) +
                        " not divisible by heads " + std::to_string(heads));
    }
    if (leaky_slope < 0.0) throw ConfigError("aggregator config: negative leaky_slope");
    if (keep_ratio && (!(*keep_ratio > 0.0) || *keep_ratio > 1.0)) {
      throw ConfigError("aggregator config: keep_ratio must be in (0, 1]");
    }
    if (readout == ReadoutKind::kCombineConcat && hidden_dim % 4 != 0) {
      throw ConfigError("aggregator config: combine_concat needs hidden_dim divisible by 4");
    }
  }

  int gat_layer_count() const { return topology == Topology::kSingleGat ? 1 : 2; }

  /// Width of the node matrix fed to the pooling/readout stage(s).
  int readout_width(int stage) const {
    (void)stage;
    return topology == Topology::kTwoGatGlobal ? 2 * hidden_dim : hidden_dim;
  }

  int readout_count() const { return topology == Topology::kTwoGatHierarchical ? 2 : 1; }

  int pool_count() const { return keep_ratio ? readout_count() : 0; }

  /// Final embedding width: 2F' for the global two-layer concat, F' otherwise.
  int embedding_dim() const {
    return topology == Topology::kTwoGatGlobal ? 2 * hidden_dim : hidden_dim;
  }
};

/// All learnable matrices of one aggregator instance.
struct AggregatorParams {
  std::vector<GatLayerParams> gat;     // one or two layers
  std::vector<GPoolParams> pools;      // 0, 1, or 2 (hierarchical)
  std::vector<ReadoutParams> readouts; // 1 or 2 (hierarchical)
};

inline AggregatorParams init_aggregator_params(const AggregatorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  AggregatorParams p;
  p.gat.push_back(init_gat_layer(cfg.in_dim, cfg.hidden_dim, cfg.heads, rng));
  if (cfg.gat_layer_count() == 2) {
    p.gat.push_back(init_gat_layer(cfg.hidden_dim, cfg.hidden_dim, cfg.heads, rng));
  }
  for (int i = 0; i < cfg.pool_count(); ++i) {
    int width = cfg.readout_width(i);
    double b = std::sqrt(1.0 / width);
    p.pools.push_back(GPoolParams{random_uniform(1, width, -b, b, rng), *cfg.keep_ratio});
  }
  for (int i = 0; i < cfg.readout_count(); ++i) {
    p.readouts.push_back(init_readout(cfg.readout, cfg.readout_width(i), rng));
  }
  return p;
}

/// Closed-form learnable-scalar total for a config; matches exhaustive
/// enumeration of init_aggregator_params exactly.
inline int count_params(const AggregatorConfig& cfg) {
  cfg.validate();
  int total = gat_param_count(cfg.in_dim, cfg.hidden_dim, cfg.heads);
  if (cfg.gat_layer_count() == 2) {
    total += gat_param_count(cfg.hidden_dim, cfg.hidden_dim, cfg.heads);
  }
  for (int i = 0; i < cfg.pool_count(); ++i) total += cfg.readout_width(i);
  for (int i = 0; i < cfg.readout_count(); ++i) {
    total += readout_param_count(cfg.readout, cfg.readout_width(i));
  }
  return total;
}

/// Stable (name, matrix) enumeration used by checkpoints, the optimizer, and
/// the parameter-accounting tests.
inline std::vector<std::pair<std::string, Matrix*>> named_params(AggregatorParams& p) {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (std::size_t l = 0; l < p.gat.size(); ++l) {
    for (std::size_t h = 0; h < p.gat[l].heads.size(); ++h) {
      std::string base = "gat" + std::to_string(l) + ".head" + std::to_string(h);
      out.emplace_back(base + ".weight", &p.gat[l].heads[h].weight);
      out.emplace_back(base + ".attn", &p.gat[l].heads[h].attn);
    }
  }
  for (std::size_t i = 0; i < p.pools.size(); ++i) {
    out.emplace_back("pool" + std::to_string(i) + ".projection", &p.pools[i].projection);
  }
  for (std::size_t r = 0; r < p.readouts.size(); ++r) {
    for (std::size_t j = 0; j < p.readouts[r].projections.size(); ++j) {
      out.emplace_back("readout" + std::to_string(r) + ".proj" + std::to_string(j),
                       &p.readouts[r].projections[j]);
    }
  }
  return out;
}

struct AggregatorVars {
  std::vector<GatLayerVars> gat;
  std::vector<Var> pool_projections;
  std::vector<ReadoutVars> readouts;
};

inline AggregatorVars to_tape(Tape& t, const AggregatorParams& p) {
  AggregatorVars v;
  for (const auto& layer : p.gat) v.gat.push_back(to_tape(t, layer));
  for (const auto& pool : p.pools) v.pool_projections.push_back(t.input(pool.projection));
  for (const auto& r : p.readouts) v.readouts.push_back(to_tape(t, r));
  return v;
}

namespace detail {

inline void check_aggregator_vars(const AggregatorConfig& cfg, const AggregatorVars& v) {
  if (static_cast<int>(v.gat.size()) != cfg.gat_layer_count()) {
    throw ConfigError("aggregate: expected " + std::to_string(cfg.gat_layer_count()) +
                      " GAT layers, got " + std::to_string(v.gat.size()));
  }
  if (static_cast<int>(v.pool_projections.size()) != cfg.pool_count()) {
    throw ConfigError("aggregate: expected " + std::to_string(cfg.pool_count()) +
                      " pooling layers, got " + std::to_string(v.pool_projections.size()));
  }
  if (static_cast<int>(v.readouts.size()) != cfg.readout_count()) {
    throw ConfigError("aggregate: expected " + std::to_string(cfg.readout_count()) +
                      " readouts, got " + std::to_string(v.readouts.size()));
  }
}

}  // namespace detail

/// Full pipeline on the tape. Topologies (Fig. 1 / Table 5):
///   single_gat:  readout(gpool(gat(x)))
///   two_gat_global: two stacked GAT layers, outputs concatenated
///     feature-wise, then a single gpool + readout over the 2F'-wide graph
///   two_gat_hierarchical: gpool + readout after each GAT layer, the pooled
///     stage-1 graph feeds layer 2, stage results added element-wise
inline Var aggregate(Tape& t, Var nodes, const AggregatorConfig& cfg, const AggregatorVars& vars) {
  cfg.validate();
  detail::check_aggregator_vars(cfg, vars);
  if (t.value(nodes).cols() != cfg.in_dim) {
    throw ShapeError("aggregate: input features " + t.value(nodes).shape_string() +
                     " vs configured in_dim " + std::to_string(cfg.in_dim));
  }

  auto pool_stage = [&](Var graph, int i) {
    if (!cfg.keep_ratio) return graph;
    return gpool(t, graph, vars.pool_projections[static_cast<std::size_t>(i)], *cfg.keep_ratio)
        .pooled;
  };
  auto readout_stage = [&](Var graph, int i) {
    return readout(t, graph, cfg.readout, vars.readouts[static_cast<std::size_t>(i)]);
  };

  switch (cfg.topology) {
    case Topology::kSingleGat: {
      Var g1 = gat_forward(t, nodes, vars.gat[0], cfg.leaky_slope);
      return readout_stage(pool_stage(g1, 0), 0);
    }
    case Topology::kTwoGatGlobal: {
      Var g1 = gat_forward(t, nodes, vars.gat[0], cfg.leaky_slope);
      Var g2 = gat_forward(t, g1, vars.gat[1], cfg.leaky_slope);
      Var cat = t.concat_cols(g1, g2);
      return readout_stage(pool_stage(cat, 0), 0);
    }
    case Topology::kTwoGatHierarchical: {
      Var g1 = gat_forward(t, nodes, vars.gat[0], cfg.leaky_slope);
      Var p1 = pool_stage(g1, 0);
      Var r1 = readout_stage(p1, 0);
      Var g2 = gat_forward(t, p1, vars.gat[1], cfg.leaky_slope);
      Var r2 = readout_stage(pool_stage(g2, 1), 1);
      return t.add(r1, r2);
    }
  }
  throw ConfigError("aggregate: unknown topology");
}

inline UtteranceEmbedding aggregate(const FrameGraph& seq, const AggregatorConfig& cfg,
                                    const AggregatorParams& params) {
  Tape t;
  Var out = aggregate(t, t.input(seq.node_features), cfg, to_tape(t, params));
  return UtteranceEmbedding{t.value(out)};
}

// ---- config serialization (flat key=value text) --------------------------

inline std::string format_config(const AggregatorConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "in_dim=" << cfg.in_dim << "\n";
  os << "hidden_dim=" << cfg.hidden_dim << "\n";
  os << "heads=" << cfg.heads << "\n";
  os << "leaky_slope=" << cfg.leaky_slope << "\n";
  if (cfg.keep_ratio) {
    os << "keep_ratio=" << *cfg.keep_ratio << "\n";
  } else {
    os << "keep_ratio=no-pool\n";
  }
  os << "readout=" << to_string(cfg.readout) << "\n";
  os << "topology=" << to_string(cfg.topology) << "\n";
  os << "seed=" << cfg.seed << "\n";
  return os.str();
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& value, const std::string& key) {
  std::istringstream is(value);
  T out;
  is >> out;
  if (is.fail() || !is.eof()) {
    throw ConfigError("config: bad value '" + value + "' for key '" + key + "'");
  }
  return out;
}

}  // namespace detail

/// Parse the flat key=value config format. Unknown or duplicate keys are
/// errors; missing keys keep their defaults.
inline AggregatorConfig parse_config(const std::string& text) {
  AggregatorConfig cfg;
  std::vector<std::string> seen;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::string t = detail::trim(line);
    if (t.empty()) continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config: missing '=' in line '" + t + "'");
    std::string key = detail::trim(t.substr(0, eq));
    std::string value = detail::trim(t.substr(eq + 1));
    for (const std::string& s : seen) {
      if (s == key) throw ConfigError("config: duplicate key '" + key + "'");
    }
    seen.push_back(key);
    if (key == "in_dim") {
      cfg.in_dim = detail::parse_number<int>(value, key);
    } else if (key == "hidden_dim") {
      cfg.hidden_dim = detail::parse_number<int>(value, key);
    } else if (key == "heads") {
      cfg.heads = detail::parse_number<int>(value, key);
    } else if (key == "leaky_slope") {
      cfg.leaky_slope = detail::parse_number<double>(value, key);
    } else if (key == "keep_ratio") {
      if (value == "no-pool") {
        cfg.keep_ratio.reset();
      } else {
        cfg.keep_ratio = detail::parse_number<double>(value, key);
      }
    } else if (key == "readout") {
      cfg.readout = parse_readout_kind(value);
    } else if (key == "topology") {
      cfg.topology = parse_topology(value);
    } else if (key == "seed") {
      cfg.seed = detail::parse_number<std::uint64_t>(value, key);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

// ---- SE-ResNet shape contract (Table 1) -----------------------------------

struct StageShape {
  std::string name;
  int filters;
  int frequency;
  int time;
};

/// Symbolic shape table of the SE-ResNet trunk with graph aggregation.
/// Node features at the aggregation stage are the filters-major flattening
/// of (filters x frequency) = 640 per time step.
struct ShapeSpec {
  std::vector<StageShape> stages;  // conv1 .. conv5
  int node_count;                  // T / 8
  int node_dim;                    // 640
  int gat_out_dim;                 // 640
  int fc_dim;                      // 256
};

inline ShapeSpec seresnet_shapes(int time_steps) {
  if (time_steps < 8 || time_steps % 8 != 0) {
    throw ShapeError("seresnet_shapes: T must be a positive multiple of 8, got " +
                     std::to_string(time_steps));
  }
  ShapeSpec s;
  s.stages = {
      {"conv1", 32, 40, time_steps},     {"conv2", 32, 40, time_steps},
      {"conv3", 64, 20, time_steps / 2}, {"conv4", 128, 10, time_steps / 4},
      {"conv5", 128, 5, time_steps / 8},
  };
  s.node_count = time_steps / 8;
  s.node_dim = 128 * 5;
  s.gat_out_dim = 640;
  s.fc_dim = 256;
  return s;
}

}  // namespace gagg
