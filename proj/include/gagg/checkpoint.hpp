#pragma once

#include <filesystem>
#include <string>

#include "gagg/aggregator.hpp"
#include "gagg/io.hpp"
#include "gagg/training.hpp"

namespace gagg {

inline NamedMatrices to_named_matrices(ToyModelParams& model) {
  NamedMatrices blocks;
  for (auto& [name, m] : named_params(model)) blocks.emplace_back(name, *m);
  return blocks;
}

inline void save_toy_model(const std::filesystem::path& path, ToyModelParams& model) {
  write_checkpoint(path, to_named_matrices(model));
}

namespace detail {

inline const Matrix* find_block(const NamedMatrices& blocks, const std::string& name) {
  for (const auto& [n, m] : blocks) {
    if (n == name) return &m;
  }
  return nullptr;
}

}  // namespace detail

/// Rebuild aggregator params for `cfg` from checkpoint blocks. Blocks with
/// other prefixes (trunk, loss head) are ignored so a full toy-model
/// checkpoint also loads here.
inline AggregatorParams load_aggregator_params(const AggregatorConfig& cfg,
                                               const NamedMatrices& blocks) {
  AggregatorParams params = init_aggregator_params(cfg);
  for (auto& [name, m] : named_params(params)) {
    const Matrix* found = detail::find_block(blocks, name);
    if (!found) throw FormatError("checkpoint: missing parameter block '" + name + "'");
    if (!found->same_shape(*m)) {
      throw FormatError("checkpoint: block '" + name + "' has shape " + found->shape_string() +
                        ", config wants " + m->shape_string());
    }
    *m = *found;
  }
  return params;
}

/// Rebuild the full toy model (trunk + aggregator + loss head).
inline ToyModelParams load_toy_model(const AggregatorConfig& cfg, int trunk_feature_dim,
                                     int num_classes, bool mean_pool_baseline,
                                     const NamedMatrices& blocks) {
  ToyModelParams model;
  Rng rng(0);
  model.trunk = init_toy_trunk(trunk_feature_dim, cfg.in_dim, rng);
  if (!mean_pool_baseline) model.aggregator = init_aggregator_params(cfg);
  int emb_dim = mean_pool_baseline ? cfg.in_dim : cfg.embedding_dim();
  model.class_weights = Matrix(emb_dim, num_classes);
  for (auto& [name, m] : named_params(model)) {
    const Matrix* found = detail::find_block(blocks, name);
    if (!found) throw FormatError("checkpoint: missing parameter block '" + name + "'");
    if (!found->same_shape(*m)) {
      throw FormatError("checkpoint: block '" + name + "' has shape " + found->shape_string() +
                        ", model wants " + m->shape_string());
    }
    *m = *found;
  }
  return model;
}

}  // namespace gagg
