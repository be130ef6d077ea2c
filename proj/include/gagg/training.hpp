#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gagg/aggregator.hpp"
#include "gagg/eval.hpp"
#include "gagg/losses.hpp"
#include "gagg/optimizer.hpp"
#include "gagg/random.hpp"

namespace gagg {

/// Training schedule. The learning rate after k epochs is lr * decay^k
/// (paper: 0.001, decreased by 5% per epoch).
struct TrainConfig {
  double lr = 0.001;
  double lr_decay = 0.95;
  int epochs = 0;
  int batch_size = 16;
  std::uint64_t seed = 0;
  int crop_frames = 40;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("train config: lr must be positive");
    if (!(lr_decay > 0.0) || lr_decay > 1.0) throw ConfigError("train config: decay must be in (0, 1]");
    if (epochs < 0) throw ConfigError("train config: negative epochs");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be positive");
    if (crop_frames < 1) throw ConfigError("train config: crop_frames must be positive");
  }
};

inline double learning_rate_at(const TrainConfig& tc, int epoch) {
  if (epoch < 0) throw ConfigError("learning_rate_at: negative epoch");
  return tc.lr * std::pow(tc.lr_decay, static_cast<double>(epoch));
}

/// Desk-scale stand-in for a speaker corpus: per-speaker Gaussian means with
/// isotropic within-speaker noise and jittered frame counts.
struct SyntheticSpeakerSet {
  int num_speakers = 2;
  int feature_dim = 8;
  int utterances_per_speaker = 4;
  double noise_scale = 0.5;
  int min_frames = 30;
  int max_frames = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_speakers < 2) throw ConfigError("synthetic set: need at least 2 speakers");
    if (feature_dim < 1) throw ConfigError("synthetic set: feature_dim must be positive");
    if (utterances_per_speaker < 1) throw ConfigError("synthetic set: need utterances");
    if (!(noise_scale > 0.0)) throw ConfigError("synthetic set: noise_scale must be positive");
    if (min_frames < 1 || max_frames < min_frames) throw ConfigError("synthetic set: bad frame range");
  }
};

/// Deterministic per-speaker mean vectors (unit-scale Gaussian entries).
inline std::vector<Matrix> speaker_means(const SyntheticSpeakerSet& set) {
  set.validate();
  Rng rng(set.seed);
  std::vector<Matrix> means;
  means.reserve(static_cast<std::size_t>(set.num_speakers));
  for (int s = 0; s < set.num_speakers; ++s) {
    means.push_back(random_gaussian(1, set.feature_dim, 1.0, rng));
  }
  for (std::size_t a = 0; a < means.size(); ++a) {
    for (std::size_t b = a + 1; b < means.size(); ++b) {
      if (bitwise_equal(means[a], means[b])) {
        throw ConfigError("synthetic set: speaker means collided");
      }
    }
  }
  return means;
}

struct SyntheticUtterance {
  FrameGraph features;
  int speaker;
};

/// Draw utterances for every speaker. `salt` separates draws that share a
/// set seed (train vs eval splits); `per_speaker` overrides the set count.
inline std::vector<SyntheticUtterance> make_utterances(const SyntheticSpeakerSet& set,
                                                       std::uint64_t salt = 0,
                                                       int per_speaker = -1) {
  std::vector<Matrix> means = speaker_means(set);
  int count = per_speaker > 0 ? per_speaker : set.utterances_per_speaker;
  Rng rng(set.seed ^ (0x9e3779b97f4a7c15ull * (salt + 1)));
  std::vector<SyntheticUtterance> utts;
  utts.reserve(static_cast<std::size_t>(set.num_speakers) * static_cast<std::size_t>(count));
  for (int s = 0; s < set.num_speakers; ++s) {
    for (int u = 0; u < count; ++u) {
      int frames = rng.uniform_int(set.min_frames, set.max_frames);
      Matrix f(frames, set.feature_dim);
      for (int i = 0; i < frames; ++i) {
        for (int j = 0; j < set.feature_dim; ++j) {
          f(i, j) = means[static_cast<std::size_t>(s)](0, j) + set.noise_scale * rng.gaussian();
        }
      }
      utts.push_back(SyntheticUtterance{FrameGraph(std::move(f)), s});
    }
  }
  return utts;
}

/// Training-time length adjustment: a seeded contiguous crop when long
/// enough, otherwise self-concatenation followed by a crop from index 0.
inline FrameGraph crop_or_duplicate(const FrameGraph& seq, int target_len, Rng& rng) {
  if (target_len < 1) throw ConfigError("crop_or_duplicate: target_len must be positive");
  int n = seq.num_nodes();
  if (n == target_len) return seq;
  Matrix out(target_len, seq.feature_dim());
  if (n > target_len) {
    int offset = rng.uniform_int(0, n - target_len);
    for (int i = 0; i < target_len; ++i)
      for (int j = 0; j < seq.feature_dim(); ++j) out(i, j) = seq.node_features(i + offset, j);
  } else {
    for (int i = 0; i < target_len; ++i)
      for (int j = 0; j < seq.feature_dim(); ++j) out(i, j) = seq.node_features(i % n, j);
  }
  return FrameGraph(std::move(out));
}

/// Two-layer per-frame affine + LeakyReLU trunk standing in for the SE-ResNet
/// / RawNet2 feature extractors; maps feature_dim -> F -> F (F = aggregator
/// in_dim).
struct ToyTrunkParams {
  Matrix w1, b1, w2, b2;
};

inline ToyTrunkParams init_toy_trunk(int feature_dim, int out_dim, Rng& rng) {
  double b1 = std::sqrt(1.0 / feature_dim);
  double b2 = std::sqrt(1.0 / out_dim);
  return ToyTrunkParams{random_uniform(feature_dim, out_dim, -b1, b1, rng), Matrix(1, out_dim),
                        random_uniform(out_dim, out_dim, -b2, b2, rng), Matrix(1, out_dim)};
}

struct ToyTrunkVars {
  Var w1, b1, w2, b2;
};

inline ToyTrunkVars to_tape(Tape& t, const ToyTrunkParams& p) {
  return ToyTrunkVars{t.input(p.w1), t.input(p.b1), t.input(p.w2), t.input(p.b2)};
}

inline Var trunk_forward(Tape& t, Var frames, const ToyTrunkVars& p, double slope) {
  Var h1 = t.leaky_relu(t.broadcast_add_row(t.matmul(frames, p.w1), p.b1), slope);
  return t.leaky_relu(t.broadcast_add_row(t.matmul(h1, p.w2), p.b2), slope);
}

/// Everything learnable in the desk-scale experiment. In mean-pool baseline
/// mode `aggregator` stays empty and the embedding is the column-wise mean of
/// the trunk output.
struct ToyModelParams {
  ToyTrunkParams trunk;
  AggregatorParams aggregator;
  Matrix class_weights;  // D x C
};

inline std::vector<std::pair<std::string, Matrix*>> named_params(ToyModelParams& p) {
  std::vector<std::pair<std::string, Matrix*>> out;
  out.emplace_back("trunk.w1", &p.trunk.w1);
  out.emplace_back("trunk.b1", &p.trunk.b1);
  out.emplace_back("trunk.w2", &p.trunk.w2);
  out.emplace_back("trunk.b2", &p.trunk.b2);
  for (auto& [name, m] : named_params(p.aggregator)) out.emplace_back(name, m);
  out.emplace_back("loss.class_weights", &p.class_weights);
  return out;
}

struct ToyLossConfig {
  double margin = 0.3;
  double scale = 30.0;
  MarginVariant variant = MarginVariant::kAam;
};

struct TrainResult {
  ToyModelParams params;
  std::vector<double> epoch_mean_loss;
};

namespace detail {

inline Var toy_forward(Tape& t, const Matrix& frames, const AggregatorConfig& cfg,
                       const ToyTrunkVars& trunk, const AggregatorVars& agg,
                       bool mean_pool_baseline) {
  Var x = t.input(frames);
  Var features = trunk_forward(t, x, trunk, cfg.leaky_slope);
  if (mean_pool_baseline) return t.reduce_mean(features);
  return aggregate(t, features, cfg, agg);
}

}  // namespace detail

/// Minibatch Adam on the margin-softmax objective over synthetic utterances.
/// cfg.seed drives aggregator init; tc.seed drives trunk/class-weight init,
/// shuffling, and crops. Returns final params and per-epoch mean loss.
inline TrainResult train_toy(const SyntheticSpeakerSet& set, const AggregatorConfig& cfg,
                             const TrainConfig& tc, const ToyLossConfig& loss = {},
                             bool mean_pool_baseline = false) {
  set.validate();
  cfg.validate();
  tc.validate();
  if (!(loss.scale > 0.0)) throw ConfigError("train_toy: loss scale must be positive");
  if (loss.margin < 0.0 || loss.margin >= 1.0) {
    throw ConfigError("train_toy: loss margin must be in [0, 1)");
  }

  std::vector<SyntheticUtterance> train_set = make_utterances(set);

  Rng rng(tc.seed);
  TrainResult result;
  result.params.trunk = init_toy_trunk(set.feature_dim, cfg.in_dim, rng);
  if (!mean_pool_baseline) result.params.aggregator = init_aggregator_params(cfg);
  int emb_dim = mean_pool_baseline ? cfg.in_dim : cfg.embedding_dim();
  double wb = std::sqrt(1.0 / emb_dim);
  result.params.class_weights = random_uniform(emb_dim, set.num_speakers, -wb, wb, rng);

  std::vector<std::pair<std::string, Matrix*>> params = named_params(result.params);
  std::vector<Matrix*> param_ptrs;
  for (auto& [name, m] : params) param_ptrs.push_back(m);

  AdamState adam;
  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    double lr = learning_rate_at(tc, epoch);
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      std::vector<Matrix> batch_grads;
      for (const Matrix* p : param_ptrs) batch_grads.emplace_back(p->rows(), p->cols());
      for (std::size_t b = start; b < stop; ++b) {
        const SyntheticUtterance& utt = train_set[static_cast<std::size_t>(order[b])];
        FrameGraph cropped = crop_or_duplicate(utt.features, tc.crop_frames, rng);
        Tape t;
        ToyTrunkVars trunk_vars = to_tape(t, result.params.trunk);
        AggregatorVars agg_vars = to_tape(t, result.params.aggregator);
        Var weights = t.input(result.params.class_weights);
        Var emb = detail::toy_forward(t, cropped.node_features, cfg, trunk_vars, agg_vars,
                                      mean_pool_baseline);
        Var loss_var = margin_softmax_loss(t, emb, utt.speaker, weights, loss.variant,
                                           loss.margin, loss.scale);
        double loss_value = t.value(loss_var)(0, 0);
        if (!std::isfinite(loss_value)) {
          throw TrainingError("train_toy: non-finite loss", epoch);
        }
        epoch_loss += loss_value;
        t.backward(loss_var);

        // gradient collection follows named_params order exactly
        std::size_t k = 0;
        auto accumulate = [&batch_grads, &k](const Matrix& g) {
          Matrix& acc = batch_grads[k++];
          for (std::size_t i = 0; i < acc.size(); ++i) acc.values()[i] += g.values()[i];
        };
        accumulate(t.grad(trunk_vars.w1));
        accumulate(t.grad(trunk_vars.b1));
        accumulate(t.grad(trunk_vars.w2));
        accumulate(t.grad(trunk_vars.b2));
        for (const auto& layer : agg_vars.gat) {
          for (const auto& head : layer.heads) {
            accumulate(t.grad(head.weight));
            accumulate(t.grad(head.attn));
          }
        }
        for (const Var& proj : agg_vars.pool_projections) accumulate(t.grad(proj));
        for (const auto& r : agg_vars.readouts) {
          for (const Var& proj : r.projections) accumulate(t.grad(proj));
        }
        accumulate(t.grad(weights));
      }
      double inv = 1.0 / static_cast<double>(stop - start);
      for (Matrix& g : batch_grads) {
        for (double& v : g.values()) v *= inv;
      }
      adam_step(param_ptrs, batch_grads, adam, lr);
    }
    result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

/// Full-length embedding of one utterance under a trained toy model
/// (evaluation applies no length adjustment).
inline UtteranceEmbedding toy_embed(const ToyModelParams& model, const AggregatorConfig& cfg,
                                    const FrameGraph& utterance, bool mean_pool_baseline = false) {
  Tape t;
  ToyTrunkVars trunk_vars = to_tape(t, model.trunk);
  AggregatorVars agg_vars = to_tape(t, model.aggregator);
  Var emb = detail::toy_forward(t, utterance.node_features, cfg, trunk_vars, agg_vars,
                                mean_pool_baseline);
  return UtteranceEmbedding{t.value(emb)};
}

/// All-pairs trials over a labeled utterance list scored by cosine.
inline ScoreSet score_all_pairs(const std::vector<SyntheticUtterance>& utts,
                                const std::vector<UtteranceEmbedding>& embeddings) {
  if (utts.size() != embeddings.size()) {
    throw ShapeError("score_all_pairs: utterance/embedding count mismatch");
  }
  ScoreSet scores;
  for (std::size_t a = 0; a < utts.size(); ++a) {
    for (std::size_t b = a + 1; b < utts.size(); ++b) {
      Trial t;
      t.label = utts[a].speaker == utts[b].speaker ? TrialLabel::kTarget : TrialLabel::kNontarget;
      t.enroll_id = "utt" + std::to_string(a);
      t.test_id = "utt" + std::to_string(b);
      scores.add(std::move(t), cosine_score(embeddings[a], embeddings[b]));
    }
  }
  return scores;
}

struct DirectionalSpec {
  SyntheticSpeakerSet set;       // training split definition
  int eval_utterances_per_speaker = 4;
  AggregatorConfig aggregator;
  TrainConfig train;
  ToyLossConfig loss;
};

struct DirectionalOutcome {
  double baseline_eer;  // trained mean-pooling aggregation
  double graph_eer;     // trained GAT + gPool + readout aggregation
};

/// Train the graph aggregator and the mean-pooling baseline under identical
/// trunk/loss/seed and compare eval-set EER.
inline DirectionalOutcome run_directional_experiment(const DirectionalSpec& spec) {
  std::vector<SyntheticUtterance> eval_set =
      make_utterances(spec.set, /*salt=*/1, spec.eval_utterances_per_speaker);

  DirectionalOutcome out{};
  for (bool baseline : {true, false}) {
    TrainResult trained = train_toy(spec.set, spec.aggregator, spec.train, spec.loss, baseline);
    std::vector<UtteranceEmbedding> embeddings;
    embeddings.reserve(eval_set.size());
    for (const SyntheticUtterance& u : eval_set) {
      embeddings.push_back(toy_embed(trained.params, spec.aggregator, u.features, baseline));
    }
    double eer = compute_eer(score_all_pairs(eval_set, embeddings)).eer;
    (baseline ? out.baseline_eer : out.graph_eer) = eer;
  }
  return out;
}

}  // namespace gagg
