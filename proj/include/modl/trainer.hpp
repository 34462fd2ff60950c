// SPDX-License-Identifier: Apache-2.0
/**
 * @file   trainer.hpp
 * @brief  Two-stage training: references on the classification loss alone,
 *         then the target on classification + distribution + neighbor
 *         smoothing terms using frozen soft labels and a frozen pool.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "modl/adam.hpp"
#include "modl/dataset.hpp"
#include "modl/evaluation.hpp"
#include "modl/labels.hpp"
#include "modl/model.hpp"
#include "modl/neighborhood.hpp"
#include "modl/objectives.hpp"

namespace modl {

struct TrainConfig {
  LossWeights weights{0.1, 0.1};
  std::size_t k = 9;
  double sigma = 1.0;
  LabelPolicy policy = LabelPolicy::ones();
  UnmentionedRule unmentioned = UnmentionedRule::Negative;
  double base_lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double lr_decay_factor = 3.0;
  std::size_t lr_decay_every = 2;
  std::uint64_t seed = 0;
  bool stop_neighbor_grad = false;
  bool include_self = false;
  bool normalize_similarity = true;  // rescale each anchor's s_i^k to sum to 1

  void validate() const {
    weights.validate();
    policy.validate();
    if (k == 0) throw ConfigError("K must be at least 1");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(base_lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must be in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (!(lr_decay_factor >= 1.0)) throw ConfigError("lr decay factor must be >= 1");
    if (lr_decay_every == 0) throw ConfigError("lr decay interval must be positive");
  }
};

/// base / factor^floor(epoch / every).
inline double lr_schedule(double base_lr, std::size_t epoch, double factor = 3.0, std::size_t every = 2) {
  return base_lr / std::pow(factor, static_cast<double>(epoch / every));
}

/// Features and resolved targets for one split, indexed by row.
struct TrainingSet {
  std::vector<std::uint64_t> ids;
  Tensor features;
  ResolvedTargets targets;
  std::vector<std::string> class_names;

  std::size_t size() const { return ids.size(); }

  static TrainingSet from(const Dataset& d, ResolvedTargets targets) {
    TrainingSet t{d.ids(), d.feature_matrix(), std::move(targets), d.class_names};
    if (t.targets.rows() != t.ids.size()) throw DimensionError("training set: targets do not match samples");
    return t;
  }

  EvalSet as_eval_set() const { return {features, targets, class_names}; }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_train_loss = 0.0;
  double valid_mean_auc = 0.0;
};

struct TrainResult {
  Parameters best;
  double best_valid_auc = -1.0;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
  std::vector<LossLogRow> log;
  bool diverged = false;
};

/// Frozen stage-2 inputs.
struct DistillInputs {
  const SoftLabelDistribution* soft = nullptr;
  const NeighborPool* pool = nullptr;
};

namespace detail {

/// Shuffling stream depends only on the run seed and epoch, so every model
/// trained under one seed sees the same batch order.
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, 0x5f1e, epoch));
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

struct Stage2Lookup {
  std::vector<std::size_t> soft_row;           // train row -> soft-label row
  std::vector<std::vector<std::size_t>> nbr;   // train row -> neighbor train rows
  std::vector<std::vector<double>> sims;       // train row -> similarities
  std::size_t k = 0;
};

inline Stage2Lookup build_lookup(const TrainingSet& train, const DistillInputs& in, bool need_soft, bool need_pool,
                                 bool normalize_sims) {
  Stage2Lookup lk;
  std::unordered_map<std::uint64_t, std::size_t> row_of;
  for (std::size_t i = 0; i < train.size(); ++i) row_of[train.ids[i]] = i;
  if (need_soft) {
    if (!in.soft) throw ConfigError("train_target: distribution loss enabled but no soft labels given");
    if (in.soft->classes() != train.targets.cols())
      throw ConfigError("train_target: soft labels have the wrong class count");
    std::unordered_map<std::uint64_t, std::size_t> soft_of;
    for (std::size_t i = 0; i < in.soft->size(); ++i) soft_of[in.soft->sample_ids[i]] = i;
    for (auto id : train.ids) {
      auto it = soft_of.find(id);
      if (it == soft_of.end()) throw ConfigError("train_target: no soft label for sample " + std::to_string(id));
      lk.soft_row.push_back(it->second);
    }
  }
  if (need_pool) {
    if (!in.pool) throw ConfigError("train_target: neighbor loss enabled but no neighbor pool given");
    lk.k = in.pool->k;
    for (auto id : train.ids) {
      const AnchorNeighbors* a = in.pool->find(id);
      if (!a) throw ConfigError("train_target: neighbor pool has no entry for sample " + std::to_string(id));
      std::vector<std::size_t> rows;
      std::vector<double> s;
      for (const auto& nb : a->neighbors) {
        auto it = row_of.find(nb.id);
        if (it == row_of.end())
          throw ConfigError("train_target: neighbor " + std::to_string(nb.id) + " is not in the training split");
        rows.push_back(it->second);
        s.push_back(nb.similarity);
      }
      if (normalize_sims) {
        double total = 0.0;
        for (double v : s) total += v;
        if (total > 0.0)
          for (double& v : s) v /= total;
      }
      lk.nbr.push_back(std::move(rows));
      lk.sims.push_back(std::move(s));
    }
  }
  return lk;
}

inline double validation_auc(const ModelSpec& spec, const Parameters& p, const TrainingSet& valid) {
  const EvalReport r = evaluate_scores(forward(spec, p, valid.features), valid.targets, valid.class_names, 0);
  return std::isnan(r.mean_auc) ? 0.0 : r.mean_auc;
}

/// Shared optimization loop. With both weights zero (or no distill inputs)
/// it is exactly stage-1 training.
inline TrainResult run_training(const TrainingSet& train, const TrainingSet& valid, const ModelSpec& spec,
                                const TrainConfig& cfg, const DistillInputs& distill) {
  cfg.validate();
  spec.validate();
  if (train.size() == 0) throw ContractError("training: empty training split");
  if (train.features.cols() != spec.input_width)
    throw DimensionError("model '" + spec.name + "' layer 0: data has " + std::to_string(train.features.cols()) +
                         " features, spec expects " + std::to_string(spec.input_width));
  const bool use_distri = cfg.weights.lambda > 0.0;
  const bool use_neigh = cfg.weights.gamma > 0.0;
  const Stage2Lookup lk = build_lookup(train, distill, use_distri, use_neigh, cfg.normalize_similarity);

  Parameters params = init_parameters(spec, cfg.seed);
  AdamState adam = AdamState::for_parameters(params.tensors, cfg.beta1, cfg.beta2, cfg.adam_epsilon);
  TrainResult res;
  res.best = params;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs && !res.diverged; ++epoch) {
    const double lr = lr_schedule(cfg.base_lr, epoch, cfg.lr_decay_factor, cfg.lr_decay_every);
    const auto order = epoch_order(train.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> anchors(order.data() + start, end - start);
      const std::size_t b = anchors.size();

      std::vector<std::size_t> rows(anchors.begin(), anchors.end());
      std::vector<double> sims;
      if (use_neigh) {
        for (std::size_t a : anchors) {
          rows.insert(rows.end(), lk.nbr[a].begin(), lk.nbr[a].end());
          sims.insert(sims.end(), lk.sims[a].begin(), lk.sims[a].end());
        }
      }

      Graph g;
      std::vector<NodeId> pids;
      for (const Tensor& t : params.tensors) pids.push_back(g.parameter(t));
      const NodeId x = g.constant(train.features.gather_rows(rows), "features");
      const NodeId out = build_forward(g, spec, pids, x);
      const NodeId anchor_out = use_neigh ? slice_rows(g, out, 0, b, "anchors") : out;
      const NodeId cls = bce_loss(g, anchor_out, train.targets.gather_rows(anchors));
      std::optional<NodeId> distri, neigh;
      if (use_distri) {
        std::vector<std::size_t> srows;
        for (std::size_t a : anchors) srows.push_back(lk.soft_row[a]);
        distri = distribution_loss(g, distill.soft->values.gather_rows(srows), anchor_out);
      }
      if (use_neigh) {
        const NodeId nbr_out = slice_rows(g, out, b, rows.size(), "neighbors");
        neigh = neighbor_loss(g, anchor_out, nbr_out, std::move(sims), lk.k, cfg.stop_neighbor_grad);
      }
      const NodeId total = weighted_total(g, cls, distri, neigh, cfg.weights);

      const double tv = g.value(total).data[0];
      if (!std::isfinite(tv)) {
        log(LogLevel::Warn, "model '" + spec.name + "' diverged at epoch " + std::to_string(epoch) +
                                "; keeping the last finite checkpoint");
        res.diverged = true;
        break;
      }
      LossLogRow row{epoch, step, {}, lr};
      row.loss.cls = g.value(cls).data[0];
      row.loss.distri = distri ? g.value(*distri).data[0] : 0.0;
      row.loss.neigh = neigh ? g.value(*neigh).data[0] : 0.0;
      row.loss.total = tv;
      res.log.push_back(row);

      const auto grads = g.backward(total);
      try {
        adam_step(params.tensors, grads, adam, lr);
      } catch (const NumericError& e) {
        log(LogLevel::Warn, "model '" + spec.name + "': " + e.what());
        res.diverged = true;
        break;
      }
      loss_sum += tv;
      ++batches;
      ++step;
    }
    if (res.diverged) break;
    EpochRecord rec{epoch, lr, batches ? loss_sum / static_cast<double>(batches) : 0.0, 0.0};
    rec.valid_mean_auc = valid.size() ? validation_auc(spec, params, valid) : 0.0;
    res.history.push_back(rec);
    if (rec.valid_mean_auc > res.best_valid_auc) {
      res.best_valid_auc = rec.valid_mean_auc;
      res.best_epoch = epoch;
      res.best = params;
    }
  }
  return res;
}

}  // namespace detail

/// Stage 1: masked BCE only, best-validation checkpoint.
inline TrainResult train_reference(const TrainingSet& train, const TrainingSet& valid, const ModelSpec& spec,
                                   const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.weights = {0.0, 0.0};
  return detail::run_training(train, valid, spec, c, {});
}

/// Stage 2: each anchor's pooled neighbors are forwarded through the current
/// target in the same batch. Soft labels and pool are only read.
inline TrainResult train_target(const TrainingSet& train, const TrainingSet& valid, const ModelSpec& spec,
                                const SoftLabelDistribution* soft, const NeighborPool* pool, const TrainConfig& cfg) {
  return detail::run_training(train, valid, spec, cfg, {soft, pool});
}

struct DistillArtifacts {
  SoftLabelDistribution soft;
  NeighborPool pool;
};

/// Averages the frozen references' predictions on the training split and
/// builds the neighbor pool from the result.
inline DistillArtifacts distill_setup(std::span<const TrainedModel> references, const TrainingSet& train,
                                      const TrainConfig& cfg, std::size_t workers = 1) {
  if (references.empty()) throw ContractError("distill_setup: no reference models");
  std::vector<ModelPredictions> preds;
  for (const auto& r : references) {
    Tensor p = forward(r.spec, r.params, train.features);
    if (p.rows() != train.size() || p.cols() != train.targets.cols())
      throw DimensionError("distill_setup: model '" + r.spec.name + "' produced " + p.shape_string() +
                           " predictions for " + std::to_string(train.size()) + " samples");
    preds.push_back({r.spec.name, r.spec.hash() ^ r.params.checksum(), std::move(p)});
  }
  DistillArtifacts out;
  out.soft = aggregate_soft_labels(preds, train.ids);
  out.pool = build_neighbor_pool(out.soft, cfg.k, cfg.sigma, cfg.include_self, workers);
  return out;
}

}  // namespace modl
