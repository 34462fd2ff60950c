// SPDX-License-Identifier: Apache-2.0
/**
 * @file   objectives.hpp
 * @brief  Masked BCE, the soft-label distribution loss, the neighbor
 *         smoothing loss and their weighted total, as graph nodes.
 *
 * Both KL-based terms use a per-class Bernoulli KL summed over classes:
 *   KL(p || q) = p log(p/q) + (1-p) log((1-p)/(1-q)).
 * Sigmoid outputs are not a normalized distribution over classes, so the
 * complementary term is what keeps the divergence non-negative.
 */
#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "modl/common.hpp"
#include "modl/graph.hpp"
#include "modl/labels.hpp"

namespace modl {

struct LossWeights {
  double lambda = 0.1;
  double gamma = 0.1;

  void validate() const {
    if (!(std::isfinite(lambda) && lambda >= 0.0)) throw ConfigError("lambda must be finite and non-negative");
    if (!(std::isfinite(gamma) && gamma >= 0.0)) throw ConfigError("gamma must be finite and non-negative");
  }
};

struct LossBreakdown {
  double cls = 0.0;
  double distri = 0.0;
  double neigh = 0.0;
  double total = 0.0;
};

/// x * log(x / y) with 0 * log 0 = 0.
inline double xlogx_over_y(double x, double y) { return x == 0.0 ? 0.0 : x * (std::log(x) - std::log(y)); }

/// Bernoulli KL of p relative to q, no clamping.
inline double bernoulli_kl(double p, double q) { return xlogx_over_y(p, q) + xlogx_over_y(1.0 - p, 1.0 - q); }

/// Mean over masked-in slots of -[y log p + (1-y) log(1-p)], p clamped.
/// Masked-out slots contribute neither value nor gradient. With every slot
/// masked out the loss is 0.
inline NodeId bce_loss(Graph& g, NodeId pred, const ResolvedTargets& targets) {
  const Tensor& P = g.value(pred);
  if (!P.same_shape(targets.values) || targets.mask.size() != P.size())
    throw DimensionError("bce_loss: predictions " + P.shape_string() + " vs targets " +
                         targets.values.shape_string());
  std::size_t active = 0;
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (!targets.mask[i]) continue;
    ++active;
    const double p = clamp_prob(P.data[i]);
    const double y = targets.values.data[i];
    s -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  if (active == 0) log(LogLevel::Warn, "bce_loss: every slot is masked out; loss defined as 0");
  const double denom = active ? static_cast<double>(active) : 1.0;
  return g.add_node(OpKind::Custom, "bce", {pred}, Tensor::scalar(s / denom),
                    [pred, targets, denom](Graph& gr, NodeId self) {
                      if (!gr.requires_grad(pred)) return;
                      const double up = gr.node(self).grad.data[0] / denom;
                      const Tensor& Pv = gr.value(pred);
                      Tensor& dP = gr.grad(pred);
                      for (std::size_t i = 0; i < Pv.size(); ++i) {
                        if (!targets.mask[i]) continue;
                        const double raw = Pv.data[i];
                        if (raw <= kProbEps || raw >= 1.0 - kProbEps) continue;  // clamped
                        const double y = targets.values.data[i];
                        dP.data[i] += up * (-y / raw + (1.0 - y) / (1.0 - raw));
                      }
                    });
}

/// Batch mean of sum_c KL(l_c || p_c). The soft labels l are fixed data and
/// used as given (0 log 0 = 0); predictions are clamped.
inline NodeId distribution_loss(Graph& g, const Tensor& soft, NodeId pred) {
  const Tensor& P = g.value(pred);
  if (!P.same_shape(soft))
    throw ContractError("distribution_loss: soft labels " + soft.shape_string() + " vs predictions " +
                        P.shape_string());
  const double rows = static_cast<double>(std::max<std::size_t>(P.rows(), 1));
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) s += bernoulli_kl(soft.data[i], clamp_prob(P.data[i]));
  return g.add_node(OpKind::Custom, "distri", {pred}, Tensor::scalar(s / rows), [pred, soft, rows](Graph& gr, NodeId self) {
    if (!gr.requires_grad(pred)) return;
    const double up = gr.node(self).grad.data[0] / rows;
    const Tensor& Pv = gr.value(pred);
    Tensor& dP = gr.grad(pred);
    for (std::size_t i = 0; i < Pv.size(); ++i) {
      const double q = Pv.data[i];
      if (q <= kProbEps || q >= 1.0 - kProbEps) continue;
      const double l = soft.data[i];
      dP.data[i] += up * (-l / q + (1.0 - l) / (1.0 - q));
    }
  });
}

/// Batch mean over anchors of sum_k s_k * sum_c KL(n_kc || a_c), where the
/// neighbor rows for anchor i are rows [i*K, (i+1)*K) of `neighbor_pred`
/// and `sims` is aligned with those rows. Both sides are clamped. Gradients
/// reach the neighbor branch unless `stop_neighbor_grad` is set.
inline NodeId neighbor_loss(Graph& g, NodeId anchor_pred, NodeId neighbor_pred, std::vector<double> sims,
                            std::size_t K, bool stop_neighbor_grad = false) {
  const Tensor& A = g.value(anchor_pred);
  const Tensor& N = g.value(neighbor_pred);
  if (K == 0) throw ContractError("neighbor_loss: K must be at least 1");
  if (N.rows() != A.rows() * K || N.cols() != A.cols())
    throw DimensionError("neighbor_loss: " + std::to_string(A.rows()) + " anchors x K=" + std::to_string(K) +
                         " needs " + std::to_string(A.rows() * K) + " neighbor rows, got " + N.shape_string());
  if (sims.size() != N.rows())
    throw ContractError("neighbor_loss: " + std::to_string(sims.size()) + " similarity scores for " +
                        std::to_string(N.rows()) + " neighbor rows (K=" + std::to_string(K) + " per anchor)");
  const std::size_t C = A.cols();
  const double anchors = static_cast<double>(std::max<std::size_t>(A.rows(), 1));
  double s = 0.0;
  for (std::size_t r = 0; r < N.rows(); ++r) {
    if (sims[r] == 0.0) continue;
    const std::size_t i = r / K;
    double kl = 0.0;
    for (std::size_t c = 0; c < C; ++c) kl += bernoulli_kl(clamp_prob(N(r, c)), clamp_prob(A(i, c)));
    s += sims[r] * kl;
  }
  std::vector<NodeId> inputs{anchor_pred};
  if (!stop_neighbor_grad) inputs.push_back(neighbor_pred);
  return g.add_node(
      OpKind::Custom, "neigh", std::move(inputs), Tensor::scalar(s / anchors),
      [anchor_pred, neighbor_pred, sims = std::move(sims), K, C, anchors, stop_neighbor_grad](Graph& gr, NodeId self) {
        const double up = gr.node(self).grad.data[0] / anchors;
        const Tensor& Av = gr.value(anchor_pred);
        const Tensor& Nv = gr.value(neighbor_pred);
        const bool to_anchor = gr.requires_grad(anchor_pred);
        const bool to_neighbor = !stop_neighbor_grad && gr.requires_grad(neighbor_pred);
        for (std::size_t r = 0; r < Nv.rows(); ++r) {
          if (sims[r] == 0.0) continue;
          const std::size_t i = r / K;
          const double w = up * sims[r];
          for (std::size_t c = 0; c < C; ++c) {
            const double qraw = Av(i, c), praw = Nv(r, c);
            const bool q_free = qraw > kProbEps && qraw < 1.0 - kProbEps;
            const bool p_free = praw > kProbEps && praw < 1.0 - kProbEps;
            const double q = clamp_prob(qraw), p = clamp_prob(praw);
            if (to_anchor && q_free) gr.grad(anchor_pred)(i, c) += w * (-p / q + (1.0 - p) / (1.0 - q));
            if (to_neighbor && p_free)
              gr.grad(neighbor_pred)(r, c) += w * (std::log(p / q) - std::log((1.0 - p) / (1.0 - q)));
          }
        }
      });
}

inline LossBreakdown total_loss(double cls, double distri, double neigh, const LossWeights& w) {
  if (!std::isfinite(cls) || !std::isfinite(distri) || !std::isfinite(neigh))
    throw NumericError("total_loss: non-finite loss component");
  return {cls, distri, neigh, cls + w.lambda * distri + w.gamma * neigh};
}

/// Graph form of the weighted total. Terms with no node (zero weight, not
/// built) are skipped.
inline NodeId weighted_total(Graph& g, NodeId cls, std::optional<NodeId> distri, std::optional<NodeId> neigh,
                             const LossWeights& w) {
  NodeId t = cls;
  if (distri) t = add(g, t, scale(g, *distri, w.lambda, "lambda*distri"), "total");
  if (neigh) t = add(g, t, scale(g, *neigh, w.gamma, "gamma*neigh"), "total");
  return t;
}

/// One row of the training log CSV.
struct LossLogRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossBreakdown loss;
  double lr = 0.0;
};

inline std::string loss_log_csv(std::span<const LossLogRow> rows) {
  std::string out = "epoch,step,cls,distri,neigh,total,lr\n";
  for (const auto& r : rows)
    out += std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + format_double(r.loss.cls) + "," +
           format_double(r.loss.distri) + "," + format_double(r.loss.neigh) + "," + format_double(r.loss.total) +
           "," + format_double(r.lr) + "\n";
  return out;
}

}  // namespace modl
