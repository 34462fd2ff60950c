// SPDX-License-Identifier: Apache-2.0
/**
 * @file   evaluation.hpp
 * @brief  ROC/AUC, per-model and ensemble evaluation reports, and the
 *         ablation table.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "modl/common.hpp"
#include "modl/labels.hpp"
#include "modl/model.hpp"

namespace modl {

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs where the
/// positive scores higher, ties counting one half. Computed from average
/// ranks. Empty when either class is absent.
inline std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    throw ContractError("roc_auc: " + std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) +
                        " labels");
  if (scores.empty()) throw ContractError("roc_auc: no samples");
  for (double s : scores)
    if (!std::isfinite(s)) throw ContractError("roc_auc: non-finite score");
  for (auto l : labels)
    if (l > 1) throw ContractError("roc_auc: labels must be binary");

  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Ranks are 1-based; tied groups share their average rank. Twice the rank
  // is an integer, so the sum below is exact.
  double twice_rank_sum_pos = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double twice_avg = static_cast<double>(i + 1 + j);  // 2 * (i+1 + j)/2
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) {
        twice_rank_sum_pos += twice_avg;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const double P = static_cast<double>(pos), N = static_cast<double>(neg);
  const double twice_u = twice_rank_sum_pos - P * (P + 1.0);
  return twice_u / (2.0 * P * N);
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// ROC curve with one point per distinct score threshold, from (0,0) to
/// (1,1). Tied scores move both rates at once.
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const std::size_t n = scores.size();
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  const std::size_t neg = n - pos;
  std::vector<RocPoint> pts{{0.0, 0.0}};
  if (pos == 0 || neg == 0) {
    pts.push_back({1.0, 1.0});
    return pts;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? tp : fp) += 1;
      ++j;
    }
    pts.push_back({static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos)});
    i = j;
  }
  return pts;
}

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> auc;
  double mean_auc = 0.0;
  std::size_t excluded_classes = 0;
  std::vector<std::vector<RocPoint>> roc;
  std::size_t param_count = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["mean_auc"] = mean_auc;
    j["excluded_classes"] = excluded_classes;
    j["param_count"] = param_count;
    for (std::size_t c = 0; c < auc.size(); ++c)
      j["per_class"][class_names[c]] = auc[c] ? nlohmann::json(*auc[c]) : nlohmann::json(nullptr);
    return j;
  }

  std::string roc_csv(std::size_t c) const {
    std::string out = "fpr,tpr\n";
    for (const auto& p : roc[c]) out += format_double(p.fpr) + "," + format_double(p.tpr) + "\n";
    return out;
  }
};

/// Scores an NxC probability matrix against binary ground truth (value >=
/// 0.5 is positive; masked-out slots are skipped per class).
inline EvalReport evaluate_scores(const Tensor& scores, const ResolvedTargets& truth,
                                  const std::vector<std::string>& class_names, std::size_t param_count) {
  if (scores.rows() == 0) throw ContractError("evaluate: empty dataset");
  if (!scores.same_shape(truth.values))
    throw DimensionError("evaluate: scores " + scores.shape_string() + " vs ground truth " +
                         truth.values.shape_string());
  if (class_names.size() != scores.cols()) throw DimensionError("evaluate: class name count mismatch");
  EvalReport rep;
  rep.class_names = class_names;
  rep.param_count = param_count;
  double total = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < scores.cols(); ++c) {
    std::vector<double> s;
    std::vector<std::uint8_t> l;
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      if (!truth.mask[i * scores.cols() + c]) continue;
      s.push_back(scores(i, c));
      l.push_back(truth.values(i, c) >= 0.5 ? 1 : 0);
    }
    std::optional<double> a;
    if (!s.empty()) a = roc_auc(s, l);
    rep.auc.push_back(a);
    rep.roc.push_back(s.empty() ? std::vector<RocPoint>{{0, 0}, {1, 1}} : roc_curve(s, l));
    if (a) {
      total += *a;
      ++defined;
    } else {
      ++rep.excluded_classes;
    }
  }
  rep.mean_auc = defined ? total / static_cast<double>(defined) : std::nan("");
  return rep;
}

/// A model to evaluate: spec plus trained weights.
struct TrainedModel {
  ModelSpec spec;
  Parameters params;
};

struct EvalSet {
  Tensor features;
  ResolvedTargets truth;
  std::vector<std::string> class_names;
};

inline EvalReport evaluate(const TrainedModel& m, const EvalSet& set) {
  if (m.spec.output_width != set.truth.cols())
    throw DimensionError("evaluate: model '" + m.spec.name + "' outputs " + std::to_string(m.spec.output_width) +
                         " classes, ground truth has " + std::to_string(set.truth.cols()));
  if (set.features.rows() == 0) throw ContractError("evaluate: empty dataset");
  return evaluate_scores(forward(m.spec, m.params, set.features), set.truth, set.class_names, param_count(m.spec));
}

/// Averages member probabilities; the parameter count is the members' sum.
inline Tensor ensemble_predict(std::span<const TrainedModel> models, const Tensor& features) {
  if (models.empty()) throw ContractError("ensemble: no members");
  Tensor acc;
  for (const auto& m : models) {
    Tensor p = forward(m.spec, m.params, features);
    if (acc.data.empty()) {
      acc = std::move(p);
    } else {
      if (!p.same_shape(acc)) throw DimensionError("ensemble: member '" + m.spec.name + "' output shape differs");
      for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += p.data[i];
    }
  }
  const double n = static_cast<double>(models.size());
  for (double& v : acc.data) v /= n;
  return acc;
}

inline EvalReport ensemble_evaluate(std::span<const TrainedModel> models, const EvalSet& set) {
  if (models.empty()) throw ContractError("ensemble_evaluate: empty model list");
  std::size_t params = 0;
  for (const auto& m : models) {
    if (m.spec.output_width != set.truth.cols())
      throw DimensionError("ensemble_evaluate: member '" + m.spec.name + "' has the wrong class count");
    params += param_count(m.spec);
  }
  if (set.features.rows() == 0) throw ContractError("evaluate: empty dataset");
  return evaluate_scores(ensemble_predict(models, set.features), set.truth, set.class_names, params);
}

// Ablation

inline const std::vector<std::string>& ablation_arms() {
  static const std::vector<std::string> arms{"B", "B+MODL", "B+KNNS", "B+MODL+KNNS"};
  return arms;
}

struct ArmSummary {
  std::string arm;
  std::vector<double> class_auc;    // per class, mean over seeds (NaN if never defined)
  std::vector<double> class_delta;  // per class, vs baseline
  double mean_auc = 0.0;            // mean over seeds of the report mean
  double spread = 0.0;              // sample standard deviation over seeds
  double mean_delta = 0.0;
  std::size_t seeds_above_baseline = 0;
  std::size_t seeds = 0;
};

struct AblationTable {
  std::vector<std::string> class_names;
  std::vector<ArmSummary> arms;

  std::string to_csv() const {
    std::string out = "arm";
    for (const auto& c : class_names) out += "," + c;
    out += ",mean_auc,spread";
    for (const auto& c : class_names) out += ",delta_" + c;
    out += ",delta_mean,seeds_above_baseline,seeds\n";
    for (const auto& a : arms) {
      out += a.arm;
      for (double v : a.class_auc) out += "," + format_double(v);
      out += "," + format_double(a.mean_auc) + "," + format_double(a.spread);
      for (double v : a.class_delta) out += "," + format_double(v);
      out += "," + format_double(a.mean_delta) + "," + std::to_string(a.seeds_above_baseline) + "," +
             std::to_string(a.seeds) + "\n";
    }
    return out;
  }
};

/// runs[arm][seed index] -> report. Every arm must cover the same seeds.
inline AblationTable ablation_report(const std::map<std::string, std::vector<EvalReport>>& runs) {
  std::vector<std::string> missing;
  for (const auto& arm : ablation_arms())
    if (!runs.contains(arm) || runs.at(arm).empty()) missing.push_back(arm);
  if (!missing.empty()) {
    std::string msg = "ablation_report: missing arms:";
    for (const auto& m : missing) msg += " " + m;
    throw ContractError(msg);
  }
  const auto& base = runs.at("B");
  const std::size_t seeds = base.size();
  const std::size_t C = base.front().auc.size();
  AblationTable t;
  t.class_names = base.front().class_names;

  auto class_mean = [&](const std::vector<EvalReport>& reps, std::size_t c) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : reps)
      if (r.auc[c]) {
        s += *r.auc[c];
        ++n;
      }
    return n ? s / static_cast<double>(n) : std::nan("");
  };

  for (const auto& arm : ablation_arms()) {
    const auto& reps = runs.at(arm);
    if (reps.size() != seeds) throw ContractError("ablation_report: arm " + arm + " has a different seed count");
    ArmSummary s;
    s.arm = arm;
    s.seeds = seeds;
    for (std::size_t c = 0; c < C; ++c) {
      s.class_auc.push_back(class_mean(reps, c));
      s.class_delta.push_back(s.class_auc.back() - class_mean(base, c));
    }
    double sum = 0.0, base_sum = 0.0;
    for (std::size_t k = 0; k < seeds; ++k) {
      sum += reps[k].mean_auc;
      base_sum += base[k].mean_auc;
      if (reps[k].mean_auc > base[k].mean_auc) ++s.seeds_above_baseline;
    }
    s.mean_auc = sum / static_cast<double>(seeds);
    s.mean_delta = s.mean_auc - base_sum / static_cast<double>(seeds);
    double var = 0.0;
    for (const auto& r : reps) var += (r.mean_auc - s.mean_auc) * (r.mean_auc - s.mean_auc);
    s.spread = seeds > 1 ? std::sqrt(var / static_cast<double>(seeds - 1)) : 0.0;
    t.arms.push_back(std::move(s));
  }
  return t;
}

}  // namespace modl
