// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace modl;
using modl::testing::all_in;
using modl::testing::random_tensor;
using modl::testing::slurp;
using modl::testing::soft_from;
using modl::testing::TempDir;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

// 1: analytic vs central-difference gradients.
Outcome gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst[4] = {0, 0, 0, 0};
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t B = 4, K = 2, D = 4, C = 3;
    const Tensor y = random_tensor(B, C, rng, 0, 1);
    ResolvedTargets t = all_in(y);
    for (double& v : t.values.data) v = v < 0.5 ? 0.0 : 1.0;
    t.mask[static_cast<std::size_t>(trial) % t.mask.size()] = 0;
    const Tensor soft = random_tensor(B, C, rng, 0, 1);
    std::vector<double> s(B * K);
    for (double& v : s) v = u(rng);
    const std::vector<Tensor> probs{random_tensor(B, C, rng, 0.05, 0.95), random_tensor(B * K, C, rng, 0.05, 0.95)};

    auto bce = [&](Graph& g, std::span<const NodeId> p) { return bce_loss(g, p[0], t); };
    auto dis = [&](Graph& g, std::span<const NodeId> p) { return distribution_loss(g, soft, p[0]); };
    auto nb = [&](Graph& g, std::span<const NodeId> p) { return neighbor_loss(g, p[0], p[1], s, K); };
    worst[0] = std::max(worst[0], grad_check(bce, probs, 1e-6));
    worst[1] = std::max(worst[1], grad_check(dis, probs, 1e-6));
    worst[2] = std::max(worst[2], grad_check(nb, probs, 1e-6));

    // Full objective through a small tanh network; neighbors share weights.
    const ModelSpec spec{"gc", {5}, Activation::Tanh, static_cast<std::uint64_t>(trial), D, C};
    const Parameters init = init_parameters(spec);
    std::vector<Tensor> point = init.tensors;
    for (std::size_t i = 1; i < point.size(); i += 2)
      for (double& v : point[i].data) v = u(rng) - 0.5;
    const Tensor xa = random_tensor(B, D, rng), xn = random_tensor(B * K, D, rng);
    auto full = [&](Graph& g, std::span<const NodeId> p) {
      const NodeId a = build_forward(g, spec, p, g.constant(xa));
      const NodeId n = build_forward(g, spec, p, g.constant(xn));
      return weighted_total(g, bce_loss(g, a, t), distribution_loss(g, soft, a), neighbor_loss(g, a, n, s, K),
                            {0.1, 0.1});
    };
    worst[3] = std::max(worst[3], grad_check(full, point, 1e-6));
  }
  const double secs = seconds_since(t0);
  const double w = *std::max_element(worst, worst + 4);
  std::ostringstream os;
  os << "max rel err bce=" << worst[0] << " distri=" << worst[1] << " neigh=" << worst[2] << " total=" << worst[3]
     << " in " << secs << "s";
  return {w < 1e-5 && secs < 10.0, os.str()};
}

// 2: KL identities and worked values.
Outcome kl_identities() {
  std::mt19937_64 rng(202);
  double self_worst = 0.0;
  bool nonneg = true;
  for (int i = 0; i < 1000; ++i) {
    const Tensor l = random_tensor(1, 5, rng, 0, 1);
    Graph g;
    self_worst = std::max(self_worst, std::abs(g.value(distribution_loss(g, l, g.constant(l))).data[0]));
    const Tensor q = random_tensor(1, 5, rng, 0, 1);
    Graph h;
    nonneg = nonneg && h.value(distribution_loss(h, l, h.constant(q))).data[0] >= 0.0;
  }
  Graph g1;
  const double ln2 = g1.value(distribution_loss(g1, Tensor({1, 1}, {1.0}), g1.constant(Tensor({1, 1}, {0.5})))).data[0];
  Graph g2;
  const double two = g2.value(distribution_loss(g2, Tensor({1, 2}, {0.8, 0.2}),
                                                g2.constant(Tensor({1, 2}, {0.6, 0.4})))).data[0];
  const bool ok = self_worst <= 1e-10 && nonneg && std::abs(ln2 - std::log(2.0)) <= 1e-9 &&
                  std::abs(two - 0.183032443698871) <= 1e-9;
  std::ostringstream os;
  os.precision(15);
  os << "self max=" << self_worst << " nonneg=" << nonneg << " ln2 case=" << ln2 << " two-class=" << two;
  return {ok, os.str()};
}

// 3: pool against an independent full sort.
Outcome pool_vs_brute() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  std::size_t mismatches = 0, checked = 0;
  for (int ds = 0; ds < 50; ++ds) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(12, 500)(rng);
    const std::size_t C = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    Tensor v = random_tensor(n, C, rng, 0, 1);
    if (ds % 2 == 0)  // coarse grid forces distance ties
      for (double& x : v.data) x = std::round(x * 4.0) / 4.0;
    SoftLabelDistribution d = soft_from(v);
    std::vector<std::uint64_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    d.sample_ids = ids;
    for (std::size_t K : {1, 3, 9}) {
      const double sigma = 0.5 + ds * 0.05;
      const NeighborPool pool = build_neighbor_pool(d, K, sigma);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::uint64_t>> all;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          double s = 0.0;
          for (std::size_t c = 0; c < C; ++c) s += (v(i, c) - v(j, c)) * (v(i, c) - v(j, c));
          all.emplace_back(s, ids[j]);
        }
        std::sort(all.begin(), all.end());
        const auto& got = pool.anchors[i].neighbors;
        ++checked;
        bool same = pool.anchors[i].anchor == ids[i] && got.size() == K;
        for (std::size_t k = 0; same && k < K; ++k)
          same = got[k].id == all[k].second && got[k].sq_distance == all[k].first &&
                 std::abs(got[k].similarity - std::exp(-all[k].first / (2.0 * sigma * sigma))) <= 1e-12;
        mismatches += !same;
      }
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << mismatches << " mismatched anchors of " << checked << " in " << secs << "s";
  return {mismatches == 0 && secs < 30.0, os.str()};
}

// 4: rank AUC against the pairwise definition.
Outcome auc_vs_pairwise() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  std::size_t bad_degenerate = 0, degenerate = 0;
  for (int set = 0; set < 200; ++set) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
    const int levels = set % 3 == 0 ? 5 : 1000000;
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    const double pos_rate = set % 10 == 0 ? 0.0 : (set % 10 == 1 ? 1.0 : 0.3);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = std::uniform_int_distribution<int>(0, levels)(rng) / static_cast<double>(levels);
      labels[i] = std::uniform_real_distribution<double>(0, 1)(rng) < pos_rate;
    }
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (labels[i] && !labels[j]) {
          pairs += 1.0;
          wins += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
        }
    const auto got = roc_auc(scores, labels);
    if (pairs == 0.0) {
      ++degenerate;
      bad_degenerate += got.has_value();
    } else if (!got) {
      worst = 1.0;
    } else {
      worst = std::max(worst, std::abs(*got - wins / pairs));
    }
  }
  std::ostringstream os;
  os << "max abs diff " << worst << ", " << degenerate << " degenerate sets, " << bad_degenerate << " mishandled";
  return {worst <= 1e-12 && bad_degenerate == 0 && degenerate > 0, os.str()};
}

// 5: zero loss weights reproduce the baseline parameters exactly.
Outcome zero_weights_match_baseline() {
  SynthConfig s;
  s.n_samples = 400;
  s.feature_width = 8;
  s.classes = 3;
  s.flip_rate = 0.2;
  s.uncertain_fraction = 0.15;
  const SplitDatasets parts = split(generate_synthetic(s), {}, 1);
  const auto train = TrainingSet::from(parts.train, resolve(parts.train, LabelPolicy::ones(), 0));
  const auto valid = TrainingSet::from(parts.valid, resolve(parts.valid, LabelPolicy::ones(), 1));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.k = 5;
  std::vector<TrainedModel> refs;
  for (const ModelSpec& r : {ModelSpec{"r1", {16}, Activation::Relu, 1, 8, 3},
                             ModelSpec{"r2", {12}, Activation::Tanh, 2, 8, 3}})
    refs.push_back({r, train_reference(train, valid, r, cfg).best});
  const auto d = distill_setup(refs, train, cfg);
  const ModelSpec target{"t", {16, 8}, Activation::Relu, 7, 8, 3};
  const auto base = train_reference(train, valid, target, cfg);
  TrainConfig zero = cfg;
  zero.weights = {0.0, 0.0};
  const auto t = train_target(train, valid, target, &d.soft, &d.pool, zero);
  std::ostringstream os;
  os << "baseline " << hex64(base.best.checksum()) << " zero-weight target " << hex64(t.best.checksum());
  return {base.best.checksum() == t.best.checksum() && base.best == t.best, os.str()};
}

struct DefaultRun {
  ExperimentResult result;
  std::vector<KSweepRow> sweep;
  std::filesystem::path dir;
  double run_seconds = 0.0;
};

// 6: every added term beats the baseline in most seeds.
Outcome ablation(const DefaultRun& r) {
  const auto& seeds = r.result.seeds;
  std::ostringstream os;
  bool ok = seeds.size() == 5 && r.run_seconds < 600.0;
  for (const char* arm : {"B+MODL", "B+KNNS", "B+MODL+KNNS"}) {
    std::size_t wins = 0;
    for (const auto& s : seeds) wins += s.arms.at(arm).mean_auc > s.arms.at("B").mean_auc;
    ok = ok && wins >= 4;
    os << arm << " beats B in " << wins << "/" << seeds.size() << "; ";
  }
  os << "run took " << r.run_seconds << "s";
  return {ok, os.str()};
}

// 7: K-sweep monotone between the smallest and default K.
Outcome k_sweep_check(const DefaultRun& r) {
  double i3 = 0.0, i9 = 0.0;
  bool have3 = false, have9 = false;
  std::ostringstream os;
  for (const auto& row : r.sweep) {
    os << "K=" << row.k << ":" << row.improvement << " ";
    if (row.k == 3) i3 = row.improvement, have3 = true;
    if (row.k == 9) i9 = row.improvement, have9 = true;
  }
  const bool csv = std::filesystem::exists(r.dir / "k_sweep.csv");
  return {have3 && have9 && i9 >= i3 && csv && r.sweep.size() == 5, os.str()};
}

// 8: compact target against the full ensemble.
Outcome compression(const DefaultRun& r) {
  double ens = 0.0, tgt = 0.0;
  for (const auto& s : r.result.seeds) {
    ens += s.ensemble.mean_auc;
    tgt += s.arms.at("B+MODL+KNNS").mean_auc;
  }
  const double n = static_cast<double>(r.result.seeds.size());
  ens /= n;
  tgt /= n;
  std::ostringstream os;
  os << "params " << r.result.target_params << " vs " << r.result.ensemble_params << "; mean AUC target " << tgt
     << " ensemble " << ens << " gap " << (ens - tgt) * 100.0 << " points";
  return {r.result.target_params < r.result.ensemble_params && ens - tgt <= 0.01, os.str()};
}

// 9: byte-identical metrics across two runs.
Outcome determinism() {
  TempDir a("acc-det-a"), b("acc-det-b");
  auto cfg = load_config(std::filesystem::path(MODL_SOURCE_DIR) / "configs" / "small.ini");
  cfg.output_dir = a.path();
  run_experiment(cfg, 1);
  cfg.output_dir = b.path();
  run_experiment(cfg, 2);
  const bool same = slurp(a.path() / "metrics.csv") == slurp(b.path() / "metrics.csv");
  return {same, same ? "metrics.csv identical" : "metrics.csv differs"};
}

}  // namespace

int main() {
  log_threshold() = LogLevel::Warn;
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  int failures = 0;
  auto report_line = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report_line(1, "gradient check", gradients);
  report_line(2, "KL identities", kl_identities);
  report_line(3, "neighbor pool vs brute force", pool_vs_brute);
  report_line(4, "AUC vs pairwise", auc_vs_pairwise);
  report_line(5, "zero weights reproduce baseline", zero_weights_match_baseline);

  TempDir dir("acc-default");
  DefaultRun run;
  std::string run_error;
  try {
    auto cfg = load_config(std::filesystem::path(MODL_SOURCE_DIR) / "configs" / "default.ini");
    cfg.output_dir = dir.path();
    run.dir = dir.path();
    const auto t0 = Clock::now();
    run.result = run_experiment(cfg, workers);
    run.run_seconds = seconds_since(t0);
    run.sweep = k_sweep(cfg, cfg.eval.k_sweep, workers);
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  auto with_run = [&](Outcome (*fn)(const DefaultRun&)) {
    return [&, fn]() -> Outcome {
      if (!run_error.empty()) return {false, "default run failed: " + run_error};
      return fn(run);
    };
  };
  report_line(6, "ablation gains", with_run(ablation));
  report_line(7, "K-sweep", with_run(k_sweep_check));
  report_line(8, "target vs ensemble", with_run(compression));
  report_line(9, "determinism", determinism);
  return failures == 0 ? 0 : 1;
}
