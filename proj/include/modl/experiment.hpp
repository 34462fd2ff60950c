// SPDX-License-Identifier: Apache-2.0
/**
 * @file   experiment.hpp
 * @brief  End-to-end experiment runner: data, stage-1 references, distillation
 *         artifacts, stage-2 arms, evaluation, ablation and K-sweep tables,
 *         plus the text report over an output directory.
 *
 * Output layout (relative to the output directory):
 *   config.ini                       resolved config snapshot
 *   manifest.json                    config hash, seeds, completed artifacts
 *   metrics.csv                      one row per (seed, model)
 *   ablation.csv                     per-arm summary over seeds
 *   ensemble_comparison.csv          ensemble vs single targets
 *   k_sweep.csv                      written by k_sweep()
 *   seed-<s>/references/<model>.*    checkpoints, logs, eval
 *   seed-<s>/soft_labels.bin
 *   seed-<s>/pool_k<K>.bin
 *   seed-<s>/arms/<arm>/              target checkpoint, logs, eval, ROC
 *   seed-<s>/sweep/k<K>/              K-sweep targets (K != train.k)
 *
 * Every artifact has a sibling `.key` file holding the hash of its inputs;
 * an artifact is reused when its key matches and it loads cleanly.
 */
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "modl/config.hpp"
#include "modl/evaluation.hpp"
#include "modl/trainer.hpp"

namespace modl {

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<EvalReport> references;  // zoo order
  EvalReport ensemble;
  std::map<std::string, EvalReport> arms;
};

struct ExperimentResult {
  std::vector<std::string> reference_names;
  std::string target_name;
  std::size_t target_params = 0;
  std::size_t ensemble_params = 0;
  std::vector<SeedResult> seeds;
  std::optional<AblationTable> ablation;
  std::string metrics_csv;
  std::string comparison_csv;
};

struct KSweepRow {
  std::size_t k = 0;
  double improvement = 0.0;  // mean over seeds of AUC(B+MODL+KNNS at K) - AUC(B)
  double mean_auc = 0.0;
  double baseline_auc = 0.0;
  std::size_t seeds = 0;
};

inline std::string k_sweep_csv(const std::vector<KSweepRow>& rows) {
  std::string out = "k,improvement,mean_auc,baseline_auc,seeds\n";
  for (const auto& r : rows)
    out += std::to_string(r.k) + "," + format_double(r.improvement) + "," + format_double(r.mean_auc) + "," +
           format_double(r.baseline_auc) + "," + std::to_string(r.seeds) + "\n";
  return out;
}

/// Loss weights for an ablation arm given the configured lambda/gamma.
inline LossWeights arm_weights(const std::string& arm, const LossWeights& w) {
  if (arm == "B") return {0.0, 0.0};
  if (arm == "B+MODL") return {w.lambda, 0.0};
  if (arm == "B+KNNS") return {0.0, w.gamma};
  if (arm == "B+MODL+KNNS") return w;
  throw ConfigError("unknown arm '" + arm + "'");
}

namespace detail {

inline std::uint64_t hash_parts(std::initializer_list<std::string> parts) {
  std::string s;
  for (const auto& p : parts) s += p + '\x1f';
  return hash_string(s);
}

/// Fields that influence stage-1 training.
inline std::string stage1_canonical(const TrainConfig& t) {
  return t.policy.to_string() + "|" + std::to_string(static_cast<int>(t.unmentioned)) + "|" +
         format_double(t.base_lr) + "|" + format_double(t.beta1) + "|" + format_double(t.beta2) + "|" +
         format_double(t.adam_epsilon) + "|" + std::to_string(t.batch_size) + "|" + std::to_string(t.epochs) + "|" +
         format_double(t.lr_decay_factor) + "|" + std::to_string(t.lr_decay_every) + "|" + std::to_string(t.seed);
}

inline std::string stage2_canonical(const TrainConfig& t) {
  return stage1_canonical(t) + "|" + format_double(t.weights.lambda) + "|" + format_double(t.weights.gamma) + "|" +
         std::to_string(t.k) + "|" + format_double(t.sigma) + "|" + std::to_string(t.stop_neighbor_grad) +
         std::to_string(t.include_self) + std::to_string(t.normalize_similarity);
}

inline bool key_matches(const std::filesystem::path& key_file, std::uint64_t key) {
  std::error_code ec;
  if (!std::filesystem::exists(key_file, ec)) return false;
  try {
    const auto b = read_file_bytes(key_file);
    return std::string(b.begin(), b.end()) == hex64(key) + "\n";
  } catch (const Error&) {
    return false;
  }
}

inline std::string history_csv(const TrainResult& r) {
  std::string out = "epoch,lr,mean_train_loss,valid_mean_auc\n";
  for (const auto& h : r.history)
    out += std::to_string(h.epoch) + "," + format_double(h.lr) + "," + format_double(h.mean_train_loss) + "," +
           format_double(h.valid_mean_auc) + "\n";
  return out;
}

inline std::string train_summary_json(const TrainResult& r) {
  nlohmann::json j;
  j["best_epoch"] = r.best_epoch;
  j["best_valid_auc"] = r.best_valid_auc;
  j["diverged"] = r.diverged;
  j["epochs_completed"] = r.history.size();
  return j.dump(2) + "\n";
}

/// Filesystem-safe form of a class or arm name.
inline std::string file_stem(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '+' && ch != '.') ch = '_';
  return s;
}

}  // namespace detail

/// Shared state for one experiment: data is prepared once, every stage is
/// cached on disk under the output directory.
class Experiment {
 public:
  Experiment(ExperimentConfig cfg, std::size_t workers) : cfg_(std::move(cfg)), workers_(std::max<std::size_t>(1, workers)) {
    out_ = cfg_.output_dir;
    prepare_data();
  }

  const ExperimentConfig& config() const { return cfg_; }
  const Zoo& zoo() const { return zoo_; }
  const std::filesystem::path& out_dir() const { return out_; }

  ExperimentResult run() {
    return guarded([&] { return run_impl(); });
  }

  std::vector<KSweepRow> k_sweep(const std::vector<std::size_t>& ks) {
    return guarded([&] { return sweep_impl(ks); });
  }

 private:
  struct SeedState {
    std::uint64_t seed = 0;
    TrainingSet train, valid;
    std::vector<TrainedModel> refs;
    std::vector<std::uint64_t> ref_keys;
    std::vector<EvalReport> ref_reports;
    EvalReport ensemble;
    SoftLabelDistribution soft;
    std::uint64_t soft_key = 0;
    std::map<std::size_t, NeighborPool> pools;
    std::map<std::size_t, std::uint64_t> pool_keys;
    std::shared_ptr<std::mutex> pool_mu = std::make_shared<std::mutex>();
  };

  ExperimentConfig cfg_;
  std::size_t workers_;
  std::filesystem::path out_;
  Zoo zoo_;
  SplitDatasets split_;
  EvalSet test_;
  std::uint64_t data_key_ = 0;
  std::vector<SeedState> seeds_;
  bool stage1_done_ = false;
  std::mutex mu_;
  std::set<std::string> artifacts_;

  template <class Fn>
  auto guarded(Fn&& fn) -> decltype(fn()) {
    std::filesystem::create_directories(out_);
    write_file_atomic(out_ / "config.ini", to_ini(cfg_));
    record("config.ini");
    try {
      auto r = fn();
      write_manifest("complete", "");
      return r;
    } catch (const std::exception& e) {
      write_manifest("failed", e.what());
      throw;
    }
  }

  void record(const std::filesystem::path& rel) {
    std::lock_guard lock(mu_);
    artifacts_.insert(rel.generic_string());
  }

  /// Records every existing file whose name starts with `stem` (cache hits).
  void record_siblings(const std::filesystem::path& dir_rel, const std::string& stem) {
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(out_ / dir_rel, ec)) {
      const auto name = e.path().filename().string();
      if (e.is_regular_file() && name.starts_with(stem) && !name.ends_with(".tmp")) record(dir_rel / name);
    }
  }

  void write(const std::filesystem::path& rel, std::string_view content) {
    write_file_atomic(out_ / rel, content);
    record(rel);
  }

  void write_key(const std::filesystem::path& rel_artifact, std::uint64_t key) {
    auto k = rel_artifact;
    k += ".key";
    write(k, hex64(key) + "\n");
  }

  bool cached(const std::filesystem::path& rel_artifact, std::uint64_t key) {
    auto k = out_ / rel_artifact;
    k += ".key";
    return detail::key_matches(k, key) && std::filesystem::exists(out_ / rel_artifact);
  }

  void write_manifest(const std::string& status, const std::string& error) {
    nlohmann::json j;
    j["config_hash"] = hex64(hash_string(to_ini_for_hash()));
    j["seeds"] = cfg_.eval.seeds;
    j["status"] = status;
    if (!error.empty()) j["error"] = error;
    {
      std::lock_guard lock(mu_);
      j["artifacts"] = std::vector<std::string>(artifacts_.begin(), artifacts_.end());
    }
    write_file_atomic(out_ / "manifest.json", j.dump(2) + "\n");
  }

  /// Snapshot without the output directory, so identical experiments hash
  /// identically wherever they are written.
  std::string to_ini_for_hash() const {
    ExperimentConfig c = cfg_;
    c.output_dir = "";
    return to_ini(c);
  }

  void prepare_data() {
    const auto& d = cfg_.dataset;
    Dataset full = d.source == "csv" ? load_csv(d.path) : generate_synthetic(d.synth);
    if (full.size() < 3) throw ConfigError("dataset has " + std::to_string(full.size()) + " samples; need at least 3");
    split_ = split(full, d.fractions, d.split_seed);
    zoo_ = cfg_.resolved_zoo(full.feature_width(), full.classes());
    zoo_.validate();
    const bool clean = d.test_truth == TestTruth::Clean && full.has_true_probs();
    test_ = {split_.test.feature_matrix(),
             clean ? clean_targets(split_.test)
                   : resolve(split_.test, cfg_.train.policy, derive_seed(d.split_seed, 0x7e57), cfg_.train.unmentioned),
             split_.test.class_names};
    data_key_ = detail::hash_parts({hex64(full.content_hash()), format_double(d.fractions.train),
                                    format_double(d.fractions.valid), format_double(d.fractions.test),
                                    std::to_string(d.split_seed), clean ? "clean" : "noisy"});
  }

  TrainConfig seed_config(std::uint64_t seed) const {
    TrainConfig t = cfg_.train;
    t.seed = seed;
    return t;
  }

  std::filesystem::path seed_dir(std::uint64_t seed) const { return "seed-" + std::to_string(seed); }

  // Stage 1

  void ensure_stage1() {
    if (stage1_done_) return;
    const auto& seeds = cfg_.eval.seeds;
    seeds_.assign(seeds.size(), {});
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      auto& st = seeds_[s];
      st.seed = seeds[s];
      const TrainConfig t = seed_config(st.seed);
      st.train = TrainingSet::from(split_.train, resolve(split_.train, t.policy, derive_seed(st.seed, 0x7a1), t.unmentioned));
      st.valid = TrainingSet::from(split_.valid, resolve(split_.valid, t.policy, derive_seed(st.seed, 0x7a11), t.unmentioned));
      st.refs.resize(zoo_.references.size());
      st.ref_keys.resize(zoo_.references.size());
      st.ref_reports.resize(zoo_.references.size());
    }
    const std::size_t R = zoo_.references.size();
    parallel_for(seeds_.size() * R, workers_, [&](std::size_t task) {
      auto& st = seeds_[task / R];
      const std::size_t r = task % R;
      const ModelSpec& spec = zoo_.references[r];
      const TrainConfig t = seed_config(st.seed);
      const std::uint64_t key = detail::hash_parts({hex64(data_key_), spec.canonical(), detail::stage1_canonical(t)});
      const auto base = seed_dir(st.seed) / "references" / spec.name;
      auto ckpt = base;
      ckpt += ".ckpt";
      Parameters params;
      bool hit = false;
      if (cached(ckpt, key)) {
        try {
          params = load_checkpoint(out_ / ckpt, spec);
          hit = true;
          record_siblings(base.parent_path(), spec.name + ".");
          log(LogLevel::Info, "stage 1 cache hit: seed " + std::to_string(st.seed) + " " + spec.name);
        } catch (const Error& e) {
          log(LogLevel::Warn, "stage 1 cache entry unreadable, retraining: " + std::string(e.what()));
        }
      }
      if (!hit) {
        log(LogLevel::Info, "stage 1 training: seed " + std::to_string(st.seed) + " " + spec.name);
        TrainResult res = train_reference(st.train, st.valid, spec, t);
        params = res.best;
        auto with = [&](const char* ext) {
          auto q = base;
          q += ext;
          return q;
        };
        write(with(".log.csv"), loss_log_csv(res.log));
        write(with(".history.csv"), detail::history_csv(res));
        write(with(".train.json"), detail::train_summary_json(res));
        const auto bytes = encode_checkpoint(spec, params);
        write(ckpt, std::string_view(bytes.data(), bytes.size()));
        write_key(ckpt, key);
      }
      st.refs[r] = {spec, std::move(params)};
      st.ref_keys[r] = key;
      st.ref_reports[r] = evaluate(st.refs[r], test_);
      auto ev = base;
      ev += ".eval.json";
      write(ev, st.ref_reports[r].to_json().dump(2) + "\n");
    });

    parallel_for(seeds_.size(), workers_, [&](std::size_t s) {
      auto& st = seeds_[s];
      st.ensemble = ensemble_evaluate(st.refs, test_);
      write(seed_dir(st.seed) / "ensemble.eval.json", st.ensemble.to_json().dump(2) + "\n");
      std::string parts;
      for (auto k : st.ref_keys) parts += hex64(k);
      st.soft_key = hash_string(parts);
      const auto rel = seed_dir(st.seed) / "soft_labels.bin";
      bool hit = false;
      if (cached(rel, st.soft_key)) {
        try {
          st.soft = read_soft_labels(out_ / rel);
          hit = st.soft.size() == st.train.size();
          record_siblings(rel.parent_path(), "soft_labels.bin");
        } catch (const Error& e) {
          log(LogLevel::Warn, "soft-label cache unreadable, rebuilding: " + std::string(e.what()));
        }
      }
      if (!hit) {
        std::vector<ModelPredictions> preds;
        for (const auto& r : st.refs)
          preds.push_back({r.spec.name, r.spec.hash() ^ r.params.checksum(), forward(r.spec, r.params, st.train.features)});
        st.soft = aggregate_soft_labels(preds, st.train.ids);
        const auto bytes = encode_soft_labels(st.soft);
        write(rel, std::string_view(bytes.data(), bytes.size()));
        write_key(rel, st.soft_key);
      }
    });
    stage1_done_ = true;
  }

  /// Pool for one seed at K (built from the frozen soft labels).
  const NeighborPool& pool(SeedState& st, std::size_t K) {
    std::lock_guard seed_lock(*st.pool_mu);
    if (auto it = st.pools.find(K); it != st.pools.end()) return it->second;
    const std::uint64_t key = detail::hash_parts({hex64(st.soft_key), std::to_string(K), format_double(cfg_.train.sigma),
                                                  std::to_string(cfg_.train.include_self)});
    const auto rel = seed_dir(st.seed) / ("pool_k" + std::to_string(K) + ".bin");
    NeighborPool p;
    bool hit = false;
    if (cached(rel, key)) {
      try {
        p = read_pool(out_ / rel);
        hit = true;
        record_siblings(rel.parent_path(), rel.filename().string());
      } catch (const Error& e) {
        log(LogLevel::Warn, "pool cache unreadable, rebuilding: " + std::string(e.what()));
      }
    }
    if (!hit) {
      log(LogLevel::Info, "building neighbor pool: seed " + std::to_string(st.seed) + " K=" + std::to_string(K));
      p = build_neighbor_pool(st.soft, K, cfg_.train.sigma, cfg_.train.include_self, 1);
      const auto bytes = encode_pool(p);
      write(rel, std::string_view(bytes.data(), bytes.size()));
      write_key(rel, key);
    }
    st.pool_keys[K] = key;
    return st.pools.emplace(K, std::move(p)).first->second;
  }

  // Stage 2

  std::filesystem::path arm_dir(const SeedState& st, const std::string& arm, std::size_t K) const {
    if (K == cfg_.train.k) return seed_dir(st.seed) / "arms" / arm;
    return seed_dir(st.seed) / "sweep" / ("k" + std::to_string(K));
  }

  EvalReport train_arm(SeedState& st, const std::string& arm, std::size_t K) {
    TrainConfig t = seed_config(st.seed);
    t.weights = arm_weights(arm, cfg_.train.weights);
    t.k = K;
    const bool need_pool = t.weights.gamma > 0.0;
    const NeighborPool* pl = need_pool ? &pool(st, K) : nullptr;
    std::string pool_part;
    if (need_pool) {
      std::lock_guard seed_lock(*st.pool_mu);
      pool_part = hex64(st.pool_keys.at(K));
    }
    const std::uint64_t key = detail::hash_parts(
        {hex64(st.soft_key), pool_part, zoo_.target.canonical(), detail::stage2_canonical(t)});
    const auto dir = arm_dir(st, arm, K);
    const auto ckpt = dir / "target.ckpt";
    Parameters params;
    bool hit = false;
    if (cached(ckpt, key)) {
      try {
        params = load_checkpoint(out_ / ckpt, zoo_.target);
        hit = true;
        record_siblings(dir, "");
        log(LogLevel::Info, "stage 2 cache hit: seed " + std::to_string(st.seed) + " " + arm + " K=" + std::to_string(K));
      } catch (const Error& e) {
        log(LogLevel::Warn, "stage 2 cache entry unreadable, retraining: " + std::string(e.what()));
      }
    }
    if (!hit) {
      log(LogLevel::Info, "stage 2 training: seed " + std::to_string(st.seed) + " " + arm + " K=" + std::to_string(K));
      TrainResult res = train_target(st.train, st.valid, zoo_.target, &st.soft, pl, t);
      params = res.best;
      write(dir / "train_log.csv", loss_log_csv(res.log));
      write(dir / "history.csv", detail::history_csv(res));
      write(dir / "train.json", detail::train_summary_json(res));
      const auto bytes = encode_checkpoint(zoo_.target, params);
      write(ckpt, std::string_view(bytes.data(), bytes.size()));
      write_key(ckpt, key);
    }
    EvalReport rep = evaluate({zoo_.target, params}, test_);
    write(dir / "eval.json", rep.to_json().dump(2) + "\n");
    for (std::size_t c = 0; c < rep.class_names.size(); ++c)
      write(dir / ("roc_" + detail::file_stem(rep.class_names[c]) + ".csv"), rep.roc_csv(c));
    return rep;
  }

  ExperimentResult run_impl() {
    ensure_stage1();
    const auto& arms = cfg_.eval.arms;
    std::vector<std::vector<EvalReport>> reps(seeds_.size(), std::vector<EvalReport>(arms.size()));
    parallel_for(seeds_.size() * arms.size(), workers_, [&](std::size_t task) {
      const std::size_t s = task / arms.size(), a = task % arms.size();
      reps[s][a] = train_arm(seeds_[s], arms[a], cfg_.train.k);
    });

    ExperimentResult res;
    for (const auto& r : zoo_.references) res.reference_names.push_back(r.name);
    res.target_name = zoo_.target.name;
    res.target_params = param_count(zoo_.target);
    res.ensemble_params = zoo_.ensemble_param_count();
    std::map<std::string, std::vector<EvalReport>> by_arm;
    for (std::size_t s = 0; s < seeds_.size(); ++s) {
      SeedResult sr{seeds_[s].seed, seeds_[s].ref_reports, seeds_[s].ensemble, {}};
      for (std::size_t a = 0; a < arms.size(); ++a) {
        sr.arms[arms[a]] = reps[s][a];
        by_arm[arms[a]].push_back(reps[s][a]);
      }
      res.seeds.push_back(std::move(sr));
    }

    res.metrics_csv = metrics_csv(res);
    write("metrics.csv", res.metrics_csv);
    bool all_arms = true;
    for (const auto& a : ablation_arms()) all_arms = all_arms && by_arm.contains(a);
    if (all_arms) {
      res.ablation = ablation_report(by_arm);
      write("ablation.csv", res.ablation->to_csv());
    } else {
      log(LogLevel::Warn, "not all four arms configured; ablation.csv not written");
    }
    res.comparison_csv = comparison_csv(res);
    write("ensemble_comparison.csv", res.comparison_csv);
    return res;
  }

  std::string metrics_csv(const ExperimentResult& res) const {
    std::string out = "seed,model,kind,param_count,mean_auc,excluded_classes";
    for (const auto& c : split_.test.class_names) out += ",auc_" + c;
    out += "\n";
    auto row = [&](std::uint64_t seed, const std::string& model, const std::string& kind, const EvalReport& r) {
      out += std::to_string(seed) + "," + model + "," + kind + "," + std::to_string(r.param_count) + "," +
             format_double(r.mean_auc) + "," + std::to_string(r.excluded_classes);
      for (const auto& a : r.auc) out += "," + (a ? format_double(*a) : std::string("nan"));
      out += "\n";
    };
    for (const auto& s : res.seeds) {
      for (std::size_t i = 0; i < s.references.size(); ++i)
        row(s.seed, res.reference_names[i], "reference", s.references[i]);
      row(s.seed, "ensemble", "ensemble", s.ensemble);
      for (const auto& arm : cfg_.eval.arms) row(s.seed, arm, "target", s.arms.at(arm));
    }
    return out;
  }

  std::string comparison_csv(const ExperimentResult& res) const {
    std::string out = "model,param_count,mean_auc,seeds\n";
    const double n = static_cast<double>(res.seeds.size());
    double ens = 0.0;
    for (const auto& s : res.seeds) ens += s.ensemble.mean_auc;
    out += "ensemble(" + std::to_string(res.reference_names.size()) + " references)," +
           std::to_string(res.ensemble_params) + "," + format_double(ens / n) + "," + std::to_string(res.seeds.size()) +
           "\n";
    for (const auto& arm : cfg_.eval.arms) {
      double m = 0.0;
      for (const auto& s : res.seeds) m += s.arms.at(arm).mean_auc;
      out += "target " + arm + "," + std::to_string(res.target_params) + "," + format_double(m / n) + "," +
             std::to_string(res.seeds.size()) + "\n";
    }
    return out;
  }

  std::vector<KSweepRow> sweep_impl(const std::vector<std::size_t>& ks) {
    if (ks.empty()) throw ConfigError("k_sweep: no K values given");
    for (auto k : ks)
      if (k == 0) throw ConfigError("k_sweep: K values must be positive");
    ensure_stage1();
    const std::size_t S = seeds_.size();
    std::vector<EvalReport> base(S);
    std::vector<std::vector<EvalReport>> at_k(ks.size(), std::vector<EvalReport>(S));
    parallel_for(S, workers_, [&](std::size_t s) { base[s] = train_arm(seeds_[s], "B", cfg_.train.k); });
    parallel_for(ks.size() * S, workers_, [&](std::size_t task) {
      const std::size_t k = task / S, s = task % S;
      at_k[k][s] = train_arm(seeds_[s], "B+MODL+KNNS", ks[k]);
    });
    std::vector<KSweepRow> rows;
    for (std::size_t k = 0; k < ks.size(); ++k) {
      KSweepRow r{ks[k], 0.0, 0.0, 0.0, S};
      for (std::size_t s = 0; s < S; ++s) {
        r.mean_auc += at_k[k][s].mean_auc;
        r.baseline_auc += base[s].mean_auc;
      }
      r.mean_auc /= static_cast<double>(S);
      r.baseline_auc /= static_cast<double>(S);
      r.improvement = r.mean_auc - r.baseline_auc;
      rows.push_back(r);
    }
    write("k_sweep.csv", k_sweep_csv(rows));
    return rows;
  }
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t workers = 1) {
  return Experiment(cfg, workers).run();
}

inline std::vector<KSweepRow> k_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& ks,
                                      std::size_t workers = 1) {
  return Experiment(cfg, workers).k_sweep(ks);
}

// Report

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_table(const std::filesystem::path& p) {
  const auto bytes = read_file_bytes(p);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split_csv_line(line));
  return rows;
}

inline std::string fixed(const std::string& v, int digits) {
  double d = 0.0;
  if (!parse_double(v, d)) return v;
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << d;
  return o.str();
}

inline std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (w.size() <= c) w.push_back(0);
      w[c] = std::max(w[c], r[c].size());
    }
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      out += rows[i][c];
      if (c + 1 < rows[i].size()) out += std::string(w[c] - rows[i][c].size() + 2, ' ');
    }
    out += "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (auto x : w) total += x + 2;
      out += std::string(total - 2, '-') + "\n";
    }
  }
  return out;
}

}  // namespace detail

/// Human-readable summary of an output directory. Throws Error listing what
/// to run when nothing is there.
inline std::string report(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path abl = dir / "ablation.csv", cmp = dir / "ensemble_comparison.csv", sweep = dir / "k_sweep.csv";
  if (!fs::exists(abl) && !fs::exists(cmp) && !fs::exists(sweep)) {
    throw Error("no results in '" + dir.string() +
                "': expected ablation.csv, ensemble_comparison.csv or k_sweep.csv. Run `modl run --config <file> --out " +
                dir.string() + "` (and `modl sweep-k` for the K-sweep) first");
  }
  std::string out;
  if (fs::exists(abl)) {
    auto t = detail::read_csv_table(abl);
    out += "Ablation (mean test AUC over seeds)\n";
    std::vector<std::vector<std::string>> rows{{"arm", "mean AUC", "spread", "delta vs B", "seeds > B"}};
    if (!t.empty()) {
      const auto& h = t[0];
      auto col = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(h.begin(), h.end(), name) - h.begin());
      };
      const auto m = col("mean_auc"), sp = col("spread"), d = col("delta_mean"), a = col("seeds_above_baseline"),
                 n = col("seeds");
      for (std::size_t i = 1; i < t.size(); ++i) {
        const auto& r = t[i];
        if (r.size() != h.size()) throw ParseError(abl.string() + ": malformed row " + std::to_string(i + 1));
        rows.push_back({r[0], detail::fixed(r[m], 4), detail::fixed(r[sp], 4), detail::fixed(r[d], 4),
                        r[a] + "/" + r[n]});
      }
    }
    out += detail::render_table(rows) + "\n";
  } else {
    out += "Ablation: not available (run `modl run`)\n\n";
  }
  if (fs::exists(sweep)) {
    auto t = detail::read_csv_table(sweep);
    out += "K-sweep (B+MODL+KNNS improvement over B)\n";
    std::vector<std::vector<std::string>> rows{{"K", "improvement", "mean AUC", "baseline AUC"}};
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (t[i].size() < 4) throw ParseError(sweep.string() + ": malformed row " + std::to_string(i + 1));
      rows.push_back({t[i][0], detail::fixed(t[i][1], 4), detail::fixed(t[i][2], 4), detail::fixed(t[i][3], 4)});
    }
    out += detail::render_table(rows) + "\n";
  } else {
    out += "K-sweep: not available (run `modl sweep-k`)\n\n";
  }
  if (fs::exists(cmp)) {
    auto t = detail::read_csv_table(cmp);
    out += "Single target vs reference ensemble\n";
    std::vector<std::vector<std::string>> rows{{"model", "params", "mean AUC"}};
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (t[i].size() < 3) throw ParseError(cmp.string() + ": malformed row " + std::to_string(i + 1));
      rows.push_back({t[i][0], t[i][1], detail::fixed(t[i][2], 4)});
    }
    out += detail::render_table(rows);
  } else {
    out += "Ensemble comparison: not available (run `modl run`)\n";
  }
  return out;
}

}  // namespace modl
