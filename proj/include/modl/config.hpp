// SPDX-License-Identifier: Apache-2.0
/**
 * @file   config.hpp
 * @brief  Experiment configuration: an INI-style file with [dataset], [zoo],
 *         [train], [eval] and [output] sections.
 *
 * Dialect: `key = value` lines, `#` or `;` starts a comment, blank lines are
 * ignored, keys are unique within a section except `reference` in [zoo].
 * Unknown sections or keys are errors. dataset.path is resolved against the
 * config file's directory, output.dir against the working directory.
 */
#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "modl/dataset.hpp"
#include "modl/evaluation.hpp"
#include "modl/model_spec.hpp"
#include "modl/trainer.hpp"

namespace modl {

/// One problem found in a config file. line 0 means "not tied to a line".
struct ConfigIssue {
  std::size_t line = 0;
  std::string field;  // "section.key"
  std::string message;

  std::string to_string() const {
    std::string s;
    if (line) s += "line " + std::to_string(line) + ": ";
    if (!field.empty()) s += field + ": ";
    return s + message;
  }
};

/// Thrown with every issue found, not just the first.
struct ConfigErrors : ConfigError {
  std::vector<ConfigIssue> issues;
  explicit ConfigErrors(std::vector<ConfigIssue> all) : ConfigError(join(all)), issues(std::move(all)) {}

 private:
  static std::string join(const std::vector<ConfigIssue>& all) {
    std::string s;
    for (const auto& i : all) s += (s.empty() ? "" : "\n") + i.to_string();
    return s;
  }
};

enum class TestTruth { Clean, Noisy };

struct DatasetSection {
  std::string source = "synthetic";  // or "csv"
  std::filesystem::path path;
  SynthConfig synth{};
  SplitFractions fractions{};
  std::uint64_t split_seed = 1;
  TestTruth test_truth = TestTruth::Clean;
};

struct EvalSection {
  std::vector<std::string> arms = ablation_arms();
  std::vector<std::size_t> k_sweep{3, 5, 7, 9, 11};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

struct ExperimentConfig {
  DatasetSection dataset;
  std::optional<Zoo> zoo;  // empty: default_zoo(D, C)
  TrainConfig train;
  EvalSection eval;
  std::filesystem::path output_dir = "runs/default";

  Zoo resolved_zoo(std::size_t D, std::size_t C) const {
    if (!zoo) return default_zoo(D, C);
    Zoo z = *zoo;
    for (auto& r : z.references) r.input_width = D, r.output_width = C;
    z.target.input_width = D;
    z.target.output_width = C;
    return z;
  }
};

namespace detail {

inline std::string trim_ws(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim_ws(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline std::string format_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

inline std::string format_list(const std::vector<std::uint64_t>& v, int) {
  std::string s;
  for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

template <class T>
bool parse_uint(const std::string& s, T& out) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return false;
  out = static_cast<T>(v);
  return true;
}

inline bool parse_real(const std::string& s, double& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "yes" || s == "1" || s == "on") return out = true, true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return out = false, true;
  return false;
}

/// "128x64" or "128,64".
inline bool parse_hidden(const std::string& s, std::vector<std::size_t>& out) {
  out.clear();
  std::string norm = s;
  for (char& ch : norm)
    if (ch == 'x') ch = ',';
  for (const auto& part : split_list(norm)) {
    std::size_t w = 0;
    if (!parse_uint(part, w) || w == 0) return false;
    out.push_back(w);
  }
  return !out.empty();
}

inline std::string format_hidden(const std::vector<std::size_t>& h) {
  std::string s;
  for (auto w : h) s += (s.empty() ? "" : "x") + std::to_string(w);
  return s;
}

/// "name hidden activation seed", e.g. "ref-mlp64 64x64 relu 303".
inline std::optional<ModelSpec> parse_model_line(const std::string& v, std::string& why) {
  std::istringstream in(v);
  std::string name, hidden, act, seed, extra;
  if (!(in >> name >> hidden >> act >> seed) || (in >> extra)) {
    why = "expected '<name> <hidden e.g. 128x64> <relu|tanh> <seed>'";
    return std::nullopt;
  }
  ModelSpec s;
  s.name = name;
  if (!parse_hidden(hidden, s.hidden)) {
    why = "bad hidden widths '" + hidden + "'";
    return std::nullopt;
  }
  if (act != "relu" && act != "tanh") {
    why = "activation must be relu or tanh, got '" + act + "'";
    return std::nullopt;
  }
  s.activation = parse_activation(act);
  if (!parse_uint(seed, s.init_seed)) {
    why = "bad seed '" + seed + "'";
    return std::nullopt;
  }
  return s;
}

inline std::string format_model_line(const ModelSpec& s) {
  return s.name + " " + format_hidden(s.hidden) + " " + to_string(s.activation) + " " + std::to_string(s.init_seed);
}

/// Train-split size implied by the dataset section, reading CSV row counts
/// if needed. nullopt if it cannot be determined.
inline std::optional<std::size_t> implied_train_size(const DatasetSection& d) {
  std::size_t n = 0;
  if (d.source == "synthetic") {
    n = d.synth.n_samples;
  } else {
    std::ifstream in(d.path);
    if (!in) return std::nullopt;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (!trim_ws(line).empty()) ++n;
    }
  }
  if (n < 3) return std::nullopt;
  try {
    return split_sizes(n, d.fractions)[0];
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Parses and validates config text. Throws ConfigErrors with every issue.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  ExperimentConfig cfg;
  std::vector<ConfigIssue> issues;
  std::map<std::string, std::size_t> seen;  // field -> line
  std::map<std::string, std::size_t> line_of;
  std::vector<ModelSpec> refs;
  std::optional<ModelSpec> target;
  std::string policy_name = "u-ones";
  std::optional<double> lsr_a, lsr_b;
  std::size_t policy_line = 0;

  std::istringstream in(text);
  std::string raw, section;
  std::size_t lineno = 0;
  static const std::map<std::string, std::vector<std::string>> known = {
      {"dataset",
       {"source", "path", "n_samples", "feature_width", "classes", "flip_rate", "uncertain_fraction", "separation",
        "seed", "train_fraction", "valid_fraction", "test_fraction", "split_seed", "test_truth"}},
      {"zoo", {"reference", "target"}},
      {"train",
       {"lambda", "gamma", "k", "sigma", "policy", "lsr_a", "lsr_b", "unmentioned", "lr", "beta1", "beta2", "epsilon",
        "batch_size", "epochs", "lr_decay_factor", "lr_decay_every", "stop_neighbor_grad", "include_self",
        "normalize_similarity"}},
      {"eval", {"arms", "k_sweep", "seeds"}},
      {"output", {"dir"}},
  };

  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (auto p = line.find_first_of("#;"); p != std::string::npos) line.resize(p);
    line = trim_ws(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.push_back({lineno, "", "unterminated section header"});
        continue;
      }
      section = trim_ws(line.substr(1, line.size() - 2));
      if (!known.contains(section)) {
        issues.push_back({lineno, section, "unknown section"});
        section = "?";
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({lineno, "", "expected 'key = value'"});
      continue;
    }
    const std::string key = trim_ws(line.substr(0, eq));
    const std::string val = trim_ws(line.substr(eq + 1));
    if (section.empty()) {
      issues.push_back({lineno, key, "key outside of any section"});
      continue;
    }
    if (section == "?") continue;
    const std::string field = section + "." + key;
    const auto& keys = known.at(section);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      issues.push_back({lineno, field, "unknown key"});
      continue;
    }
    if (field != "zoo.reference") {
      if (auto it = seen.find(field); it != seen.end()) {
        issues.push_back({lineno, field, "duplicate key (first set on line " + std::to_string(it->second) + ")"});
        continue;
      }
      seen[field] = lineno;
    }
    line_of[field] = lineno;

    auto bad = [&](const std::string& why) { issues.push_back({lineno, field, why}); };
    auto uint_into = [&](auto& dst) {
      if (!parse_uint(val, dst)) bad("expected a non-negative integer, got '" + val + "'");
    };
    auto real_into = [&](double& dst) {
      if (!parse_real(val, dst)) bad("expected a finite number, got '" + val + "'");
    };
    auto bool_into = [&](bool& dst) {
      if (!parse_bool(val, dst)) bad("expected true or false, got '" + val + "'");
    };

    auto& d = cfg.dataset;
    auto& t = cfg.train;
    if (field == "dataset.source") {
      if (val != "synthetic" && val != "csv") bad("must be 'synthetic' or 'csv'");
      d.source = val;
    } else if (field == "dataset.path") {
      d.path = val;
      if (d.path.is_relative() && !base_dir.empty()) d.path = base_dir / d.path;
    } else if (field == "dataset.n_samples") uint_into(d.synth.n_samples);
    else if (field == "dataset.feature_width") uint_into(d.synth.feature_width);
    else if (field == "dataset.classes") uint_into(d.synth.classes);
    else if (field == "dataset.flip_rate") real_into(d.synth.flip_rate);
    else if (field == "dataset.uncertain_fraction") real_into(d.synth.uncertain_fraction);
    else if (field == "dataset.separation") real_into(d.synth.separation);
    else if (field == "dataset.seed") uint_into(d.synth.seed);
    else if (field == "dataset.train_fraction") real_into(d.fractions.train);
    else if (field == "dataset.valid_fraction") real_into(d.fractions.valid);
    else if (field == "dataset.test_fraction") real_into(d.fractions.test);
    else if (field == "dataset.split_seed") uint_into(d.split_seed);
    else if (field == "dataset.test_truth") {
      if (val == "clean") d.test_truth = TestTruth::Clean;
      else if (val == "noisy") d.test_truth = TestTruth::Noisy;
      else bad("must be 'clean' or 'noisy'");
    } else if (field == "zoo.reference" || field == "zoo.target") {
      std::string why;
      auto spec = parse_model_line(val, why);
      if (!spec) bad(why);
      else if (key == "target") target = *spec;
      else refs.push_back(*spec);
    } else if (field == "train.lambda") real_into(t.weights.lambda);
    else if (field == "train.gamma") real_into(t.weights.gamma);
    else if (field == "train.k") uint_into(t.k);
    else if (field == "train.sigma") real_into(t.sigma);
    else if (field == "train.policy") {
      policy_name = val;
      policy_line = lineno;
    } else if (field == "train.lsr_a") {
      double v = 0;
      real_into(v);
      lsr_a = v;
    } else if (field == "train.lsr_b") {
      double v = 0;
      real_into(v);
      lsr_b = v;
    } else if (field == "train.unmentioned") {
      if (val == "negative") t.unmentioned = UnmentionedRule::Negative;
      else if (val == "ignore") t.unmentioned = UnmentionedRule::Ignore;
      else bad("must be 'negative' or 'ignore'");
    } else if (field == "train.lr") real_into(t.base_lr);
    else if (field == "train.beta1") real_into(t.beta1);
    else if (field == "train.beta2") real_into(t.beta2);
    else if (field == "train.epsilon") real_into(t.adam_epsilon);
    else if (field == "train.batch_size") uint_into(t.batch_size);
    else if (field == "train.epochs") uint_into(t.epochs);
    else if (field == "train.lr_decay_factor") real_into(t.lr_decay_factor);
    else if (field == "train.lr_decay_every") uint_into(t.lr_decay_every);
    else if (field == "train.stop_neighbor_grad") bool_into(t.stop_neighbor_grad);
    else if (field == "train.include_self") bool_into(t.include_self);
    else if (field == "train.normalize_similarity") bool_into(t.normalize_similarity);
    else if (field == "eval.arms") {
      cfg.eval.arms = split_list(val);
      for (const auto& a : cfg.eval.arms) {
        const auto& all = ablation_arms();
        if (std::find(all.begin(), all.end(), a) == all.end())
          bad("unknown arm '" + a + "' (expected B, B+MODL, B+KNNS or B+MODL+KNNS)");
      }
    } else if (field == "eval.k_sweep") {
      cfg.eval.k_sweep.clear();
      for (const auto& s : split_list(val)) {
        std::size_t k = 0;
        if (!parse_uint(s, k) || k == 0) bad("K values must be positive integers, got '" + s + "'");
        cfg.eval.k_sweep.push_back(k);
      }
    } else if (field == "eval.seeds") {
      cfg.eval.seeds.clear();
      for (const auto& s : split_list(val)) {
        std::uint64_t v = 0;
        if (!parse_uint(s, v)) bad("seeds must be non-negative integers, got '" + s + "'");
        cfg.eval.seeds.push_back(v);
      }
    } else if (field == "output.dir") {
      cfg.output_dir = val;  // relative to the working directory
    }
  }

  // Cross-field checks. Each is attributed to the line that set the field.
  auto at = [&](const std::string& field) { return line_of.contains(field) ? line_of[field] : std::size_t{0}; };
  auto check = [&](const std::string& field, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      issues.push_back({at(field), field, e.what()});
    }
  };
  try {
    const double a = lsr_a.value_or(policy_name == "lsr-zeros" ? 0.0 : 0.55);
    const double b = lsr_b.value_or(policy_name == "lsr-zeros" ? 0.3 : 0.85);
    cfg.train.policy = parse_policy(policy_name, a, b);
    cfg.train.policy.validate();
  } catch (const Error& e) {
    issues.push_back({policy_line, "train.policy", e.what()});
  }
  auto& t = cfg.train;
  if (!(t.weights.lambda >= 0.0)) issues.push_back({at("train.lambda"), "train.lambda", "must be >= 0"});
  if (!(t.weights.gamma >= 0.0)) issues.push_back({at("train.gamma"), "train.gamma", "must be >= 0"});
  if (t.k == 0) issues.push_back({at("train.k"), "train.k", "must be at least 1"});
  if (!(t.sigma > 0.0)) issues.push_back({at("train.sigma"), "train.sigma", "must be positive"});
  if (!(t.base_lr > 0.0)) issues.push_back({at("train.lr"), "train.lr", "must be positive"});
  if (!(t.beta1 >= 0.0 && t.beta1 < 1.0)) issues.push_back({at("train.beta1"), "train.beta1", "must be in [0, 1)"});
  if (!(t.beta2 >= 0.0 && t.beta2 < 1.0)) issues.push_back({at("train.beta2"), "train.beta2", "must be in [0, 1)"});
  if (!(t.adam_epsilon > 0.0)) issues.push_back({at("train.epsilon"), "train.epsilon", "must be positive"});
  if (t.batch_size == 0) issues.push_back({at("train.batch_size"), "train.batch_size", "must be positive"});
  if (t.epochs == 0) issues.push_back({at("train.epochs"), "train.epochs", "must be positive"});
  if (!(t.lr_decay_factor >= 1.0))
    issues.push_back({at("train.lr_decay_factor"), "train.lr_decay_factor", "must be >= 1"});
  if (t.lr_decay_every == 0)
    issues.push_back({at("train.lr_decay_every"), "train.lr_decay_every", "must be positive"});

  auto& d = cfg.dataset;
  if (d.source == "synthetic") {
    check("dataset.flip_rate", [&] { d.synth.validate(); });
  } else {
    if (d.path.empty()) issues.push_back({0, "dataset.path", "required when source = csv"});
    else if (!std::filesystem::exists(d.path))
      issues.push_back({at("dataset.path"), "dataset.path", "file not found: " + d.path.string()});
    if (d.test_truth == TestTruth::Clean && line_of.contains("dataset.test_truth"))
      issues.push_back({at("dataset.test_truth"), "dataset.test_truth", "clean truth needs synthetic data"});
    d.test_truth = TestTruth::Noisy;
  }
  {
    const auto& f = d.fractions;
    if (!(f.train > 0 && f.valid > 0 && f.test > 0) || std::abs(f.train + f.valid + f.test - 1.0) > 1e-9)
      issues.push_back({at("dataset.train_fraction"), "dataset.train_fraction",
                        "train/valid/test fractions must be positive and sum to 1"});
  }
  if (cfg.eval.seeds.empty()) issues.push_back({at("eval.seeds"), "eval.seeds", "at least one seed is required"});

  if (!refs.empty() || target) {
    Zoo z = default_zoo(1, 1);
    if (!refs.empty()) z.references = refs;
    if (target) z.target = *target;
    for (auto& r : z.references) r.input_width = r.output_width = 1;
    z.target.input_width = z.target.output_width = 1;
    check(refs.empty() ? "zoo.target" : "zoo.reference", [&] { z.validate(); });
    cfg.zoo = z;
  }

  if (issues.empty() || std::none_of(issues.begin(), issues.end(), [](const ConfigIssue& i) {
        return i.field.starts_with("dataset.");
      })) {
    if (auto n = implied_train_size(d); n && t.k >= *n) {
      issues.push_back({at("train.k"), "train.k",
                        "K=" + std::to_string(t.k) + " needs more than " + std::to_string(t.k) +
                            " training samples but the train split has " + std::to_string(*n) +
                            "; set k to at most " + std::to_string(*n == 0 ? 0 : *n - 1) +
                            " (the pool would clamp it to n-1)"});
    }
  }

  std::stable_sort(issues.begin(), issues.end(),
                   [](const ConfigIssue& a, const ConfigIssue& b) { return a.line < b.line; });
  if (!issues.empty()) throw ConfigErrors(std::move(issues));
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigErrors({{0, "", "cannot read config file " + path.string()}});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

/// Canonical text form. parse_config(to_ini(c)) reproduces c.
inline std::string to_ini(const ExperimentConfig& c) {
  using detail::format_list;
  std::ostringstream o;
  const auto& d = c.dataset;
  o << "[dataset]\nsource = " << d.source << "\n";
  if (d.source == "csv") o << "path = " << std::filesystem::absolute(d.path).string() << "\n";
  o << "n_samples = " << d.synth.n_samples << "\nfeature_width = " << d.synth.feature_width
    << "\nclasses = " << d.synth.classes << "\nflip_rate = " << format_double(d.synth.flip_rate)
    << "\nuncertain_fraction = " << format_double(d.synth.uncertain_fraction)
    << "\nseparation = " << format_double(d.synth.separation) << "\nseed = " << d.synth.seed
    << "\ntrain_fraction = " << format_double(d.fractions.train)
    << "\nvalid_fraction = " << format_double(d.fractions.valid)
    << "\ntest_fraction = " << format_double(d.fractions.test) << "\nsplit_seed = " << d.split_seed
    << "\ntest_truth = " << (d.test_truth == TestTruth::Clean ? "clean" : "noisy") << "\n\n[zoo]\n";
  if (c.zoo) {
    for (const auto& r : c.zoo->references) o << "reference = " << detail::format_model_line(r) << "\n";
    o << "target = " << detail::format_model_line(c.zoo->target) << "\n";
  } else {
    o << "# default zoo\n";
  }
  const auto& t = c.train;
  const auto pol = t.policy.to_string();
  o << "\n[train]\nlambda = " << format_double(t.weights.lambda) << "\ngamma = " << format_double(t.weights.gamma)
    << "\nk = " << t.k << "\nsigma = " << format_double(t.sigma) << "\npolicy = " << pol.substr(0, pol.find('('))
    << "\n";
  if (t.policy.is_lsr()) o << "lsr_a = " << format_double(t.policy.a) << "\nlsr_b = " << format_double(t.policy.b) << "\n";
  o << "unmentioned = " << (t.unmentioned == UnmentionedRule::Negative ? "negative" : "ignore")
    << "\nlr = " << format_double(t.base_lr) << "\nbeta1 = " << format_double(t.beta1)
    << "\nbeta2 = " << format_double(t.beta2) << "\nepsilon = " << format_double(t.adam_epsilon)
    << "\nbatch_size = " << t.batch_size << "\nepochs = " << t.epochs
    << "\nlr_decay_factor = " << format_double(t.lr_decay_factor) << "\nlr_decay_every = " << t.lr_decay_every
    << "\nstop_neighbor_grad = " << (t.stop_neighbor_grad ? "true" : "false")
    << "\ninclude_self = " << (t.include_self ? "true" : "false")
    << "\nnormalize_similarity = " << (t.normalize_similarity ? "true" : "false") << "\n\n[eval]\narms = ";
  for (std::size_t i = 0; i < c.eval.arms.size(); ++i) o << (i ? "," : "") << c.eval.arms[i];
  o << "\nk_sweep = " << format_list(c.eval.k_sweep) << "\nseeds = " << format_list(c.eval.seeds, 0)
    << "\n\n[output]\ndir = " << c.output_dir.string() << "\n";
  return o.str();
}

}  // namespace modl
