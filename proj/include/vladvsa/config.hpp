#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "vladvsa/data.hpp"
#include "vladvsa/error.hpp"
#include "vladvsa/harness.hpp"
#include "vladvsa/text.hpp"

namespace vladvsa {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Flat configuration surface shared by the config file and the CLI flags.
/// Defaults are the desk-scale preset; the paper-scale vocabulary is one
/// `k=32 k2=4` away.
struct Config {
  // synthetic data
  std::uint64_t domains = 4;
  std::uint64_t locals_per_sample = 16;
  std::uint64_t raw_dim = 8;
  double rho_cue = 0.2;
  double noise_sigma = 0.5;
  std::uint64_t samples_per_class = 200;
  double cue_scale = 2.0;
  double shift_scale = 1.0;
  std::uint64_t data_seed = 99;
  bool export_csv = false;
  // model
  std::uint64_t feat_dim = 8;
  std::uint64_t hidden_dim = 16;
  std::uint64_t disc_hidden = 16;
  // aggregation
  std::string aggregator = "vlad";  // vlad | gap
  std::uint64_t k = 8;
  std::uint64_t k2 = 1;
  double t = 3.0;
  std::string vocab_init = "random";  // random | kmeans
  std::uint64_t kmeans_iters = 25;
  bool intra_normalize_centers = true;
  // objective
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  double lambda3 = 0.1;
  double lambda4 = 0.1;
  double lambda5 = 0.1;
  double margin = 0.1;
  double grl_coeff = 1.0;
  // optimization
  std::uint64_t iterations = 500;
  double lr = 0.001;
  std::uint64_t lr_drop_iter = 300;
  double lr_dropped = 0.0001;
  double momentum = 0.9;
  std::uint64_t per_domain_real = 10;
  std::uint64_t per_domain_fake = 10;
  std::uint64_t seed = 7;
  std::uint64_t eval_every = 0;
  // harness
  std::uint64_t holdout = 4;
  std::uint64_t ablate_seeds = 5;
  std::uint64_t stats_samples = 140;
  // paths
  std::string data_dir = "data";
  std::string out_dir = "out";
  std::string checkpoint = "";
};

namespace config_detail {

using Field = std::variant<double Config::*, std::uint64_t Config::*,
                           bool Config::*, std::string Config::*>;

struct KeyDef {
  const char* name;
  Field field;
};

inline const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      {"domains", &Config::domains},
      {"locals_per_sample", &Config::locals_per_sample},
      {"raw_dim", &Config::raw_dim},
      {"rho_cue", &Config::rho_cue},
      {"noise_sigma", &Config::noise_sigma},
      {"samples_per_class", &Config::samples_per_class},
      {"cue_scale", &Config::cue_scale},
      {"shift_scale", &Config::shift_scale},
      {"data_seed", &Config::data_seed},
      {"export_csv", &Config::export_csv},
      {"feat_dim", &Config::feat_dim},
      {"hidden_dim", &Config::hidden_dim},
      {"disc_hidden", &Config::disc_hidden},
      {"aggregator", &Config::aggregator},
      {"k", &Config::k},
      {"k2", &Config::k2},
      {"t", &Config::t},
      {"vocab_init", &Config::vocab_init},
      {"kmeans_iters", &Config::kmeans_iters},
      {"intra_normalize_centers", &Config::intra_normalize_centers},
      {"lambda1", &Config::lambda1},
      {"lambda2", &Config::lambda2},
      {"lambda3", &Config::lambda3},
      {"lambda4", &Config::lambda4},
      {"lambda5", &Config::lambda5},
      {"margin", &Config::margin},
      {"grl_coeff", &Config::grl_coeff},
      {"iterations", &Config::iterations},
      {"lr", &Config::lr},
      {"lr_drop_iter", &Config::lr_drop_iter},
      {"lr_dropped", &Config::lr_dropped},
      {"momentum", &Config::momentum},
      {"per_domain_real", &Config::per_domain_real},
      {"per_domain_fake", &Config::per_domain_fake},
      {"seed", &Config::seed},
      {"eval_every", &Config::eval_every},
      {"holdout", &Config::holdout},
      {"ablate_seeds", &Config::ablate_seeds},
      {"stats_samples", &Config::stats_samples},
      {"data_dir", &Config::data_dir},
      {"out_dir", &Config::out_dir},
      {"checkpoint", &Config::checkpoint},
  };
  return table;
}

inline std::string get_value(const Config& cfg, const Field& field) {
  if (const auto* p = std::get_if<double Config::*>(&field))
    return format_double(cfg.**p);
  if (const auto* p = std::get_if<std::uint64_t Config::*>(&field))
    return std::to_string(cfg.**p);
  if (const auto* p = std::get_if<bool Config::*>(&field))
    return cfg.**p ? "true" : "false";
  return cfg.*std::get<std::string Config::*>(field);
}

inline void set_value(Config& cfg, const Field& field, const std::string& value,
                      const std::string& where) {
  try {
    if (const auto* p = std::get_if<double Config::*>(&field)) {
      cfg.**p = parse_double(value);
    } else if (const auto* p = std::get_if<std::uint64_t Config::*>(&field)) {
      cfg.**p = parse_u64(value);
    } else if (const auto* p = std::get_if<bool Config::*>(&field)) {
      if (value == "true") {
        cfg.**p = true;
      } else if (value == "false") {
        cfg.**p = false;
      } else {
        throw std::invalid_argument("expected true or false, got '" + value + "'");
      }
    } else {
      cfg.*std::get<std::string Config::*>(field) = value;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace config_detail

/// Assigns one key. "lambda" fans out to all five weights.
inline void config_set(Config& cfg, const std::string& key,
                       const std::string& value, const std::string& where) {
  if (key == "lambda") {
    for (const char* k : {"lambda1", "lambda2", "lambda3", "lambda4", "lambda5"})
      config_set(cfg, k, value, where);
    return;
  }
  for (const auto& def : config_detail::key_table()) {
    if (key == def.name) {
      config_detail::set_value(cfg, def.field, value, where);
      return;
    }
  }
  throw ConfigError(where + ": unknown key '" + key + "'");
}

/// Canonical multi-line rendering; parse(render(c)) == c exactly.
inline std::string render_config(const Config& cfg) {
  std::ostringstream os;
  for (const auto& def : config_detail::key_table()) {
    os << def.name << '=' << config_detail::get_value(cfg, def.field) << '\n';
  }
  return os.str();
}

/// Single-line rendering used as the header comment of every text output.
inline std::string render_config_line(const Config& cfg) {
  std::ostringstream os;
  bool first = true;
  for (const auto& def : config_detail::key_table()) {
    if (!first) os << ' ';
    os << def.name << '=' << config_detail::get_value(cfg, def.field);
    first = false;
  }
  return os.str();
}

/// key=value per line; '#' comments and blank lines allowed. Diagnostics
/// carry file and line.
inline void parse_config_stream(Config& cfg, std::istream& is,
                                const std::string& filename) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    const std::string where = filename + ":" + std::to_string(lineno);
    std::string trimmed;
    for (char c : line) {
      if (c == '#') break;
      trimmed.push_back(c);
    }
    while (!trimmed.empty() && (trimmed.back() == ' ' || trimmed.back() == '\t' ||
                                trimmed.back() == '\r'))
      trimmed.pop_back();
    std::size_t start = 0;
    while (start < trimmed.size() &&
           (trimmed[start] == ' ' || trimmed[start] == '\t'))
      start++;
    trimmed = trimmed.substr(start);
    if (trimmed.empty()) continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected key=value, got '" + trimmed + "'");
    }
    config_set(cfg, trimmed.substr(0, eq), trimmed.substr(eq + 1), where);
  }
}

inline void parse_config_file(Config& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path);
  parse_config_stream(cfg, is, path);
}

inline void validate_config(const Config& cfg) {
  if (cfg.aggregator != "vlad" && cfg.aggregator != "gap") {
    throw ConfigError("aggregator must be 'vlad' or 'gap', got '" +
                      cfg.aggregator + "'");
  }
  if (cfg.vocab_init != "random" && cfg.vocab_init != "kmeans") {
    throw ConfigError("vocab_init must be 'random' or 'kmeans', got '" +
                      cfg.vocab_init + "'");
  }
  if (cfg.k2 >= cfg.k && cfg.aggregator == "vlad") {
    throw ConfigError("k2 must be smaller than k");
  }
  if (cfg.holdout < 1 || cfg.holdout > cfg.domains) {
    throw ConfigError("holdout must be in [1, domains]");
  }
  if (!(cfg.t > 0.0)) throw ConfigError("t must be positive");
  if (cfg.margin < 0.0) throw ConfigError("margin must be non-negative");
}

inline SyntheticSpec to_synthetic_spec(const Config& cfg) {
  return make_synthetic_spec(cfg.domains, cfg.locals_per_sample, cfg.raw_dim,
                             cfg.rho_cue, cfg.noise_sigma, cfg.samples_per_class,
                             cfg.cue_scale, cfg.shift_scale, cfg.data_seed);
}

inline TrainConfig to_train_config(const Config& cfg) {
  TrainConfig tc;
  tc.dims.d_raw = cfg.raw_dim;
  tc.dims.hidden = cfg.hidden_dim;
  tc.dims.d = cfg.feat_dim;
  tc.dims.k = cfg.k;
  tc.dims.k2 = cfg.aggregator == "gap" ? 0 : cfg.k2;
  tc.dims.disc_hidden = cfg.disc_hidden;
  tc.dims.num_domains = cfg.domains;
  tc.aggregator = cfg.aggregator == "gap" ? Aggregator::kGap : Aggregator::kVlad;
  tc.vocab_init =
      cfg.vocab_init == "kmeans" ? VocabInit::kKmeans : VocabInit::kRandom;
  tc.kmeans_iters = cfg.kmeans_iters;
  tc.intra_normalize_centers = cfg.intra_normalize_centers;
  tc.weights.lambda1 = cfg.lambda1;
  tc.weights.lambda2 = cfg.lambda2;
  tc.weights.lambda3 = cfg.lambda3;
  tc.weights.lambda4 = cfg.lambda4;
  tc.weights.lambda5 = cfg.lambda5;
  tc.weights.temperature = cfg.t;
  tc.weights.margin = cfg.margin;
  tc.weights.grl_coeff = cfg.grl_coeff;
  tc.per_domain_real = cfg.per_domain_real;
  tc.per_domain_fake = cfg.per_domain_fake;
  tc.iterations = cfg.iterations;
  tc.optim.learning_rate = cfg.lr;
  tc.optim.momentum = cfg.momentum;
  tc.optim.drop_iteration = cfg.lr_drop_iter;
  tc.optim.dropped_lr = cfg.lr_dropped;
  tc.seed = cfg.seed;
  tc.eval_every = cfg.eval_every;
  return tc;
}

}  // namespace vladvsa
