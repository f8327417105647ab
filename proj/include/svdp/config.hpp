#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "svdp/adaptation.hpp"
#include "svdp/benchmark.hpp"
#include "svdp/errors.hpp"
#include "svdp/pretrain.hpp"

namespace svdp {

/// Everything a CLI invocation can configure.
struct Settings {
  AdaptationConfig adapt;
  CorpusOptions corpus;
  PretrainOptions pretrain;
  std::string corpus_dir;   // empty = generate in memory from corpus_seed
  std::string checkpoint;   // source checkpoint path
  std::uint64_t corpus_seed = 7;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

template <typename I>
I parse_integer(const std::string& key, const std::string& v) {
  I out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected true|false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list of numbers");
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

struct Field {
  std::string type;
  std::function<void(Settings&, const std::string&)> set;
  std::function<std::string(const Settings&)> get;
};

#define SVDP_NUM(KEY, EXPR)                                                                   \
  {KEY,                                                                                       \
   {"number", [](Settings& s, const std::string& v) { EXPR = parse_double(KEY, v); },          \
    [](const Settings& s) { return format_double(EXPR); }}}
#define SVDP_INT(KEY, EXPR, TYPE)                                                             \
  {KEY,                                                                                       \
   {"integer", [](Settings& s, const std::string& v) { EXPR = parse_integer<TYPE>(KEY, v); }, \
    [](const Settings& s) { return std::to_string(EXPR); }}}
#define SVDP_BOOL(KEY, EXPR)                                                                  \
  {KEY,                                                                                       \
   {"bool", [](Settings& s, const std::string& v) { EXPR = parse_bool(KEY, v); },             \
    [](const Settings& s) { return std::string(EXPR ? "true" : "false"); }}}
#define SVDP_STR(KEY, EXPR)                                                                   \
  {KEY,                                                                                       \
   {"string", [](Settings& s, const std::string& v) { EXPR = v; },                            \
    [](const Settings& s) { return EXPR; }}}

inline const std::map<std::string, Field>& schema() {
  static const std::map<std::string, Field> fields = {
      {"task",
       {"seg|depth", [](Settings& s, const std::string& v) { s.adapt.task = parse_task(v); },
        [](const Settings& s) { return std::string(to_string(s.adapt.task)); }}},
      SVDP_INT("classes", s.adapt.classes, int),
      SVDP_INT("m", s.adapt.m, int),
      SVDP_NUM("density", s.adapt.density),
      SVDP_NUM("alpha", s.adapt.alpha),
      SVDP_NUM("theta", s.adapt.theta),
      SVDP_NUM("beta_floor", s.adapt.beta_floor),
      SVDP_NUM("tau", s.adapt.tau),
      SVDP_NUM("lr", s.adapt.lr),
      {"prompt_lr",
       {"number|default",
        [](Settings& s, const std::string& v) {
          if (v == "default") {
            s.adapt.prompt_lr.reset();
          } else {
            s.adapt.prompt_lr = parse_double("prompt_lr", v);
          }
        },
        [](const Settings& s) {
          return s.adapt.prompt_lr ? format_double(*s.adapt.prompt_lr) : std::string("default");
        }}},
      {"scales",
       {"list", [](Settings& s, const std::string& v) { s.adapt.scales = parse_list("scales", v); },
        [](const Settings& s) { return format_list(s.adapt.scales); }}},
      {"mode",
       {"tta|ctta", [](Settings& s, const std::string& v) { s.adapt.mode = parse_mode(v); },
        [](const Settings& s) { return std::string(to_string(s.adapt.mode)); }}},
      SVDP_INT("rounds", s.adapt.rounds, int),
      SVDP_INT("seed", s.adapt.seed, std::uint64_t),
      {"uncertainty_method",
       {"mc_dropout|resolution_aug",
        [](Settings& s, const std::string& v) { s.adapt.uncertainty_method = parse_uncertainty_method(v); },
        [](const Settings& s) { return std::string(to_string(s.adapt.uncertainty_method)); }}},
      {"uncertainty_scales",
       {"list",
        [](Settings& s, const std::string& v) {
          s.adapt.uncertainty_scales = parse_list("uncertainty_scales", v);
        },
        [](const Settings& s) { return format_list(s.adapt.uncertainty_scales); }}},
      SVDP_INT("replace_period", s.adapt.replace_period, int),
      {"loss_norm",
       {"full|valid", [](Settings& s, const std::string& v) { s.adapt.loss_norm = parse_loss_norm(v); },
        [](const Settings& s) { return std::string(to_string(s.adapt.loss_norm)); }}},
      {"train_scope",
       {"all|norm|none", [](Settings& s, const std::string& v) { s.adapt.train_scope = parse_train_scope(v); },
        [](const Settings& s) { return std::string(to_string(s.adapt.train_scope)); }}},
      SVDP_BOOL("teacher_student", s.adapt.teacher_student),
      SVDP_BOOL("prompts", s.adapt.prompts),
      SVDP_BOOL("dpp", s.adapt.dpp),
      SVDP_BOOL("dpu", s.adapt.dpu),
      {"fixed_beta",
       {"number|none",
        [](Settings& s, const std::string& v) {
          if (v == "none") {
            s.adapt.fixed_beta.reset();
          } else {
            s.adapt.fixed_beta = parse_double("fixed_beta", v);
          }
        },
        [](const Settings& s) {
          return s.adapt.fixed_beta ? format_double(*s.adapt.fixed_beta) : std::string("none");
        }}},
      SVDP_NUM("dropout_rate", s.adapt.dropout_rate),
      SVDP_NUM("depth_scale", s.adapt.depth_scale),
      SVDP_INT("samples_per_domain", s.adapt.samples_per_domain, int),
      SVDP_INT("corpus_seed", s.corpus_seed, std::uint64_t),
      SVDP_INT("height", s.corpus.height, int),
      SVDP_INT("width", s.corpus.width, int),
      SVDP_INT("n_source", s.corpus.n_source, int),
      SVDP_INT("n_per_domain", s.corpus.n_per_domain, int),
      SVDP_NUM("severity_fog", s.corpus.severity[0]),
      SVDP_NUM("severity_night", s.corpus.severity[1]),
      SVDP_NUM("severity_rain", s.corpus.severity[2]),
      SVDP_NUM("severity_snow", s.corpus.severity[3]),
      SVDP_INT("pretrain_min_epochs", s.pretrain.min_epochs, int),
      SVDP_INT("pretrain_max_epochs", s.pretrain.max_epochs, int),
      SVDP_NUM("pretrain_lr", s.pretrain.lr),
      SVDP_NUM("pretrain_lr_decay", s.pretrain.lr_decay),
      SVDP_NUM("pretrain_target", s.pretrain.target_score),
      SVDP_NUM("pretrain_jitter", s.pretrain.jitter),
      SVDP_INT("pretrain_seed", s.pretrain.seed, std::uint64_t),
      SVDP_STR("corpus", s.corpus_dir),
      SVDP_STR("checkpoint", s.checkpoint),
  };
  return fields;
}

#undef SVDP_NUM
#undef SVDP_INT
#undef SVDP_BOOL
#undef SVDP_STR

}  // namespace detail

/// Sets one key; unknown keys and malformed values raise ConfigError.
inline void apply_setting(Settings& s, const std::string& key, const std::string& value) {
  const auto& fields = detail::schema();
  const auto it = fields.find(key);
  if (it == fields.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(s, detail::trim(value));
}

/// Applies a flat `key = value` text. Blank lines and `#` comments are ignored.
inline void apply_config_text(Settings& s, const std::string& text, const std::string& origin = "config") {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(s, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_config_file(Settings& s, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config file " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  apply_config_text(s, buf.str(), path);
}

/// Every key with its current value, in key order; parses back to the same settings.
inline std::string dump_config(const Settings& s) {
  std::string out;
  for (const auto& [key, field] : detail::schema()) out += key + " = " + field.get(s) + "\n";
  return out;
}

inline void validate(const Settings& s) {
  s.adapt.validate();
  if (s.corpus.height < 4 || s.corpus.width < 4 || s.corpus.height % 4 || s.corpus.width % 4) {
    throw ConfigError("height and width must be positive multiples of 4");
  }
  if (s.corpus.n_per_domain < 1) throw ConfigError("n_per_domain must be >= 1");
  if (s.corpus.n_source < 1) throw ConfigError("n_source must be >= 1");
  for (double v : s.corpus.severity) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("severities must lie in [0,1]");
  }
  if (s.pretrain.max_epochs < 1 || s.pretrain.min_epochs > s.pretrain.max_epochs) {
    throw ConfigError("need 1 <= pretrain_min_epochs <= pretrain_max_epochs");
  }
  if (!(s.pretrain.lr > 0.0)) throw ConfigError("pretrain_lr must be positive");
}

}  // namespace svdp
