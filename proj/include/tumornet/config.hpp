#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tumornet/dataset.hpp"
#include "tumornet/error.hpp"
#include "tumornet/image.hpp"
#include "tumornet/model_spec.hpp"
#include "tumornet/text.hpp"
#include "tumornet/train.hpp"

namespace tumornet {

/// Everything a `train` run needs. Serialized as flat `key = value` lines
/// with dotted namespaces; see config_fields() for the keys and defaults.
struct RunConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path output_dir;

  std::string preset = "custom_cnn";  // custom_cnn | custom_cnn_deep_head
  CnnConfig cnn{};
  // Unset: taken from the preset.
  std::optional<std::vector<std::size_t>> dense_units;
  std::optional<std::vector<double>> dropout_rates;

  TrainConfig train{};
  bool augment_enabled = true;
  AugmentParams augment{};
  SplitSpec split{};

  /// Architecture after applying the preset and overrides.
  CnnConfig resolved_cnn() const {
    CnnConfig c = cnn;
    if (preset == "custom_cnn_deep_head") c = with_deep_head(c);
    if (dense_units) c.dense_units = *dense_units;
    if (dropout_rates) c.dropout_rates = *dropout_rates;
    return c;
  }

  ModelSpec model() const { return build_custom_cnn(resolved_cnn()); }

  TrainConfig resolved_train() const {
    TrainConfig t = train;
    t.augment = augment_enabled ? std::optional<AugmentParams>(augment) : std::nullopt;
    return t;
  }

  void validate() const {
    if (preset != "custom_cnn" && preset != "custom_cnn_deep_head")
      throw ConfigError("model.preset must be custom_cnn or custom_cnn_deep_head", "model.preset");
    split.validate();
    resolved_train().validate();
    const auto c = resolved_cnn();
    if (c.dense_units.size() != c.dropout_rates.size())
      throw ConfigError("model.dense_units and model.dropout need the same length", "model.dropout");
    for (double r : c.dropout_rates)
      if (!(r >= 0 && r < 1)) throw ConfigError("dropout rates must lie in [0,1)", "model.dropout");
  }
};

namespace detail {

template <class V>
std::string join(const std::vector<V>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<V>) s += text::format_double(v[i]);
    else s += std::to_string(v[i]);
  }
  return s;
}

inline std::size_t to_size(const std::string& key, const std::string& v) {
  auto u = text::parse_uint(v);
  if (!u) throw ConfigError("invalid integer for " + key + ": '" + v + "'", key);
  return static_cast<std::size_t>(*u);
}
inline double to_real(const std::string& key, const std::string& v) {
  auto d = text::parse_double(v);
  if (!d) throw ConfigError("invalid number for " + key + ": '" + v + "'", key);
  return *d;
}
inline bool to_bool(const std::string& key, const std::string& v) {
  auto b = text::parse_bool(v);
  if (!b) throw ConfigError("invalid boolean for " + key + ": '" + v + "'", key);
  return *b;
}
inline std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (text::trim(v).empty()) return out;
  for (const auto& p : text::split(v, ',')) out.push_back(to_size(key, p));
  return out;
}
inline std::vector<double> to_reals(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (text::trim(v).empty()) return out;
  for (const auto& p : text::split(v, ',')) out.push_back(to_real(key, p));
  return out;
}

} // namespace detail

struct ConfigField {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigField>& config_fields() {
  using namespace detail;
  using text::format_double;
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    auto add = [&f](std::string key, std::function<void(RunConfig&, const std::string&)> set,
                    std::function<std::string(const RunConfig&)> get) {
      f.push_back({std::move(key), std::move(set), std::move(get)});
    };
#define TN_SIZE(KEY, FIELD) \
  add(KEY, [](RunConfig& c, const std::string& v) { c.FIELD = to_size(KEY, v); }, \
      [](const RunConfig& c) { return std::to_string(c.FIELD); })
#define TN_REAL(KEY, FIELD) \
  add(KEY, [](RunConfig& c, const std::string& v) { c.FIELD = to_real(KEY, v); }, \
      [](const RunConfig& c) { return format_double(c.FIELD); })
#define TN_BOOL(KEY, FIELD) \
  add(KEY, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(KEY, v); }, \
      [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); })

    add("dataset.root", [](RunConfig& c, const std::string& v) { c.dataset_root = v; },
        [](const RunConfig& c) { return c.dataset_root.string(); });
    add("output.dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
        [](const RunConfig& c) { return c.output_dir.string(); });

    add("model.preset", [](RunConfig& c, const std::string& v) { c.preset = v; },
        [](const RunConfig& c) { return c.preset; });
    TN_SIZE("model.input_height", cnn.height);
    TN_SIZE("model.input_width", cnn.width);
    add("model.filters", [](RunConfig& c, const std::string& v) { c.cnn.filters = to_sizes("model.filters", v); },
        [](const RunConfig& c) { return join(c.cnn.filters); });
    add("model.kernel_size",
        [](RunConfig& c, const std::string& v) {
          c.cnn.conv.kernel_height = c.cnn.conv.kernel_width = to_size("model.kernel_size", v);
        },
        [](const RunConfig& c) { return std::to_string(c.cnn.conv.kernel_height); });
    TN_SIZE("model.conv_stride", cnn.conv.stride);
    add("model.padding",
        [](RunConfig& c, const std::string& v) {
          if (v == "same") c.cnn.conv.padding = Padding::Same;
          else if (v == "valid") c.cnn.conv.padding = Padding::Valid;
          else throw ConfigError("model.padding must be same or valid", "model.padding");
        },
        [](const RunConfig& c) { return std::string(c.cnn.conv.padding == Padding::Same ? "same" : "valid"); });
    TN_BOOL("model.batchnorm", cnn.batchnorm);
    TN_REAL("model.bn_epsilon", cnn.bn_epsilon);
    TN_REAL("model.bn_momentum", cnn.bn_momentum);
    TN_REAL("model.leaky_slope", cnn.leaky_slope);
    add("model.pool_size",
        [](RunConfig& c, const std::string& v) { c.cnn.pool.height = c.cnn.pool.width = to_size("model.pool_size", v); },
        [](const RunConfig& c) { return std::to_string(c.cnn.pool.height); });
    TN_SIZE("model.pool_stride", cnn.pool_stride);
    add("model.dense_units",
        [](RunConfig& c, const std::string& v) { c.dense_units = to_sizes("model.dense_units", v); },
        [](const RunConfig& c) { return join(c.resolved_cnn().dense_units); });
    add("model.dropout",
        [](RunConfig& c, const std::string& v) { c.dropout_rates = to_reals("model.dropout", v); },
        [](const RunConfig& c) { return join(c.resolved_cnn().dropout_rates); });

    TN_SIZE("train.epochs", train.epochs);
    TN_SIZE("train.batch_size", train.batch_size);
    TN_SIZE("train.patience", train.patience);
    TN_REAL("train.min_delta", train.min_delta);
    add("train.loss_reduction",
        [](RunConfig& c, const std::string& v) {
          if (v == "mean") c.train.reduction = LossReduction::Mean;
          else if (v == "sum") c.train.reduction = LossReduction::Sum;
          else throw ConfigError("train.loss_reduction must be mean or sum", "train.loss_reduction");
        },
        [](const RunConfig& c) { return std::string(c.train.reduction == LossReduction::Mean ? "mean" : "sum"); });

    TN_REAL("optimizer.alpha", train.optimizer.alpha);
    TN_REAL("optimizer.beta1", train.optimizer.beta1);
    TN_REAL("optimizer.beta2", train.optimizer.beta2);
    TN_REAL("optimizer.epsilon", train.optimizer.epsilon);
    add("optimizer.variant",
        [](RunConfig& c, const std::string& v) {
          if (v == "standard") c.train.optimizer.variant = AdamaxVariant::Standard;
          else if (v == "literal") c.train.optimizer.variant = AdamaxVariant::Literal;
          else throw ConfigError("optimizer.variant must be standard or literal", "optimizer.variant");
        },
        [](const RunConfig& c) {
          return std::string(c.train.optimizer.variant == AdamaxVariant::Standard ? "standard" : "literal");
        });

    TN_SIZE("seed.init", train.init_seed);
    TN_SIZE("seed.shuffle", train.shuffle_seed);
    TN_SIZE("seed.augment", train.augment_seed);

    TN_BOOL("augment.enabled", augment_enabled);
    TN_REAL("augment.rotation", augment.max_rotation_degrees);
    TN_REAL("augment.shift", augment.max_shift_fraction);
    TN_BOOL("augment.shear", augment.shear_enabled);
    TN_REAL("augment.shear_degrees", augment.max_shear_degrees);
    TN_REAL("augment.zoom", augment.max_zoom_fraction);
    TN_BOOL("augment.flip", augment.horizontal_flip_enabled);
    add("augment.fill",
        [](RunConfig& c, const std::string& v) {
          if (v != "nearest") throw ConfigError("augment.fill supports only nearest", "augment.fill");
          c.augment.fill_mode = FillMode::Nearest;
        },
        [](const RunConfig&) { return std::string("nearest"); });

    TN_REAL("split.train", split.train);
    TN_REAL("split.val", split.validation);
    TN_REAL("split.test", split.test);
    TN_SIZE("split.seed", split.seed);
#undef TN_SIZE
#undef TN_REAL
#undef TN_BOOL
    return f;
  }();
  return fields;
}

/// ConfigError text for the user; names the offending key when the message
/// does not already.
inline std::string describe(const ConfigError& e) {
  std::string msg = e.what();
  if (!e.key().empty() && msg.find(e.key()) == std::string::npos) msg += " (" + e.key() + ")";
  return msg;
}

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : config_fields()) {
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'", key);
}

/// Applies `key = value` lines on top of `cfg`. Blank lines and lines
/// starting with '#' are ignored.
inline void apply_config_text(RunConfig& cfg, const std::string& body) {
  std::istringstream is(body);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(lineno) + " is not 'key = value'", std::string(t));
    }
    set_config_value(cfg, std::string(text::trim(t.substr(0, eq))), std::string(text::trim(t.substr(eq + 1))));
  }
}

inline RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string(), "--config");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(base, ss.str());
  return base;
}

inline std::string config_to_text(const RunConfig& cfg) {
  std::string s;
  for (const auto& f : config_fields()) s += f.key + " = " + f.get(cfg) + "\n";
  return s;
}

// --seed n: init n, shuffle n+1, augment n+2, split n+3.
inline void apply_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.train.init_seed = seed;
  cfg.train.shuffle_seed = seed + 1;
  cfg.train.augment_seed = seed + 2;
  cfg.split.seed = seed + 3;
}

} // namespace tumornet
