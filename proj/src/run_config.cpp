#include "ssae/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <type_traits>

#include "ssae/checkpoint.hpp"

namespace ssae {

using nlohmann::json;

namespace {

class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  /// Rejects keys outside the allowed set.
  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [k, v] : j_.items()) {
      bool ok = false;
      for (auto a : keys) ok = ok || a == k;
      if (!ok) throw ConfigError("unknown config key '" + key_path(k) + "'");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const std::string& key) const { return j_.at(key); }
  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void read(const std::string& key, T& dst) const {
    if (!j_.contains(key)) return;
    dst = convert<T>(j_.at(key), key_path(key));
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("config key '" + where + "' must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
      if (!ok) throw ConfigError("config key '" + where + "' must be a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("config key '" + where + "' must be an integer");
      const auto x = v.get<std::int64_t>();
      if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
        throw ConfigError("config key '" + where + "' is out of range");
      }
      return static_cast<T>(x);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("config key '" + where + "' must be a number");
      return v.get<double>();
    } else {
      if (!v.is_string()) throw ConfigError("config key '" + where + "' must be a string");
      return v.get<std::string>();
    }
  }

  template <typename T>
  void read_list(const std::string& key, std::vector<T>& dst) const {
    if (!j_.contains(key)) return;
    const json& arr = j_.at(key);
    if (!arr.is_array()) throw ConfigError("config key '" + key_path(key) + "' must be a list");
    dst.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      dst.push_back(convert<T>(arr[i], key_path(key) + "[" + std::to_string(i) + "]"));
    }
  }

private:
  std::string where() const { return path_.empty() ? "config" : "config key '" + path_ + "'"; }
  const json& j_;
  std::string path_;
};

EncoderConfig encoder_from(const Section& s) {
  s.allow({"blocks", "in_channels", "embed_dim", "num_classes", "input_size"});
  EncoderConfig enc;
  if (s.has("blocks")) {
    const json& blocks = s.raw("blocks");
    if (!blocks.is_array()) throw ConfigError("config key 'encoder.blocks' must be a list");
    enc.blocks.clear();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const Section b(blocks[i], "encoder.blocks[" + std::to_string(i) + "]");
      b.allow({"out_channels", "kernel", "pool"});
      BlockConfig bc;
      b.read("out_channels", bc.out_channels);
      b.read("kernel", bc.kernel);
      std::string pool = "max2";
      b.read("pool", pool);
      if (pool == "max2") {
        bc.pool = Pool::Max2;
      } else if (pool == "none") {
        bc.pool = Pool::None;
      } else {
        throw ConfigError("config key '" + b.key_path("pool") + "' must be \"max2\" or \"none\"");
      }
      enc.blocks.push_back(bc);
    }
  }
  s.read("in_channels", enc.in_channels);
  s.read("embed_dim", enc.embed_dim);
  s.read("num_classes", enc.num_classes);
  s.read("input_size", enc.input_size);
  return enc;
}

template <typename F>
void checked(F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

} // namespace

void RunConfig::resolve() {
  source.root_seed = root_seed;
  train.root_seed = root_seed;
  probe.root_seed = root_seed;
  patch.ops_per_patch = train.ops_per_patch;
  patch.excluded_groups = exclude_attribute_groups;
  train.excluded_groups = exclude_attribute_groups;
  train.disable_weighting = disable_weighting;
  train.disable_trp = disable_trp;
  train.disable_deg = disable_deg;

  checked([&] {
    encoder.validate();
    train.validate();
    probe.validate();
  });
  if (encoder.num_classes != kNumClasses) throw ConfigError("config key 'encoder.num_classes' must be 22");
  if (source.count < 1) throw ConfigError("config key 'source.count' must be >= 1");
  if (source.kind == SourceSpec::Kind::Folder && !source.folder_path) {
    throw ConfigError("config key 'source.folder_path' is required for a folder source");
  }
  if (source.source_height < 16 || source.source_width < 16) {
    throw ConfigError("config keys 'source.source_height' and 'source.source_width' must be >= 16");
  }
  if (patch.crop != encoder.input_size) throw ConfigError("config key 'patch.crop' must equal 'encoder.input_size'");
  if (patch.resize_short < patch.crop) throw ConfigError("config key 'patch.resize_short' must be >= 'patch.crop'");
  if (!(patch.val_fraction >= 0.0) || patch.val_fraction >= 1.0) {
    throw ConfigError("config key 'patch.val_fraction' must be in [0, 1)");
  }
  const int depth = static_cast<int>(encoder.blocks.size());
  if (probe.block_index > depth) throw ConfigError("config key 'probe.block_index' exceeds the encoder depth");
  if (eval.blocks.empty()) throw ConfigError("config key 'eval.blocks' must not be empty");
  for (int b : eval.blocks) {
    if (b < 1 || b > depth) throw ConfigError("config key 'eval.blocks' holds a block outside [1, depth]");
  }
  if (eval.fractions.empty()) throw ConfigError("config key 'eval.fractions' must not be empty");
  for (double f : eval.fractions) {
    if (!(f > 0.0) || f > 1.0) throw ConfigError("config key 'eval.fractions' must lie in (0, 1]");
  }
  if (!eval.labels_csv && eval.count < 100) throw ConfigError("config key 'eval.count' must be >= 100");
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  const Section root(j, "");
  root.allow({"root_seed", "source", "patch", "encoder", "train", "probe", "eval", "exclude_attribute_groups",
              "disable_weighting", "disable_trp", "disable_deg"});
  root.read("root_seed", cfg.root_seed);
  root.read("disable_weighting", cfg.disable_weighting);
  root.read("disable_trp", cfg.disable_trp);
  root.read("disable_deg", cfg.disable_deg);
  std::vector<std::string> groups;
  root.read_list("exclude_attribute_groups", groups);
  for (const auto& g : groups) {
    const auto parsed = parse_attribute_group(g);
    if (!parsed || *parsed == AttributeGroup::None) {
      throw ConfigError("config key 'exclude_attribute_groups' has unknown group '" + g + "'");
    }
    if (std::find(cfg.exclude_attribute_groups.begin(), cfg.exclude_attribute_groups.end(), *parsed) ==
        cfg.exclude_attribute_groups.end()) {
      cfg.exclude_attribute_groups.push_back(*parsed);
    }
  }

  if (root.has("source")) {
    const Section s(root.raw("source"), "source");
    s.allow({"kind", "count", "folder_path", "source_height", "source_width"});
    std::string kind = "procedural";
    s.read("kind", kind);
    if (kind == "procedural") {
      cfg.source.kind = SourceSpec::Kind::Procedural;
    } else if (kind == "folder") {
      cfg.source.kind = SourceSpec::Kind::Folder;
    } else {
      throw ConfigError("config key 'source.kind' must be \"procedural\" or \"folder\"");
    }
    s.read("count", cfg.source.count);
    if (s.has("folder_path")) cfg.source.folder_path = Section::convert<std::string>(s.raw("folder_path"), "source.folder_path");
    s.read("source_height", cfg.source.source_height);
    s.read("source_width", cfg.source.source_width);
  }

  if (root.has("patch")) {
    const Section s(root.raw("patch"), "patch");
    s.allow({"resize_short", "crop", "val_fraction"});
    s.read("resize_short", cfg.patch.resize_short);
    s.read("crop", cfg.patch.crop);
    s.read("val_fraction", cfg.patch.val_fraction);
  }

  if (root.has("encoder")) cfg.encoder = encoder_from(Section(root.raw("encoder"), "encoder"));

  if (root.has("train")) {
    const Section s(root.raw("train"), "train");
    s.allow({"batch_size", "lr0", "lr_decay", "lr_step_epochs", "momentum", "weight_decay", "epochs",
             "trp_activation_epoch", "lambda", "weighting_warmup_epochs", "alpha", "ops_per_patch",
             "checkpoint_every", "chunk_patches"});
    auto& t = cfg.train;
    s.read("batch_size", t.batch_size);
    s.read("lr0", t.lr0);
    s.read("lr_decay", t.lr_decay);
    s.read("lr_step_epochs", t.lr_step_epochs);
    s.read("momentum", t.momentum);
    s.read("weight_decay", t.weight_decay);
    s.read("epochs", t.epochs);
    s.read("trp_activation_epoch", t.trp_activation_epoch);
    s.read("lambda", t.lambda);
    s.read("weighting_warmup_epochs", t.weighting_warmup_epochs);
    s.read("alpha", t.alpha);
    s.read("ops_per_patch", t.ops_per_patch);
    s.read("checkpoint_every", t.checkpoint_every);
    s.read("chunk_patches", t.chunk_patches);
  }

  if (root.has("probe")) {
    const Section s(root.raw("probe"), "probe");
    s.allow({"block_index", "head", "hidden", "pool_out", "lr0", "lr_decay", "lr_step_epochs", "momentum",
             "weight_decay", "epochs", "batch_size", "label_fraction", "standardize"});
    auto& p = cfg.probe;
    s.read("block_index", p.block_index);
    std::string head = "linear";
    s.read("head", head);
    if (head == "linear") {
      p.head = ProbeHead::Linear;
    } else if (head == "mlp") {
      p.head = ProbeHead::Mlp;
    } else {
      throw ConfigError("config key 'probe.head' must be \"linear\" or \"mlp\"");
    }
    s.read("hidden", p.hidden);
    s.read("pool_out", p.pool_out);
    s.read("lr0", p.lr0);
    s.read("lr_decay", p.lr_decay);
    s.read("lr_step_epochs", p.lr_step_epochs);
    s.read("momentum", p.momentum);
    s.read("weight_decay", p.weight_decay);
    s.read("epochs", p.epochs);
    s.read("batch_size", p.batch_size);
    s.read("label_fraction", p.label_fraction);
    s.read("standardize", p.standardize);
  }

  if (root.has("eval")) {
    const Section s(root.raw("eval"), "eval");
    s.allow({"count", "labels_csv", "blocks", "fractions", "random_baseline"});
    s.read("count", cfg.eval.count);
    if (s.has("labels_csv")) cfg.eval.labels_csv = Section::convert<std::string>(s.raw("labels_csv"), "eval.labels_csv");
    s.read_list("blocks", cfg.eval.blocks);
    s.read_list("fractions", cfg.eval.fractions);
    s.read("random_baseline", cfg.eval.random_baseline);
  }

  cfg.resolve();
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  json groups = json::array();
  for (auto g : cfg.exclude_attribute_groups) groups.push_back(std::string(attribute_group_name(g)));
  const auto& t = cfg.train;
  const auto& p = cfg.probe;
  return {
      {"root_seed", cfg.root_seed},
      {"source",
       {{"kind", cfg.source.kind == SourceSpec::Kind::Folder ? "folder" : "procedural"},
        {"count", cfg.source.count},
        {"folder_path", cfg.source.folder_path ? json(cfg.source.folder_path->string()) : json(nullptr)},
        {"source_height", cfg.source.source_height},
        {"source_width", cfg.source.source_width}}},
      {"patch",
       {{"resize_short", cfg.patch.resize_short}, {"crop", cfg.patch.crop}, {"val_fraction", cfg.patch.val_fraction}}},
      {"encoder", encoder_config_to_json(cfg.encoder)},
      {"train",
       {{"batch_size", t.batch_size},
        {"lr0", t.lr0},
        {"lr_decay", t.lr_decay},
        {"lr_step_epochs", t.lr_step_epochs},
        {"momentum", t.momentum},
        {"weight_decay", t.weight_decay},
        {"epochs", t.epochs},
        {"trp_activation_epoch", t.trp_activation_epoch},
        {"lambda", t.lambda},
        {"weighting_warmup_epochs", t.weighting_warmup_epochs},
        {"alpha", t.alpha},
        {"ops_per_patch", t.ops_per_patch},
        {"checkpoint_every", t.checkpoint_every},
        {"chunk_patches", t.chunk_patches}}},
      {"probe",
       {{"block_index", p.block_index},
        {"head", p.head == ProbeHead::Mlp ? "mlp" : "linear"},
        {"hidden", p.hidden},
        {"pool_out", p.pool_out},
        {"lr0", p.lr0},
        {"lr_decay", p.lr_decay},
        {"lr_step_epochs", p.lr_step_epochs},
        {"momentum", p.momentum},
        {"weight_decay", p.weight_decay},
        {"epochs", p.epochs},
        {"batch_size", p.batch_size},
        {"label_fraction", p.label_fraction},
        {"standardize", p.standardize}}},
      {"eval",
       {{"count", cfg.eval.count},
        {"labels_csv", cfg.eval.labels_csv ? json(cfg.eval.labels_csv->string()) : json(nullptr)},
        {"blocks", cfg.eval.blocks},
        {"fractions", cfg.eval.fractions},
        {"random_baseline", cfg.eval.random_baseline}}},
      {"exclude_attribute_groups", groups},
      {"disable_weighting", cfg.disable_weighting},
      {"disable_trp", cfg.disable_trp},
      {"disable_deg", cfg.disable_deg},
  };
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << run_config_to_json(cfg).dump(2) << "\n";
  if (!out) throw std::runtime_error("short write to " + path.string());
}

} // namespace ssae
