#include "ssae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "ssae/manips.hpp"

namespace ssae {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'S', 'A', 'E'};
constexpr std::uint8_t kDtypeF64 = 0;
constexpr std::uint8_t kDtypeF32 = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }

  const char* take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw FormatError("checkpoint: truncated file");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == bytes_.size(); }

private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

} // namespace

json encoder_config_to_json(const EncoderConfig& cfg) {
  json blocks = json::array();
  for (const auto& b : cfg.blocks) {
    blocks.push_back({{"out_channels", b.out_channels}, {"kernel", b.kernel},
                      {"pool", b.pool == Pool::Max2 ? "max2" : "none"}});
  }
  return {{"blocks", blocks},
          {"in_channels", cfg.in_channels},
          {"embed_dim", cfg.embed_dim},
          {"num_classes", cfg.num_classes},
          {"input_size", cfg.input_size}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig cfg;
  cfg.blocks.clear();
  for (const auto& b : j.at("blocks")) {
    BlockConfig bc;
    bc.out_channels = b.at("out_channels").get<int>();
    bc.kernel = b.value("kernel", 3);
    const std::string pool = b.value("pool", std::string("max2"));
    if (pool == "max2") {
      bc.pool = Pool::Max2;
    } else if (pool == "none") {
      bc.pool = Pool::None;
    } else {
      throw std::invalid_argument("encoder config: unknown pool '" + pool + "'");
    }
    cfg.blocks.push_back(bc);
  }
  cfg.in_channels = j.value("in_channels", 3);
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.num_classes = j.value("num_classes", kNumClasses);
  cfg.input_size = j.at("input_size").get<int>();
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params, const EncoderConfig& cfg,
                     json meta) {
  meta["encoder"] = encoder_config_to_json(cfg);
  meta["catalog_version"] = kCatalogVersion;
  const std::string meta_text = meta.dump();

  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, meta_text.size());
  out += meta_text;
  for (const auto& [name, t] : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, kDtypeF64);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(double));
  }

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(f), {}));

  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto meta_len = r.get<std::uint64_t>();
  const char* meta_ptr = r.take(meta_len);

  Checkpoint ck;
  try {
    ck.meta = json::parse(meta_ptr, meta_ptr + meta_len);
    ck.config = encoder_config_from_json(ck.meta.at("encoder"));
  } catch (const std::exception& e) {
    throw FormatError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  const int catalog = ck.meta.value("catalog_version", -1);
  if (catalog != kCatalogVersion) {
    throw FormatError("checkpoint: catalog_version " + std::to_string(catalog) + " does not match " +
                      std::to_string(kCatalogVersion));
  }

  const ParamSet expected = init_params(ck.config, 0).zeros_like();
  while (!r.done()) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(r.take(name_len), name_len);
    const auto dtype = r.get<std::uint8_t>();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw FormatError("checkpoint: implausible rank for '" + name + "'");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    std::size_t count = 1;
    for (std::size_t d : shape) {
      if (d != 0 && count > (std::size_t{1} << 40) / d) throw FormatError("checkpoint: implausible shape for '" + name + "'");
      count *= d;
    }
    Tensor t;
    if (dtype == kDtypeF64) {
      const char* p = r.take(count * sizeof(double));
      t = Tensor(shape);
      std::memcpy(t.data.data(), p, count * sizeof(double));
    } else if (dtype == kDtypeF32) {
      const char* p = r.take(count * sizeof(float));
      t = Tensor(shape);
      for (std::size_t i = 0; i < count; ++i) {
        float v;
        std::memcpy(&v, p + i * sizeof(float), sizeof(float));
        t.data[i] = v;
      }
    } else {
      throw FormatError("checkpoint: unknown dtype tag " + std::to_string(dtype));
    }
    try {
      ck.params.add(std::move(name), std::move(t));
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("checkpoint: ") + e.what());
    }
  }
  if (!ck.params.same_layout(expected)) throw FormatError("checkpoint: parameters do not match the encoder config");
  return ck;
}

} // namespace ssae
