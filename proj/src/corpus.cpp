#include "ssae/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "ssae/parallel.hpp"
#include "ssae/streams.hpp"

namespace ssae {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string split_name(Split s) { return s == Split::Train ? "train" : "val"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  throw std::runtime_error("manifest: unknown split '" + s + "'");
}

} // namespace

std::vector<std::size_t> Corpus::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == split) out.push_back(i);
  }
  return out;
}

RngStream epoch_ops_stream(std::uint64_t root_seed, int epoch) {
  return derive_stream(root_seed, mix_ids({streams::kEpochOps, static_cast<std::uint64_t>(epoch)}));
}

std::string content_hash(const Image& img) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (int v : {img.height(), img.width(), img.channels()}) {
    for (int k = 0; k < 4; ++k) feed(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
  }
  for (double v : img.data()) feed(static_cast<std::uint8_t>(to_u8(v)));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<fs::path> list_png_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Corpus build_corpus(const SourceSpec& source, const PatchConfig& patch) {
  if (source.count < 1) throw std::invalid_argument("build_corpus: count must be >= 1");
  if (patch.val_fraction < 0.0 || patch.val_fraction >= 1.0) {
    throw std::invalid_argument("build_corpus: val_fraction must be in [0, 1)");
  }
  std::vector<fs::path> files;
  if (source.kind == SourceSpec::Kind::Folder) {
    if (!source.folder_path) throw std::invalid_argument("build_corpus: folder source needs folder_path");
    files = list_png_files(*source.folder_path);
    if (files.empty()) throw std::invalid_argument("build_corpus: no PNG images in " + source.folder_path->string());
  }

  const auto allowed = allowed_classes(patch.excluded_groups);
  const RngStream ops_rng = epoch_ops_stream(source.root_seed, 0);
  const std::size_t n = static_cast<std::size_t>(source.count);

  Corpus corpus;
  corpus.root_seed = source.root_seed;
  corpus.patch_size = patch.crop;
  corpus.entries.resize(n);
  corpus.patches.resize(n);
  corpus.files.resize(n);

  parallel_for(n, [&](std::size_t i) {
    const std::uint64_t id = i;
    Image src;
    std::string ref;
    if (source.kind == SourceSpec::Kind::Procedural) {
      RngStream srng = derive_stream(source.root_seed, mix_ids({streams::kSource, id}));
      src = generate_procedural(srng, source.source_height, source.source_width);
      ref = "procedural:" + std::to_string(id);
    } else {
      const fs::path& f = files[i % files.size()];
      src = read_png(f);
      if (src.channels() == 1) {
        Image rgb(src.height(), src.width(), 3);
        for (int y = 0; y < src.height(); ++y)
          for (int x = 0; x < src.width(); ++x)
            for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = src.at(y, x, 0);
        src = std::move(rgb);
      }
      ref = f.filename().string();
    }
    RngStream crng = derive_stream(source.root_seed, mix_ids({streams::kCrop, id}));
    auto extracted = extract_patch_with_rect(src, crng, patch.resize_short, patch.crop);
    RngStream split_rng = derive_stream(source.root_seed, mix_ids({streams::kSplit, id}));
    RngStream plan_rng = patch_stream(ops_rng, id);

    ManifestEntry& e = corpus.entries[i];
    e.patch_id = id;
    e.source_ref = std::move(ref);
    e.crop_rect = extracted.rect;
    e.ops_applied = plan_patch_ops(plan_rng, patch.ops_per_patch, allowed);
    e.split = split_rng.uniform() < patch.val_fraction ? Split::Val : Split::Train;

    corpus.patches[i] = quantize_u8(extracted.patch);
    const std::string hash = content_hash(corpus.patches[i]);
    corpus.files[i] = "images/" + hash.substr(0, 2) + "/" + hash + ".png";
  });
  return corpus;
}

std::string manifest_line(const ManifestEntry& e) {
  json j;
  j["patch_id"] = e.patch_id;
  j["source_ref"] = e.source_ref;
  j["crop_rect"] = {{"x", e.crop_rect.x}, {"y", e.crop_rect.y}, {"width", e.crop_rect.width},
                    {"height", e.crop_rect.height}};
  j["ops_applied"] = e.ops_applied;
  j["split"] = split_name(e.split);
  return j.dump();
}

ManifestEntry parse_manifest_line(const std::string& line) {
  const json j = json::parse(line);
  static const std::set<std::string> keys = {"patch_id", "source_ref", "crop_rect", "ops_applied", "split"};
  for (const auto& [k, _] : j.items()) {
    if (!keys.count(k)) throw std::runtime_error("manifest: unexpected key '" + k + "'");
  }
  ManifestEntry e;
  e.patch_id = j.at("patch_id").get<std::uint64_t>();
  e.source_ref = j.at("source_ref").get<std::string>();
  const auto& r = j.at("crop_rect");
  e.crop_rect = {r.at("x").get<int>(), r.at("y").get<int>(), r.at("width").get<int>(), r.at("height").get<int>()};
  e.ops_applied = j.at("ops_applied").get<std::vector<int>>();
  e.split = parse_split(j.at("split").get<std::string>());
  return e;
}

void write_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "manifest.jsonl", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.jsonl").string());
    for (const auto& e : corpus.entries) out << manifest_line(e) << '\n';
  }
  json meta;
  meta["root_seed"] = corpus.root_seed;
  meta["catalog_version"] = corpus.catalog_version;
  meta["patch_size"] = corpus.patch_size;
  meta["count"] = corpus.entries.size();
  meta["files"] = corpus.files;
  {
    std::ofstream out(dir / "meta.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "meta.json").string());
    out << meta.dump(1) << '\n';
  }
  std::set<std::string> written;
  for (std::size_t i = 0; i < corpus.patches.size(); ++i) {
    if (!written.insert(corpus.files[i]).second) continue;
    const fs::path p = dir / corpus.files[i];
    fs::create_directories(p.parent_path());
    write_png(p, corpus.patches[i]);
  }
}

Corpus load_corpus(const fs::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw std::runtime_error("cannot read " + (dir / "meta.json").string());
  const json meta = json::parse(meta_in);
  Corpus corpus;
  corpus.root_seed = meta.at("root_seed").get<std::uint64_t>();
  corpus.catalog_version = meta.at("catalog_version").get<int>();
  if (corpus.catalog_version != kCatalogVersion) {
    throw std::runtime_error("corpus catalog_version " + std::to_string(corpus.catalog_version) +
                             " does not match " + std::to_string(kCatalogVersion));
  }
  corpus.patch_size = meta.at("patch_size").get<int>();
  corpus.files = meta.at("files").get<std::vector<std::string>>();

  std::ifstream in(dir / "manifest.jsonl");
  if (!in) throw std::runtime_error("cannot read " + (dir / "manifest.jsonl").string());
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) corpus.entries.push_back(parse_manifest_line(line));
  }
  if (corpus.entries.size() != corpus.files.size()) throw std::runtime_error("corpus: manifest/meta length mismatch");
  corpus.patches.resize(corpus.entries.size());
  parallel_for(corpus.files.size(), [&](std::size_t i) { corpus.patches[i] = read_png(dir / corpus.files[i]); });
  return corpus;
}

} // namespace ssae
