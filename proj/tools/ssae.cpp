// Command-line entry point: synth, pretrain, probe, lowdata, ablate,
// gradcheck and report.  Exit codes: 0 ok, 1 unexpected, 2 config,
// 3 I/O or file format, 4 non-finite loss, 5 gradient check failure.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "ssae/checkpoint.hpp"
#include "ssae/corpus.hpp"
#include "ssae/gradcheck.hpp"
#include "ssae/pipeline.hpp"
#include "ssae/report.hpp"
#include "ssae/run_config.hpp"
#include "ssae/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssae;

namespace {

enum Exit { kOk = 0, kUnexpected = 1, kConfig = 2, kIo = 3, kNumeric = 4, kGradcheck = 5 };

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

RunConfig config_or_default(const std::string& path) {
  if (path.empty()) {
    RunConfig cfg;
    cfg.resolve();
    return cfg;
  }
  if (!fs::exists(path)) throw IoError("config file not found: " + path);
  return load_run_config(path);
}

fs::path sidecar_for_file(const fs::path& out) { return fs::path(out).replace_extension(".resolved.json"); }

std::vector<int> parse_blocks(const std::string& text, int depth) {
  std::vector<int> out;
  const auto dots = text.find("..");
  try {
    if (dots != std::string::npos) {
      const int lo = std::stoi(text.substr(0, dots)), hi = std::stoi(text.substr(dots + 2));
      for (int b = lo; b <= hi; ++b) out.push_back(b);
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    }
  } catch (const std::exception&) {
    throw ConfigError("--blocks must look like '1..5' or '2,4'");
  }
  for (int b : out) {
    if (b < 1 || b > depth) throw ConfigError("--blocks holds a block outside [1, " + std::to_string(depth) + "]");
  }
  if (out.empty()) throw ConfigError("--blocks is empty");
  return out;
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double f = 0.0;
    try {
      f = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(f > 0.0) || f > 1.0) throw ConfigError("--fractions entries must lie in (0, 1]");
    out.push_back(f);
  }
  if (out.empty()) throw ConfigError("--fractions is empty");
  return out;
}

ParamSet load_encoder(const fs::path& path, const RunConfig& cfg) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.config == cfg.encoder)) throw ConfigError("checkpoint encoder does not match the config's encoder");
  return std::move(ck.params);
}

int cmd_synth(const std::string& config, const fs::path& out) {
  const RunConfig cfg = config_or_default(config);
  const Corpus corpus = build_corpus(cfg.source, cfg.patch);
  write_corpus(corpus, out);
  write_resolved_config(cfg, out / "resolved_config.json");
  std::printf("wrote %zu patches to %s\n", corpus.entries.size(), out.string().c_str());
  return kOk;
}

int cmd_pretrain(const std::string& config, const fs::path& corpus_dir, const fs::path& out) {
  const RunConfig cfg = config_or_default(config);
  write_resolved_config(cfg, sidecar_for_file(out));
  const Corpus corpus = load_corpus(corpus_dir);
  if (corpus.patch_size != cfg.encoder.input_size) {
    throw ConfigError("corpus patch size " + std::to_string(corpus.patch_size) + " does not match encoder.input_size");
  }
  const SplitPatches train = split_patches(corpus, Split::Train);
  if (train.patches.empty()) throw ConfigError("corpus has no training patches");

  const json config_json = run_config_to_json(cfg);
  auto meta_for = [&](const TrainState& st) {
    json meta = train_meta(st, cfg.train);
    meta["config"] = config_json;
    return meta;
  };
  PretrainHooks hooks;
  hooks.on_epoch_end = [&](const TrainState& st) {
    const auto& h = st.history.back();
    std::printf("epoch %3d  l_deg %.4f  l_trp %.4f  total %.4f  mean_w %.3f  lr %.5f\n", h.epoch, h.l_deg, h.l_trp,
                h.total, h.mean_weight, h.lr);
    std::fflush(stdout);
    if (cfg.train.checkpoint_every > 0 && st.epoch % cfg.train.checkpoint_every == 0 && st.epoch < cfg.train.epochs) {
      char suffix[32];
      std::snprintf(suffix, sizeof(suffix), ".epoch%03d.ckpt", st.epoch);
      save_checkpoint(fs::path(out).replace_extension(suffix), st.params, cfg.encoder, meta_for(st));
    }
  };

  TrainState state = init_state(cfg.encoder, cfg.train);
  try {
    pretrain(state, cfg.encoder, cfg.train, train.patches, train.ids, hooks);
  } catch (const NumericError& e) {
    write_text(fs::path(out).replace_extension(".numeric_dump.json"), e.state.dump(2) + "\n");
    throw;
  }
  save_checkpoint(out, state.params, cfg.encoder, meta_for(state));
  write_history_csv(fs::path(out).replace_extension(".history.csv"), state.history);

  const SplitPatches val = split_patches(corpus, Split::Val);
  if (!val.patches.empty()) {
    const PretextEval ev = evaluate_pretext(state.params, cfg.encoder, val.patches, cfg.root_seed);
    json j = {{"heldout_patches", val.patches.size()}, {"samples", ev.samples}, {"accuracy", ev.accuracy},
              {"per_class_accuracy", ev.per_class_accuracy}};
    write_text(fs::path(out).replace_extension(".pretext_eval.json"), j.dump(2) + "\n");
    std::printf("held-out 22-way accuracy: %.4f over %zu samples\n", ev.accuracy, ev.samples);
  }
  return kOk;
}

int cmd_probe(const std::string& config, const fs::path& ckpt, const fs::path& out, const std::string& blocks) {
  RunConfig cfg = config_or_default(config);
  if (!blocks.empty()) cfg.eval.blocks = parse_blocks(blocks, static_cast<int>(cfg.encoder.blocks.size()));
  write_resolved_config(cfg, out / "resolved_config.json");
  const ParamSet params = load_encoder(ckpt, cfg);
  const EvalDataset data = make_eval_dataset(cfg);
  const BlockReport rep = probe_blocks(params, cfg, data);
  emit_report(rep, out / "probe_report");
  std::cout << block_report_markdown(rep);
  return kOk;
}

int cmd_lowdata(const std::string& config, const fs::path& ckpt, const fs::path& out, const std::string& fractions,
                int block) {
  RunConfig cfg = config_or_default(config);
  if (!fractions.empty()) cfg.eval.fractions = parse_fractions(fractions);
  if (block > 0) {
    if (block > static_cast<int>(cfg.encoder.blocks.size())) throw ConfigError("--block exceeds the encoder depth");
    cfg.probe.block_index = block;
  }
  write_resolved_config(cfg, out / "resolved_config.json");
  const ParamSet params = load_encoder(ckpt, cfg);
  const EvalDataset data = make_eval_dataset(cfg);
  std::vector<CurvePoint> curve;
  for (const auto& r : low_data_sweep(params, cfg.encoder, data, cfg.eval.fractions, cfg.probe)) {
    curve.push_back(curve_point("pretrained", r));
  }
  if (cfg.eval.random_baseline) {
    const ParamSet random = init_params(cfg.encoder, cfg.root_seed);
    for (const auto& r : low_data_sweep(random, cfg.encoder, data, cfg.eval.fractions, cfg.probe)) {
      curve.push_back(curve_point("random-init", r));
    }
  }
  emit_curve(curve, out / "lowdata");
  std::cout << curve_markdown(curve);
  return kOk;
}

int cmd_ablate(const std::string& config, const fs::path& out) {
  const RunConfig cfg = config_or_default(config);
  write_resolved_config(cfg, out / "resolved_config.json");
  const EvalDataset data = make_eval_dataset(cfg);
  const auto rows = run_ablations(standard_ablations(cfg), data, [](const std::string& name) {
    std::printf("variant: %s\n", name.c_str());
    std::fflush(stdout);
  });
  emit_ablation(rows, out / "ablation");
  std::cout << ablation_markdown(rows);
  return kOk;
}

int cmd_gradcheck(const std::string& config, const fs::path& out, int samples, int input_size, double step,
                  double min_gradient) {
  RunConfig cfg = config_or_default(config);
  cfg.encoder.input_size = input_size;
  cfg.patch.crop = input_size;
  cfg.patch.resize_short = std::max(cfg.patch.resize_short, input_size);
  cfg.resolve();
  if (!out.empty()) write_resolved_config(cfg, sidecar_for_file(out));
  GradcheckOptions opts;
  opts.samples = samples;
  opts.step = step;
  opts.min_gradient = min_gradient;
  opts.lambda = cfg.train.lambda;
  opts.root_seed = cfg.root_seed;
  const GradcheckReport rep = run_gradcheck(cfg.encoder, opts);
  std::printf("checked %zu parameters (%zu redrawn near kinks, %zu of all below the gradient floor); max relative error "
              "%.3e (tolerance %.0e): %s\n",
              rep.entries.size(), rep.resampled, rep.skipped_small, rep.max_rel_error, rep.tolerance,
              rep.passed() ? "PASS" : "FAIL");
  if (!out.empty()) {
    json entries = json::array();
    for (const auto& e : rep.entries) {
      entries.push_back({{"param", e.param}, {"index", e.index}, {"analytic", e.analytic}, {"numeric", e.numeric},
                         {"rel_error", e.rel_error}});
    }
    json j = {{"passed", rep.passed()}, {"max_rel_error", rep.max_rel_error}, {"tolerance", rep.tolerance},
              {"resampled", rep.resampled},
              {"skipped_small", rep.skipped_small}, {"entries", entries}};
    write_text(out, j.dump(2) + "\n");
  }
  return rep.passed() ? kOk : kGradcheck;
}

int cmd_report(const std::string& probe_csv, const std::string& lowdata_csv, const std::string& ablation_csv_path,
               const fs::path& out) {
  if (probe_csv.empty() && lowdata_csv.empty() && ablation_csv_path.empty()) {
    throw ConfigError("report needs at least one of --probe, --lowdata, --ablation");
  }
  std::string md = "# Evaluation report\n";
  if (!probe_csv.empty()) {
    const BlockReport rep = parse_block_report_csv(read_text(probe_csv));
    md += "\n## Linear probe accuracy per block (%)\n\n" + block_report_markdown(rep);
    emit_report(rep, fs::path(out).replace_extension("").concat("_probe"));
  }
  if (!lowdata_csv.empty()) {
    const auto curve = parse_curve_csv(read_text(lowdata_csv));
    md += "\n## Low-data adaptation\n\n" + curve_markdown(curve);
  }
  if (!ablation_csv_path.empty()) {
    const std::string text = read_text(ablation_csv_path);
    std::vector<AblationRow> rows;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line.rfind("variant,pretext_accuracy,probe_accuracy", 0) != 0) throw IoError("ablation CSV: unexpected header");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      AblationRow r;
      std::string cell;
      std::getline(ss, r.variant, ',');
      std::getline(ss, cell, ',');
      r.pretext_accuracy = std::stod(cell);
      std::getline(ss, cell, ',');
      r.probe_accuracy = std::stod(cell);
      rows.push_back(r);
    }
    if (rows.empty()) throw IoError("ablation CSV: no rows");
    md += "\n## Ablations\n\n" + ablation_markdown(rows);
  }
  write_text(out, md);
  std::cout << md;
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aesthetic-aware self-supervised pre-training at desk scale"};
  app.require_subcommand(1);

  std::string config, out, corpus_dir, ckpt, blocks, fractions, probe_csv, lowdata_csv, ablation_csv_in;
  int samples = 240, input_size = 16, block = 0;
  double step = 1e-5, min_gradient = 1e-6;

  auto* synth = app.add_subcommand("synth", "Build the clean patch corpus and manifest");
  synth->add_option("--config", config, "Run config JSON")->required();
  synth->add_option("--out", out, "Output directory")->required();

  auto* pre = app.add_subcommand("pretrain", "Pre-train the encoder on a corpus");
  pre->add_option("--config", config, "Run config JSON")->required();
  pre->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  pre->add_option("--out", out, "Checkpoint path")->required();

  auto* probe = app.add_subcommand("probe", "Per-block linear probes on frozen features");
  probe->add_option("--config", config, "Run config JSON")->required();
  probe->add_option("--checkpoint", ckpt, "Pre-trained checkpoint")->required();
  probe->add_option("--out", out, "Output directory")->required();
  probe->add_option("--blocks", blocks, "Blocks to probe, e.g. 1..5 or 3,4");

  auto* low = app.add_subcommand("lowdata", "Probe accuracy against label fraction");
  low->add_option("--config", config, "Run config JSON")->required();
  low->add_option("--checkpoint", ckpt, "Pre-trained checkpoint")->required();
  low->add_option("--out", out, "Output directory")->required();
  low->add_option("--fractions", fractions, "Comma-separated label fractions");
  low->add_option("--block", block, "Block to probe (default: probe.block_index)");

  auto* abl = app.add_subcommand("ablate", "Pre-train and evaluate the standard ablation variants");
  abl->add_option("--config", config, "Run config JSON")->required();
  abl->add_option("--out", out, "Output directory")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the training gradients");
  grad->add_option("--config", config, "Run config JSON (default: built-in defaults)");
  grad->add_option("--out", out, "JSON report path");
  grad->add_option("--samples", samples, "Parameters to check")->check(CLI::PositiveNumber);
  grad->add_option("--input-size", input_size, "Input side length for the check")->check(CLI::Range(16, 256));
  grad->add_option("--step", step, "Central-difference step")->check(CLI::PositiveNumber);
  grad->add_option("--min-gradient", min_gradient, "Smallest gradient magnitude sampled")->check(CLI::NonNegativeNumber);

  auto* rep = app.add_subcommand("report", "Render Markdown from result CSVs");
  rep->add_option("--probe", probe_csv, "probe_report.csv");
  rep->add_option("--lowdata", lowdata_csv, "lowdata.csv");
  rep->add_option("--ablation", ablation_csv_in, "ablation.csv");
  rep->add_option("--out", out, "Markdown output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*synth) return cmd_synth(config, out);
    if (*pre) return cmd_pretrain(config, corpus_dir, out);
    if (*probe) return cmd_probe(config, ckpt, out, blocks);
    if (*low) return cmd_lowdata(config, ckpt, out, fractions, block);
    if (*abl) return cmd_ablate(config, out);
    if (*grad) return cmd_gradcheck(config, out, samples, input_size, step, min_gradient);
    if (*rep) return cmd_report(probe_csv, lowdata_csv, ablation_csv_in, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kNumeric;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::runtime_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpected;
  }
  return kUnexpected;
}
