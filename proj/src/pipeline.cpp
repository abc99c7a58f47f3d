#include "ssae/pipeline.hpp"

#include "ssae/encoder.hpp"

namespace ssae {

SplitPatches split_patches(const Corpus& corpus, Split split) {
  SplitPatches out;
  for (std::size_t i : corpus.indices(split)) {
    out.patches.push_back(corpus.patches[i]);
    out.ids.push_back(corpus.entries[i].patch_id);
  }
  return out;
}

EvalDataset make_eval_dataset(const RunConfig& cfg) {
  if (cfg.eval.labels_csv) return load_labeled_folder(*cfg.eval.labels_csv, cfg.encoder.input_size, cfg.root_seed);
  return make_synthetic_aesthetic_set(cfg.eval.count, cfg.root_seed, cfg.encoder.input_size, cfg.source.source_height,
                                      cfg.source.source_width);
}

BlockReport probe_blocks(const ParamSet& pretrained, const RunConfig& cfg, const EvalDataset& data) {
  BlockReport rep;
  // Columns 1..k keep the default (empty) labelling so parsed CSVs compare equal.
  bool consecutive = true;
  for (std::size_t k = 0; k < cfg.eval.blocks.size(); ++k) consecutive = consecutive && cfg.eval.blocks[k] == static_cast<int>(k) + 1;
  if (!consecutive) rep.blocks = cfg.eval.blocks;
  auto row_for = [&](const std::string& method, const ParamSet& params) {
    ReportRow row{method, {}};
    for (int b : cfg.eval.blocks) {
      ProbeConfig pc = cfg.probe;
      pc.block_index = b;
      row.accuracies.push_back(probe_train(params, cfg.encoder, data, pc).test_accuracy);
    }
    rep.rows.push_back(std::move(row));
  };
  row_for("pretrained", pretrained);
  if (cfg.eval.random_baseline) row_for("random-init", init_params(cfg.encoder, cfg.root_seed));
  return rep;
}

std::vector<AblationVariant> standard_ablations(const RunConfig& base) {
  std::vector<AblationVariant> out;
  out.push_back({"full", base});
  for (auto g : {AttributeGroup::MuchNoise, AttributeGroup::CameraShake, AttributeGroup::SoftGrainy,
                 AttributeGroup::PoorLighting, AttributeGroup::Fuzzy, AttributeGroup::Distracting}) {
    RunConfig c = base;
    c.exclude_attribute_groups = {g};
    out.push_back({"without " + std::string(attribute_group_name(g)), c});
  }
  RunConfig no_weight = base;
  no_weight.disable_weighting = true;
  out.push_back({"without weighting", no_weight});
  RunConfig deg_only = base;
  deg_only.disable_trp = true;
  out.push_back({"identification loss only", deg_only});
  RunConfig trp_only = base;
  trp_only.disable_deg = true;
  out.push_back({"triplet loss only", trp_only});
  for (auto& v : out) v.config.resolve();
  return out;
}

std::vector<AblationRow> run_ablations(const std::vector<AblationVariant>& variants, const EvalDataset& data,
                                       const std::function<void(const std::string&)>& progress) {
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    if (progress) progress(v.name);
    const RunConfig& cfg = v.config;
    const Corpus corpus = build_corpus(cfg.source, cfg.patch);
    const SplitPatches train = split_patches(corpus, Split::Train);
    const SplitPatches val = split_patches(corpus, Split::Val);
    TrainState state = init_state(cfg.encoder, cfg.train);
    pretrain(state, cfg.encoder, cfg.train, train.patches, train.ids);
    AblationRow row{v.name, 0.0, 0.0};
    if (!val.patches.empty()) {
      row.pretext_accuracy = evaluate_pretext(state.params, cfg.encoder, val.patches, cfg.root_seed).accuracy;
    }
    row.probe_accuracy = probe_train(state.params, cfg.encoder, data, cfg.probe).test_accuracy;
    rows.push_back(row);
  }
  return rows;
}

} // namespace ssae
