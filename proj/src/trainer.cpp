#include "ssae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "ssae/corpus.hpp"
#include "ssae/pretext_data.hpp"
#include "ssae/rng.hpp"
#include "ssae/streams.hpp"

namespace ssae {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("TrainConfig: " + m); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr0 > 0.0)) fail("lr0 must be positive");
  if (!(lr_decay > 0.0)) fail("lr_decay must be positive");
  if (lr_step_epochs < 1) fail("lr_step_epochs must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) fail("momentum must be in [0, 1)");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (epochs < 0) fail("epochs must be >= 0");
  if (trp_activation_epoch < 0) fail("trp_activation_epoch must be >= 0");
  if (lambda < 0.0) fail("lambda must be >= 0");
  if (weighting_warmup_epochs < 0) fail("weighting_warmup_epochs must be >= 0");
  if (!(alpha > 0.0)) fail("alpha must be positive");
  if (ops_per_patch < 1 || ops_per_patch > kNumClasses - 1) fail("ops_per_patch must be in [1, 21]");
  if (chunk_patches < 1) fail("chunk_patches must be >= 1");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (disable_deg && disable_trp) fail("disable_deg and disable_trp leave nothing to train");
  if (allowed_classes(excluded_groups).size() < static_cast<std::size_t>(ops_per_patch)) {
    fail("excluded attribute groups leave fewer classes than ops_per_patch");
  }
}

bool TrainConfig::trp_active(int epoch) const {
  if (disable_trp) return false;
  return disable_deg || epoch >= trp_activation_epoch;
}

bool TrainConfig::weighting_active(int epoch) const {
  return !disable_weighting && !disable_deg && epoch >= weighting_warmup_epochs;
}

void sgd_step(ParamSet& params, ParamSet& velocity, const ParamSet& grads, double lr, const SgdOptions& opts) {
  if (!params.same_layout(grads) || !params.same_layout(velocity)) {
    throw std::invalid_argument("sgd_step: parameter, velocity and gradient layouts differ");
  }
  const double mu = opts.momentum, wd = opts.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i].data;
    auto& v = velocity[i].data;
    const auto& g = grads[i].data;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = g[k] + wd * theta[k];
      v[k] = mu * v[k] + gk;
      theta[k] -= opts.nesterov ? lr * (gk + mu * v[k]) : lr * v[k];
    }
  }
}

double lr_at(int epoch, double lr0, double decay, int step) {
  if (epoch < 0) throw std::invalid_argument("lr_at: epoch must be >= 0");
  return lr0 * std::pow(decay, epoch / step);
}

namespace {

void add_into(ParamSet& acc, const ParamSet& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    auto& a = acc[i].data;
    const auto& b = g[i].data;
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  }
}

} // namespace

BatchResult pretext_batch_gradients(const ParamSet& params, const EncoderConfig& enc, const TrainConfig& cfg,
                                    int epoch, std::span<const Image> patches,
                                    std::span<const std::uint64_t> patch_ids) {
  const auto allowed = allowed_classes(cfg.excluded_groups);
  const SynthBatch sb =
      synth_batch(patches, epoch_ops_stream(cfg.root_seed, epoch), cfg.ops_per_patch, patch_ids, allowed);
  const bool trp = cfg.trp_active(epoch);

  LossOptions opts;
  opts.lambda = cfg.trp_coefficient();
  opts.trp_active = trp;
  opts.weighting_active = cfg.weighting_active(epoch);
  opts.deg_active = !cfg.disable_deg;
  opts.alpha = cfg.alpha;
  opts.instance_divisor = sb.instances.size();
  opts.triplet_divisor = trp ? sb.triplets.size() : 0;

  BatchResult out;
  out.grads = params.zeros_like();
  out.instances = sb.instances.size();
  out.triplets = trp ? sb.triplets.size() : 0;
  out.report.lambda_used = opts.lambda;
  out.report.trp_active = trp;

  // Group by patch so chunks hold whole patches; instance and triplet images
  // rendered from the same (patch, class) are identical and share one row.
  const std::size_t n = patches.size();
  std::vector<std::vector<std::size_t>> inst_by_patch(n), trip_by_patch(n);
  for (std::size_t i = 0; i < sb.instances.size(); ++i) inst_by_patch[sb.instances[i].patch_index].push_back(i);
  if (trp) {
    for (std::size_t i = 0; i < sb.triplets.size(); ++i) trip_by_patch[sb.triplets[i].patch_index].push_back(i);
  }

  const std::size_t chunk = static_cast<std::size_t>(cfg.chunk_patches);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    std::vector<const Image*> images;
    std::map<std::pair<std::size_t, int>, std::size_t> rows;
    auto row_for = [&](std::size_t patch, int cls, const Image& img) {
      auto [it, inserted] = rows.try_emplace({patch, cls}, images.size());
      if (inserted) images.push_back(&img);
      return it->second;
    };
    std::vector<InstanceRef> inst_refs;
    std::vector<TripletRef> trip_refs;
    for (std::size_t pi = begin; pi < end; ++pi) {
      for (std::size_t i : inst_by_patch[pi]) {
        const auto& inst = sb.instances[i];
        inst_refs.push_back({row_for(pi, inst.class_index, inst.image), inst.class_index});
      }
      for (std::size_t t : trip_by_patch[pi]) {
        const auto& tr = sb.triplets[t];
        trip_refs.push_back({row_for(pi, 0, tr.anchor), row_for(pi, tr.pair.mild.class_index, tr.mild_img),
                             row_for(pi, tr.pair.severe.class_index, tr.severe_img)});
      }
    }
    if (inst_refs.empty()) continue;

    const ForwardTrace trace = forward(params, enc, images_to_batch(std::span<const Image* const>(images)));
    LossGradients lg;
    const LossReport rep = total_loss(trace, inst_refs, trip_refs, opts, &lg);
    add_into(out.grads, backward(params, enc, trace, lg.d_logits, lg.d_embedding));
    out.report.l_deg += rep.l_deg;
    out.report.l_trp += rep.l_trp;
    out.report.total += rep.total;
    out.report.per_instance_weights.insert(out.report.per_instance_weights.end(), rep.per_instance_weights.begin(),
                                           rep.per_instance_weights.end());
  }
  return out;
}

TrainState init_state(const EncoderConfig& enc, const TrainConfig& cfg) {
  TrainState st;
  st.params = init_params(enc, cfg.root_seed);
  st.velocity = st.params.zeros_like();
  return st;
}

void pretrain(TrainState& state, const EncoderConfig& enc, const TrainConfig& cfg, std::span<const Image> patches,
              std::span<const std::uint64_t> patch_ids, const PretrainHooks& hooks) {
  cfg.validate();
  enc.validate();
  if (patches.empty()) throw std::invalid_argument("pretrain: empty corpus");
  if (patch_ids.size() != patches.size()) throw std::invalid_argument("pretrain: patch_ids length mismatch");
  for (const auto& p : patches) {
    if (p.height() != enc.input_size || p.width() != enc.input_size || p.channels() != enc.in_channels) {
      throw std::invalid_argument("pretrain: patch shape does not match the encoder input");
    }
  }

  const std::size_t n = patches.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle_rng = derive_stream(cfg.root_seed, mix_ids({streams::kShuffle, static_cast<std::uint64_t>(epoch)}));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[shuffle_rng.below(static_cast<std::uint32_t>(i + 1))]);

    const double lr = lr_at(epoch, cfg);
    double sum_deg = 0, sum_trp = 0, sum_total = 0, sum_w = 0;
    std::size_t n_w = 0, batches = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += bs) {
      const std::size_t b1 = std::min(n, b0 + bs);
      std::vector<Image> batch;
      std::vector<std::uint64_t> ids;
      for (std::size_t k = b0; k < b1; ++k) {
        batch.push_back(patches[order[k]]);
        ids.push_back(patch_ids[order[k]]);
      }
      BatchResult res = pretext_batch_gradients(state.params, enc, cfg, epoch, batch, ids);
      const auto& rep = res.report;
      if (!std::isfinite(rep.total)) {
        nlohmann::json dump = {{"epoch", epoch}, {"batch", batches}, {"lr", lr}, {"l_deg", rep.l_deg},
                               {"l_trp", rep.l_trp}, {"total", rep.total}, {"patch_ids", ids}};
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches),
                           dump);
      }
      if (hooks.on_batch) hooks.on_batch(epoch, static_cast<int>(batches), rep);
      sgd_step(state.params, state.velocity, res.grads, lr, cfg.sgd());

      sum_deg += rep.l_deg;
      sum_trp += rep.l_trp;
      sum_total += rep.total;
      for (double w : rep.per_instance_weights) sum_w += w;
      n_w += rep.per_instance_weights.size();
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    state.history.push_back({epoch, sum_deg / nb, sum_trp / nb, sum_total / nb, sum_w / static_cast<double>(n_w), lr});
    state.epoch = epoch + 1;
    state.rng_state = shuffle_rng.state();
    state.rng_increment = shuffle_rng.increment();
    if (hooks.on_epoch_end) hooks.on_epoch_end(state);
  }
}

nlohmann::json train_meta(const TrainState& state, const TrainConfig& cfg) {
  return {{"epoch", state.epoch},
          {"rng", {{"root_seed", cfg.root_seed}, {"state", state.rng_state}, {"increment", state.rng_increment}}}};
}

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> history) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,l_deg,l_trp,total,mean_weight,lr\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.l_deg, r.l_trp, r.total,
                  r.mean_weight, r.lr);
    out << buf;
  }
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "epoch,l_deg,l_trp,total,mean_weight,lr") throw std::runtime_error("history: unexpected header");
  std::vector<HistoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    HistoryRow r;
    char comma;
    std::istringstream ss(line);
    ss >> r.epoch >> comma >> r.l_deg >> comma >> r.l_trp >> comma >> r.total >> comma >> r.mean_weight >> comma >>
        r.lr;
    if (!ss) throw std::runtime_error("history: malformed row '" + line + "'");
    rows.push_back(r);
  }
  return rows;
}

PretextEval evaluate_pretext(const ParamSet& params, const EncoderConfig& enc, std::span<const Image> patches,
                             std::uint64_t root_seed) {
  if (patches.empty()) throw std::invalid_argument("evaluate_pretext: no patches");
  const auto& cat = catalog();
  const RngStream base = derive_stream(root_seed, streams::kHeldOut);
  std::vector<std::size_t> correct(cat.size(), 0), seen(cat.size(), 0);
  const std::size_t n = patches.size();
  constexpr std::size_t kChunk = 8;
  for (std::size_t b0 = 0; b0 < n; b0 += kChunk) {
    const std::size_t b1 = std::min(n, b0 + kChunk);
    std::vector<Image> imgs;
    std::vector<int> labels;
    for (std::size_t i = b0; i < b1; ++i) {
      const RngStream prng = base.fork(i);
      for (const auto& spec : cat) {
        imgs.push_back(render_manipulation(spec, patches[i], prng, &patches[(i + 1) % n]));
        labels.push_back(spec.class_index);
      }
    }
    const ForwardTrace tr = forward(params, enc, images_to_batch(imgs));
    const std::size_t classes = tr.logits.dim(1);
    for (std::size_t r = 0; r < labels.size(); ++r) {
      const double* l = tr.logits.data.data() + r * classes;
      const auto pred = static_cast<int>(std::max_element(l, l + classes) - l);
      ++seen[labels[r]];
      if (pred == labels[r]) ++correct[labels[r]];
    }
  }
  PretextEval ev;
  std::size_t total_correct = 0;
  for (std::size_t c = 0; c < cat.size(); ++c) {
    total_correct += correct[c];
    ev.samples += seen[c];
    ev.per_class_accuracy.push_back(seen[c] ? static_cast<double>(correct[c]) / seen[c] : 0.0);
  }
  ev.accuracy = static_cast<double>(total_correct) / ev.samples;
  return ev;
}

} // namespace ssae
