#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "recapdet/adam.hpp"
#include "recapdet/checkpoint.hpp"
#include "recapdet/config.hpp"
#include "recapdet/dataset.hpp"
#include "recapdet/errors.hpp"
#include "recapdet/filterbank.hpp"
#include "recapdet/metrics.hpp"
#include "recapdet/model.hpp"

namespace recapdet {

// Images decoded, filter-banked and normalized once; training touches only
// these flat arrays afterwards.
template <typename S>
struct PreparedDataset {
  int side = 0;
  std::vector<Vec<S>> band;  // 3*side*side each, (low, mid, high)
  std::vector<Vec<S>> rgb;   // 3*side*side each, channel-major, [0,1]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

template <typename S>
PreparedDataset<S> prepare_dataset(const Corpus& corpus,
                                   const std::vector<const SampleRecord*>& pool,
                                   const BandMasks& masks) {
  PreparedDataset<S> out;
  out.side = masks.n;
  const int n = masks.n;
  const std::int64_t plane = static_cast<std::int64_t>(n) * n;
  for (const SampleRecord* rec : pool) {
    ImageU8 img = load_sample_image(corpus, *rec);
    BandImage bi = filter_bank_preprocess(img, masks);
    Vec<S> band(3 * plane);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          band[c * plane + y * n + x] = static_cast<S>(bi.channels[static_cast<std::size_t>(c)](y, x));

    if (img.height != n || img.width != n) img = resize_bilinear_u8(img, n, n);
    Vec<S> rgb(3 * plane);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          rgb[c * plane + y * n + x] = static_cast<S>(img.at(y, x, c) / 255.0);

    out.band.push_back(std::move(band));
    out.rgb.push_back(std::move(rgb));
    out.labels.push_back(rec->label);
  }
  return out;
}

template <typename S>
void fill_batch(const PreparedDataset<S>& data, const std::vector<std::size_t>& idx,
                std::size_t begin, std::size_t count, Tensor<S>& band, Tensor<S>& rgb,
                std::vector<int>& labels) {
  const std::int64_t sample = 3LL * data.side * data.side;
  band = Tensor<S>::zeros({static_cast<int>(count), 3, data.side, data.side});
  rgb = Tensor<S>::zeros({static_cast<int>(count), 3, data.side, data.side});
  labels.clear();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t s = idx[begin + i];
    band.data().segment(static_cast<std::int64_t>(i) * sample, sample) = data.band[s];
    rgb.data().segment(static_cast<std::int64_t>(i) * sample, sample) = data.rgb[s];
    labels.push_back(data.labels[s]);
  }
}

// The effective variant folds the --no-xattn flag into the ablation ladder.
inline Variant effective_variant(const RunConfig& cfg) {
  const Variant v = parse_variant(cfg.variant);
  if (v == Variant::Proposed && !cfg.xattn_enabled) return Variant::BaseFusion;
  return v;
}

template <typename S>
DetectorModel<S> build_model(const RunConfig& cfg) {
  cfg.validate();
  DetectorModel<S> model;
  model.backbone_cfg = cfg.backbone;
  model.backbone_cfg.input_side = cfg.input_side;
  model.fusion_cfg.n_scales = cfg.scales;
  model.variant = effective_variant(cfg);
  model.xattn_scaled = cfg.xattn_scaled;
  model.init(cfg.seed);
  return model;
}

// P(recaptured) for every sample, eval mode, batched.
template <typename S>
std::vector<double> score_dataset(DetectorModel<S>& model, const PreparedDataset<S>& data,
                                  int batch_size) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> scores;
  scores.reserve(data.size());
  for (std::size_t begin = 0; begin < idx.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(static_cast<std::size_t>(batch_size), idx.size() - begin);
    Tensor<S> band, rgb;
    std::vector<int> labels;
    fill_batch(data, idx, begin, count, band, rgb, labels);
    Tensor<S> probs = softmax_rows(model.forward(band, rgb, BnMode::Eval));
    for (std::size_t i = 0; i < count; ++i)
      scores.push_back(static_cast<double>(probs.data()[static_cast<std::int64_t>(i) * 2 + 1]));
  }
  return scores;
}

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double val_auc = 0;
};

inline std::string epoch_log_json(const EpochLog& e) {
  nlohmann::json j;
  j["epoch"] = e.epoch;
  j["train_loss"] = e.train_loss;
  j["val_auc"] = e.val_auc;
  return j.dump();
}

struct TrainResult {
  std::vector<EpochLog> curve;
  double best_val_auc = -1;
  int best_epoch = -1;
  Checkpoint best_checkpoint;
};

// End-to-end training with cross-entropy loss and Adam; per-epoch train loss
// and validation AUC go to `log` as JSON lines. The best-validation
// checkpoint is retained. Fully deterministic given the config seed.
template <typename S>
TrainResult train_model(const RunConfig& cfg, const Corpus& corpus, std::ostream* log = nullptr) {
  cfg.validate();
  const BandMasks masks = make_band_masks(cfg.k, cfg.input_side);
  PreparedDataset<S> train_data = prepare_dataset<S>(corpus, train_pool(corpus), masks);
  PreparedDataset<S> val_data = prepare_dataset<S>(corpus, val_pool(corpus), masks);
  if (train_data.size() < static_cast<std::size_t>(cfg.batch_size))
    throw ConfigError("train: corpus smaller than one batch");

  DetectorModel<S> model = build_model<S>(cfg);
  std::vector<Tensor<S>> params = model.params();
  AdamState<S> opt = AdamState<S>::make(params, static_cast<S>(cfg.lr));

  TrainResult result;
  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(cfg.seed ^ (0x9e37ULL + static_cast<std::uint64_t>(epoch) * 0x85ebca6bULL));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double loss_sum = 0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin + 1 < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count =
          std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - begin);
      if (count < 2) break;  // batch norm needs >= 2
      Tensor<S> band, rgb;
      std::vector<int> labels;
      fill_batch(train_data, order, begin, count, band, rgb, labels);
      Tensor<S> loss = cross_entropy(model.forward(band, rgb, BnMode::Train), labels);
      const double loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value))
        throw TrainingDivergenceError("NaN loss at epoch " + std::to_string(epoch));
      model.zero_grads();
      backward(loss);
      adam_step(params, opt);
      loss_sum += loss_value * static_cast<double>(count);
      seen += count;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    try {
      const std::vector<double> val_scores = score_dataset(model, val_data, cfg.batch_size);
      entry.val_auc = auc(val_scores, val_data.labels);
    } catch (const NumericError&) {
      throw TrainingDivergenceError("non-finite validation scores at epoch " +
                                    std::to_string(epoch));
    }
    result.curve.push_back(entry);
    if (log) *log << epoch_log_json(entry) << "\n" << std::flush;

    if (entry.val_auc > result.best_val_auc) {
      result.best_val_auc = entry.val_auc;
      result.best_epoch = epoch;
      result.best_checkpoint = checkpoint_from_model(model, cfg);
    }
  }
  return result;
}

// HTER threshold policy: fixed (default 0.5) or taken from the validation
// split's EER operating point.
struct HterPolicy {
  bool from_dev_eer = false;
  double fixed = 0.5;
};

template <typename S>
EvalReport evaluate_model(DetectorModel<S>& model, const RunConfig& cfg, const Corpus& corpus,
                          Scenario scenario, HterPolicy hter_policy = {}) {
  const BandMasks masks = make_band_masks(cfg.k, cfg.input_side);
  PreparedDataset<S> data = prepare_dataset<S>(corpus, scenario_pool(corpus, scenario), masks);
  const std::vector<double> scores = score_dataset(model, data, cfg.batch_size);
  double thr = hter_policy.fixed;
  if (hter_policy.from_dev_eer) {
    PreparedDataset<S> dev = prepare_dataset<S>(corpus, val_pool(corpus), masks);
    const std::vector<double> dev_scores = score_dataset(model, dev, cfg.batch_size);
    thr = eer(dev_scores, dev.labels).second;
  }
  EvalReport report = evaluate_scores(scenario_name(scenario), scores, data.labels, thr);
  report.config_hash = cfg.hash_hex_str();
  return report;
}

// Loads a checkpoint, validates the requested flags against the embedded
// config, and reconstructs the model at precision S.
template <typename S>
DetectorModel<S> model_from_checkpoint(const Checkpoint& ckpt, RunConfig& cfg_out,
                                       const RunConfig* requested = nullptr) {
  cfg_out = RunConfig::from_json(ckpt.config_json);
  if (requested && !requested->architecture_matches(cfg_out))
    throw ConfigError("checkpoint architecture conflicts with requested flags: " +
                      requested->architecture_diff(cfg_out));
  DetectorModel<S> model = build_model<S>(cfg_out);
  load_model_from_checkpoint(model, ckpt);
  return model;
}

// ---------------------------------------------------------------------------
// ablation ladder, in the evaluation-table row order

struct AblationVariantSpec {
  std::string row_name;
  std::string variant;
  bool xattn_enabled;
  int scales;
};

inline std::vector<AblationVariantSpec> ablation_ladder() {
  return {{"branch1", "branch1", true, 3},
          {"base-fusion", "proposed", false, 3},
          {"proposed(1scale)", "proposed", true, 1},
          {"proposed(2scale)", "proposed", true, 2},
          {"proposed(3scale)", "proposed", true, 3}};
}

struct AblationRow {
  std::string name;
  bool ok = false;
  std::string error;
  std::vector<EvalReport> reports;  // one per requested scenario, same order
  std::int64_t param_count = 0;
};

// Trains and evaluates all five variants. A failing variant is reported in
// its row; the remaining variants still run.
template <typename S>
std::vector<AblationRow> run_ablation(const RunConfig& base, const Corpus& corpus,
                                      const std::vector<Scenario>& scenarios,
                                      std::ostream* log = nullptr) {
  std::vector<AblationRow> rows;
  for (const AblationVariantSpec& spec : ablation_ladder()) {
    AblationRow row;
    row.name = spec.row_name;
    try {
      RunConfig cfg = base;
      cfg.variant = spec.variant;
      cfg.xattn_enabled = spec.xattn_enabled;
      cfg.scales = spec.scales;
      if (log) *log << "# training " << spec.row_name << "\n" << std::flush;
      TrainResult tr = train_model<S>(cfg, corpus, log);
      RunConfig ckpt_cfg;
      DetectorModel<S> model = model_from_checkpoint<S>(tr.best_checkpoint, ckpt_cfg);
      row.param_count = model.param_count();
      for (Scenario scen : scenarios) row.reports.push_back(evaluate_model(model, cfg, corpus, scen));
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace recapdet
