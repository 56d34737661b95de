#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "radnet/error.hpp"
#include "radnet/eval.hpp"
#include "radnet/fusionnet.hpp"
#include "radnet/imgio.hpp"
#include "radnet/preprocess.hpp"
#include "radnet/radiomics.hpp"
#include "radnet/synthetic.hpp"

namespace radnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kSplits[] = {"Training", "Testing"};
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kModelName = "model.rhn";
inline constexpr const char* kHistoryName = "history.csv";
inline constexpr const char* kMetricsName = "metrics.json";
inline constexpr const char* kMetricsTtaName = "metrics_tta.json";
inline constexpr const char* kSegmentsName = "segments.json";

inline std::string features_file_name(std::string_view split) {
  return "features_" + std::string(split) + ".rfv";
}

/// Everything a run depends on. Serialized as a flat JSON object.
struct RunConfig {
  std::string data;
  std::string out = "run";
  std::string features_dir;  // empty: same as out
  std::uint64_t seed = 0;
  std::size_t image_size = kDefaultImageSize;
  HogConfig hog;
  LbpConfig lbp;
  GaborBank gabor;
  std::size_t wavelet_levels = 2;
  AugmentConfig augment;
  TrainConfig train;
  double train_fraction = 0.8;
  std::string deep_features_train;
  std::string deep_features_test;
  bool tta = false;
  std::size_t views = 8;

  fs::path features_path() const { return features_dir.empty() ? fs::path(out) : fs::path(features_dir); }

  RadiomicExtractor extractor() const { return RadiomicExtractor(hog, lbp, gabor, wavelet_levels); }

  AugmentConfig augment_config() const {
    auto a = augment;
    a.seed = seed;
    return a;
  }

  TrainConfig train_config() const {
    auto t = train;
    t.seed = seed;
    t.num_classes = kNumClasses;
    return t;
  }
};

inline json to_json(const RunConfig& c) {
  return json{
      {"data", c.data},
      {"out", c.out},
      {"features_dir", c.features_dir},
      {"seed", c.seed},
      {"image_size", c.image_size},
      {"hog_cell_size", c.hog.cell_size},
      {"hog_block_size", c.hog.block_size},
      {"hog_block_stride", c.hog.block_stride},
      {"hog_bins", c.hog.bins},
      {"hog_l2_eps", c.hog.l2_eps},
      {"lbp_neighbors", c.lbp.neighbors},
      {"lbp_radius", c.lbp.radius},
      {"gabor_orientations_deg", c.gabor.orientations_deg},
      {"gabor_wavelengths", c.gabor.wavelengths},
      {"gabor_psi", c.gabor.psi},
      {"gabor_sigma_ratio", c.gabor.sigma_ratio},
      {"gabor_gamma", c.gabor.gamma},
      {"wavelet_levels", c.wavelet_levels},
      {"augment_rotation_max_deg", c.augment.rotation_max_deg},
      {"augment_p_flip_h", c.augment.p_flip_h},
      {"augment_p_flip_v", c.augment.p_flip_v},
      {"augment_blur_sigma_min", c.augment.blur_sigma_min},
      {"augment_blur_sigma_max", c.augment.blur_sigma_max},
      {"augment_brightness", c.augment.brightness},
      {"augment_contrast_min", c.augment.contrast_min},
      {"augment_contrast_max", c.augment.contrast_max},
      {"batch_size", c.train.batch_size},
      {"max_epochs", c.train.max_epochs},
      {"learning_rate", c.train.learning_rate},
      {"early_stop_patience", c.train.early_stop_patience},
      {"plateau_factor", c.train.plateau_factor},
      {"plateau_patience", c.train.plateau_patience},
      {"min_lr", c.train.min_lr},
      {"improvement_threshold", c.train.improvement_threshold},
      {"hidden_layers", c.train.hidden},
      {"dropout", c.train.dropout},
      {"adam_beta1", c.train.adam.beta1},
      {"adam_beta2", c.train.adam.beta2},
      {"adam_eps", c.train.adam.eps},
      {"weight_decay", c.train.adam.weight_decay},
      {"train_fraction", c.train_fraction},
      {"deep_features_train", c.deep_features_train},
      {"deep_features_test", c.deep_features_test},
      {"tta", c.tta},
      {"views", c.views},
  };
}

/// Applies the keys present in `j` on top of `base`. Unknown keys are an error
/// so that typos do not silently fall back to defaults.
inline RunConfig from_json(const json& j, RunConfig base = {}) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, "config must be a JSON object");
  const json known = to_json(base);
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  }
  auto& c = base;
  auto get = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception& e) {
      fail(ErrorCode::ConfigError, std::string("bad value for '") + key + "': " + e.what());
    }
  };
  get("data", c.data);
  get("out", c.out);
  get("features_dir", c.features_dir);
  get("seed", c.seed);
  get("image_size", c.image_size);
  get("hog_cell_size", c.hog.cell_size);
  get("hog_block_size", c.hog.block_size);
  get("hog_block_stride", c.hog.block_stride);
  get("hog_bins", c.hog.bins);
  get("hog_l2_eps", c.hog.l2_eps);
  get("lbp_neighbors", c.lbp.neighbors);
  get("lbp_radius", c.lbp.radius);
  get("gabor_orientations_deg", c.gabor.orientations_deg);
  get("gabor_wavelengths", c.gabor.wavelengths);
  get("gabor_psi", c.gabor.psi);
  get("gabor_sigma_ratio", c.gabor.sigma_ratio);
  get("gabor_gamma", c.gabor.gamma);
  get("wavelet_levels", c.wavelet_levels);
  get("augment_rotation_max_deg", c.augment.rotation_max_deg);
  get("augment_p_flip_h", c.augment.p_flip_h);
  get("augment_p_flip_v", c.augment.p_flip_v);
  get("augment_blur_sigma_min", c.augment.blur_sigma_min);
  get("augment_blur_sigma_max", c.augment.blur_sigma_max);
  get("augment_brightness", c.augment.brightness);
  get("augment_contrast_min", c.augment.contrast_min);
  get("augment_contrast_max", c.augment.contrast_max);
  get("batch_size", c.train.batch_size);
  get("max_epochs", c.train.max_epochs);
  get("learning_rate", c.train.learning_rate);
  get("early_stop_patience", c.train.early_stop_patience);
  get("plateau_factor", c.train.plateau_factor);
  get("plateau_patience", c.train.plateau_patience);
  get("min_lr", c.train.min_lr);
  get("improvement_threshold", c.train.improvement_threshold);
  get("hidden_layers", c.train.hidden);
  get("dropout", c.train.dropout);
  get("adam_beta1", c.train.adam.beta1);
  get("adam_beta2", c.train.adam.beta2);
  get("adam_eps", c.train.adam.eps);
  get("weight_decay", c.train.adam.weight_decay);
  get("train_fraction", c.train_fraction);
  get("deep_features_train", c.deep_features_train);
  get("deep_features_test", c.deep_features_test);
  get("tta", c.tta);
  get("views", c.views);
  return c;
}

/// Loads a flat config file, or the config recorded for `stage` in a run
/// manifest.
inline RunConfig load_config(const fs::path& p, std::string_view stage, RunConfig base = {}) {
  const auto bytes = read_file_bytes(p);
  json j;
  try {
    j = json::parse(std::string(bytes.begin(), bytes.end()));
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, "cannot parse " + p.string() + ": " + e.what());
  }
  // A manifest supplies the requested stage's config, else the closest earlier stage's.
  static constexpr std::array<std::string_view, 3> order{"extract", "train", "eval"};
  const auto at = std::find(order.begin(), order.end(), stage);
  for (auto it = at == order.end() ? order.end() : at + 1; it != order.begin();) {
    const std::string key(*--it);
    if (j.contains(key) && j[key].is_object() && j[key].contains("config")) {
      return from_json(j[key]["config"], base);
    }
  }
  if (j.contains("tool")) fail(ErrorCode::ConfigError, p.string() + " has no usable stage config");
  if (j.contains("config")) return from_json(j["config"], base);
  return from_json(j, base);
}

// ---------------------------------------------------------------------------
// Digests and manifest
// ---------------------------------------------------------------------------

inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::IoError, "SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string file_digest(const fs::path& p) { return sha256_hex(read_file_bytes(p)); }

inline json read_manifest(const fs::path& dir) {
  const auto p = dir / kManifestName;
  if (!fs::exists(p)) return json::object();
  try {
    const auto bytes = read_file_bytes(p);
    return json::parse(std::string(bytes.begin(), bytes.end()));
  } catch (const json::exception&) {
    return json::object();
  }
}

/// Replaces one stage section of `<dir>/manifest.json`, keeping the others.
inline void write_manifest_stage(const fs::path& dir, std::string_view stage, json section) {
  auto m = read_manifest(dir);
  m["tool"] = "radnet";
  m["threads"] = 1;
  m[std::string(stage)] = std::move(section);
  const auto text = m.dump(2) + "\n";
  write_file_bytes(dir / kManifestName,
                   std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline void write_text(const fs::path& p, const std::string& text) {
  write_file_bytes(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline void log(const std::string& msg) { std::cerr << "[radnet] " << msg << "\n"; }

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

struct ExtractSummary {
  std::vector<std::pair<std::string, std::size_t>> counts;  // split, samples
  std::size_t dim = 0;
  double extract_ms_per_image = 0.0;
};

inline Image load_preprocessed(const fs::path& p, std::size_t size) {
  return preprocess(read_pgm(p), size);
}

/// Preprocess and extract the radiomic tensor of every image in each split.
inline ExtractSummary run_extract(const RunConfig& cfg) {
  using clock = std::chrono::steady_clock;
  if (cfg.data.empty()) fail(ErrorCode::ConfigError, "extract needs --data");
  const fs::path root(cfg.data), out(cfg.out);
  fs::create_directories(out);
  const auto extractor = cfg.extractor();
  const auto segments = extractor.segments_for(cfg.image_size, cfg.image_size);
  const std::size_t dim = segments[3].offset + segments[3].length;

  ExtractSummary summary;
  summary.dim = dim;
  json inputs = json::object(), outputs = json::object();
  double extract_seconds = 0.0;
  std::size_t extracted = 0;
  for (const char* split : kSplits) {
    const auto split_root = root / split;
    if (std::string_view(split) == "Testing" && !fs::exists(split_root)) continue;
    const auto ds = scan_dataset(split_root);
    log(std::string(split) + ": " + std::to_string(ds.size()) + " images");
    FeatureSet fs_out;
    fs_out.features = Matrix<float>(ds.size(), dim);
    fs_out.labels = ds.labels();
    std::string listing;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto bytes = read_file_bytes(ds.samples[i].path);
      listing += fs::relative(ds.samples[i].path, root).generic_string() + ' ' + sha256_hex(bytes) + '\n';
      const auto img = preprocess(decode_pgm(bytes), cfg.image_size);
      const auto t0 = clock::now();
      const auto tensor = extractor.extract(img);
      extract_seconds += std::chrono::duration<double>(clock::now() - t0).count();
      ++extracted;
      std::copy(tensor.values.begin(), tensor.values.end(), fs_out.features.row(i).begin());
      if ((i + 1) % 100 == 0 || i + 1 == ds.size()) {
        log(std::string(split) + ": " + std::to_string(i + 1) + "/" + std::to_string(ds.size()));
      }
    }
    const auto path = out / features_file_name(split);
    write_feature_file(path, fs_out);
    if (!(read_feature_file(path) == fs_out)) fail(ErrorCode::IoError, "feature file verification failed");
    inputs[split] = {{"samples", ds.size()},
                     {"digest", sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(listing.data()),
                                                     listing.size()))}};
    outputs[features_file_name(split)] = file_digest(path);
    summary.counts.emplace_back(split, ds.size());
  }

  json seg = json::array();
  for (std::size_t i = 0; i < 4; ++i) {
    seg.push_back({{"name", kDescriptorNames[i]}, {"offset", segments[i].offset},
                   {"length", segments[i].length}});
  }
  write_text(out / kSegmentsName,
             json{{"dim", dim}, {"image_size", cfg.image_size}, {"segments", seg}}.dump(2) + "\n");
  outputs[kSegmentsName] = file_digest(out / kSegmentsName);

  summary.extract_ms_per_image = extracted ? 1000.0 * extract_seconds / static_cast<double>(extracted) : 0.0;
  write_manifest_stage(out, "extract",
                       {{"config", to_json(cfg)},
                        {"inputs", inputs},
                        {"outputs", outputs},
                        {"timing", {{"extract_ms_per_image", summary.extract_ms_per_image},
                                    {"images", extracted}}}});
  log("radiomic extraction: " + format_number(summary.extract_ms_per_image) + " ms/image");
  return summary;
}

/// Loads an optional deep-feature file and checks it lines up with `radiomic`.
inline std::optional<FeatureSet> load_deep(const std::string& path, const FeatureSet& radiomic) {
  if (path.empty()) return std::nullopt;
  auto deep = read_feature_file(path);
  if (deep.count() != radiomic.count()) {
    fail(ErrorCode::DimMismatch, "deep feature file has " + std::to_string(deep.count()) +
                                     " samples, radiomic file " + std::to_string(radiomic.count()));
  }
  if (deep.labels != radiomic.labels) {
    fail(ErrorCode::DimMismatch, "deep feature labels do not match radiomic labels");
  }
  if (deep.dim() == 0) fail(ErrorCode::DimMismatch, "deep feature file has zero width");
  return deep;
}

/// Flags feature files whose digest differs from what extract recorded.
inline std::vector<std::string> stale_inputs(const fs::path& features_dir,
                                             std::span<const std::string> names) {
  std::vector<std::string> stale;
  const auto m = read_manifest(features_dir);
  if (!m.contains("extract")) return stale;
  const auto& outs = m["extract"]["outputs"];
  for (const auto& n : names) {
    if (outs.contains(n) && outs[n].get<std::string>() != file_digest(features_dir / n)) {
      stale.push_back(n);
      log("warning: " + n + " does not match the digest recorded by extract");
    }
  }
  return stale;
}

struct TrainSummary {
  TrainHistory history;
  std::size_t train_rows = 0, val_rows = 0, input_dim = 0;
};

inline TrainSummary run_train(const RunConfig& cfg) {
  const fs::path out(cfg.out), feat_dir = cfg.features_path();
  fs::create_directories(out);
  const std::string feat_name = features_file_name("Training");
  const auto radiomic = read_feature_file(feat_dir / feat_name);
  if (radiomic.count() == 0) fail(ErrorCode::EmptyDataset, "training feature file is empty");
  const auto deep = load_deep(cfg.deep_features_train, radiomic);
  const Matrix<float> x = deep ? fuse_rows(deep->features, radiomic.features) : radiomic.features;
  const std::size_t deep_dim = deep ? deep->dim() : 0;

  const auto split = stratified_split_indices(radiomic.labels, kNumClasses, cfg.train_fraction, cfg.seed);
  auto pick_labels = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::uint8_t> l;
    for (auto i : idx) l.push_back(radiomic.labels[i]);
    return l;
  };
  const auto train_x = select_rows(x, std::span<const std::size_t>(split.train));
  const auto val_x = select_rows(x, std::span<const std::size_t>(split.val));
  const auto train_y = pick_labels(split.train), val_y = pick_labels(split.val);
  log("training on " + std::to_string(train_x.rows) + " rows, validating on " +
      std::to_string(val_x.rows) + ", input dim " + std::to_string(x.cols));

  const auto tcfg = cfg.train_config();
  auto result = train<float>(train_x, train_y, val_x, val_y, tcfg);
  for (const auto& e : result.history.epochs) {
    log("epoch " + std::to_string(e.epoch) + " loss " + format_number(e.train_loss) + " acc " +
        format_number(e.train_acc) + " val_loss " + format_number(e.val_loss) + " val_acc " +
        format_number(e.val_acc) + " lr " + format_number(e.lr));
  }

  const auto classes = default_class_table();
  const auto ck_bytes = encode_checkpoint(result.params, deep_dim, classes);
  write_file_bytes(out / kModelName, ck_bytes);
  decode_checkpoint(read_file_bytes(out / kModelName));
  write_text(out / kHistoryName, result.history.to_csv());

  const std::string names[] = {feat_name};
  json inputs = {{feat_name, file_digest(feat_dir / feat_name)}};
  if (deep) inputs["deep_features_train"] = file_digest(cfg.deep_features_train);
  write_manifest_stage(out, "train",
                       {{"config", to_json(cfg)},
                        {"inputs", inputs},
                        {"stale_inputs", stale_inputs(feat_dir, names)},
                        {"outputs", {{kModelName, file_digest(out / kModelName)},
                                     {kHistoryName, file_digest(out / kHistoryName)}}},
                        {"epochs_run", result.history.epochs.size()},
                        {"best_epoch", result.history.best_epoch},
                        {"stopped_early", result.history.stopped_early},
                        {"parameters", result.params.parameter_count()}});
  return {std::move(result.history), train_x.rows, val_x.rows, x.cols};
}

struct EvalSummary {
  EvalReport plain;
  std::optional<EvalReport> tta;
};

inline EvalSummary run_eval(const RunConfig& cfg) {
  const fs::path out(cfg.out), feat_dir = cfg.features_path();
  fs::create_directories(out);
  const fs::path model_path = out / kModelName;
  if (!fs::exists(model_path)) fail(ErrorCode::IoError, "missing checkpoint " + model_path.string());
  const auto ck = decode_checkpoint(read_file_bytes(model_path));
  const std::string feat_name = features_file_name("Testing");
  const auto radiomic = read_feature_file(feat_dir / feat_name);
  const auto deep = load_deep(cfg.deep_features_test, radiomic);
  if ((deep ? deep->dim() : 0) != ck.deep_dim) {
    fail(ErrorCode::DimMismatch, "checkpoint expects deep dim " + std::to_string(ck.deep_dim));
  }
  const Matrix<float> x = deep ? fuse_rows(deep->features, radiomic.features) : radiomic.features;
  if (x.cols != ck.params.input_dim()) {
    fail(ErrorCode::DimMismatch, "test features have width " + std::to_string(x.cols) +
                                     ", checkpoint expects " + std::to_string(ck.params.input_dim()));
  }

  EvalSummary summary;
  EvalOptions plain_opts;
  summary.plain = evaluate(ck.params, x, radiomic.labels, plain_opts, nullptr, ck.classes);
  write_text(out / kMetricsName, render_report(summary.plain));
  json outputs = {{kMetricsName, file_digest(out / kMetricsName)}};
  json extra = json::object();

  if (cfg.tta) {
    if (cfg.data.empty()) fail(ErrorCode::ConfigError, "TTA evaluation needs --data to reload test images");
    const auto ds = scan_dataset(fs::path(cfg.data) / "Testing");
    if (ds.labels() != radiomic.labels) {
      fail(ErrorCode::DimMismatch, "test images do not match the test feature file");
    }
    const auto extractor = cfg.extractor();
    TtaSource source;
    source.extractor = &extractor;
    source.deep = deep ? &deep->features : nullptr;
    source.load_image = [&](std::size_t i) { return load_preprocessed(ds.samples[i].path, cfg.image_size); };
    EvalOptions opts;
    opts.tta = true;
    opts.n_views = cfg.views;
    opts.augment = cfg.augment_config();
    log("TTA evaluation with " + std::to_string(cfg.views) + " views");
    summary.tta = evaluate(ck.params, x, radiomic.labels, opts, &source, ck.classes);
    write_text(out / kMetricsTtaName, render_report(*summary.tta));
    outputs[kMetricsTtaName] = file_digest(out / kMetricsTtaName);
    extra["tta_delta_accuracy"] = summary.tta->accuracy - summary.plain.accuracy;
    log("accuracy " + format_number(summary.plain.accuracy) + " -> " +
        format_number(summary.tta->accuracy) + " with TTA (delta " +
        format_number(summary.tta->accuracy - summary.plain.accuracy) + ")");
  } else {
    log("accuracy " + format_number(summary.plain.accuracy));
  }

  json inputs = {{kModelName, file_digest(model_path)}, {feat_name, file_digest(feat_dir / feat_name)}};
  if (deep) inputs["deep_features_test"] = file_digest(cfg.deep_features_test);
  const std::string names[] = {feat_name};
  json section = {{"config", to_json(cfg)},
                  {"inputs", inputs},
                  {"stale_inputs", stale_inputs(feat_dir, names)},
                  {"outputs", outputs}};
  section.update(extra);
  write_manifest_stage(out, "eval", std::move(section));
  return summary;
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

inline void print_error(std::string_view code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << "\n";
}

/// Entry point shared by the radnet executable and the tests.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"Radiomics feature extraction and fusion-head training"};
  app.require_subcommand(1);

  std::string config_path, data, out, features, deep;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> views, image_size, epochs, batch;
  std::optional<double> lr;
  bool tta = false;

  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file or run manifest");
    sub->add_option("--data", data, "dataset root containing Training/ and Testing/");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--features", features, "directory holding feature files (default: --out)");
    sub->add_option("--seed", seed, "global seed");
    sub->add_option("--deep-features", deep, "deep feature file (RFV1) for this split");
    sub->add_flag("--tta", tta, "also evaluate with test-time augmentation");
    sub->add_option("--views", views, "TTA views including the original");
    sub->add_option("--image-size", image_size, "square preprocessing size");
    sub->add_option("--epochs", epochs, "maximum epochs");
    sub->add_option("--batch-size", batch, "mini-batch size");
    sub->add_option("--lr", lr, "initial learning rate");
  };
  auto* extract_cmd = app.add_subcommand("extract", "extract radiomic feature files");
  auto* train_cmd = app.add_subcommand("train", "train the fusion head");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained head");
  for (auto* s : {extract_cmd, train_cmd, eval_cmd}) add_shared(s);

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic four-class texture dataset");
  std::size_t synth_train = 80, synth_test = 20, synth_size = 64;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--out", out, "dataset root")->required();
  synth_cmd->add_option("--train-per-class", synth_train);
  synth_cmd->add_option("--test-per-class", synth_test);
  synth_cmd->add_option("--size", synth_size);
  synth_cmd->add_option("--seed", synth_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth_cmd->parsed()) {
      synthetic::write_dataset(out, synth_train, synth_test, synth_size, synth_seed);
      log("wrote synthetic dataset to " + out);
      return 0;
    }
    const std::string stage = extract_cmd->parsed() ? "extract" : train_cmd->parsed() ? "train" : "eval";
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path, stage);
    if (!data.empty()) cfg.data = data;
    if (!out.empty()) cfg.out = out;
    if (!features.empty()) cfg.features_dir = features;
    if (seed) cfg.seed = *seed;
    if (!deep.empty()) (stage == "eval" ? cfg.deep_features_test : cfg.deep_features_train) = deep;
    if (tta) cfg.tta = true;
    if (views) cfg.views = *views;
    if (image_size) cfg.image_size = *image_size;
    if (epochs) cfg.train.max_epochs = *epochs;
    if (batch) cfg.train.batch_size = *batch;
    if (lr) cfg.train.learning_rate = *lr;

    if (stage == "extract") {
      run_extract(cfg);
    } else if (stage == "train") {
      run_train(cfg);
    } else {
      run_eval(cfg);
    }
    return 0;
  } catch (const Error& e) {
    print_error(code_name(e.code()), e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    print_error(code_name(ErrorCode::IoError), e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
    return 1;
  }
}

}  // namespace radnet::cli
