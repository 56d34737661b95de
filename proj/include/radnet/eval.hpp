#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "radnet/error.hpp"
#include "radnet/fusionnet.hpp"
#include "radnet/image.hpp"
#include "radnet/imgio.hpp"
#include "radnet/matrix.hpp"
#include "radnet/preprocess.hpp"
#include "radnet/radiomics.hpp"
#include "radnet/rng.hpp"

namespace radnet {

/// counts[true][pred]
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::uint64_t> counts;

  std::size_t num_classes() const { return classes.size(); }
  std::uint64_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * num_classes() + pred];
  }
  std::uint64_t& at(std::size_t truth, std::size_t pred) {
    return counts[truth * num_classes() + pred];
  }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < num_classes(); ++i) t += at(i, i);
    return t;
  }
  std::uint64_t support(std::size_t truth) const {
    std::uint64_t t = 0;
    for (std::size_t p = 0; p < num_classes(); ++p) t += at(truth, p);
    return t;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion_matrix(std::span<const std::size_t> preds,
                                        std::span<const std::size_t> labels,
                                        std::vector<std::string> classes = default_class_table()) {
  if (preds.size() != labels.size()) {
    fail(ErrorCode::LengthMismatch, "predictions and labels differ in length");
  }
  ConfusionMatrix cm;
  cm.classes = std::move(classes);
  const std::size_t k = cm.num_classes();
  cm.counts.assign(k * k, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= k || labels[i] >= k) {
      fail(ErrorCode::IndexOutOfRange, "class index out of range in confusion matrix");
    }
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

/// Metrics are percentages in [0, 100].
struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct EvalReport {
  std::vector<std::string> classes;
  std::vector<ClassMetrics> per_class;
  ClassMetrics overall;  // unweighted macro mean; support = total samples
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  bool tta = false;
  std::size_t n_views = 1;
  std::size_t n_samples = 0;
  std::vector<std::string> warnings;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Precision = TP/(TP+FP), recall = TP/(TP+FN), F1 = 2PR/(P+R) per class;
/// a zero denominator yields 0 and a warning.
inline ClassMetrics class_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                  std::uint64_t support, const std::string& name,
                                  std::vector<std::string>* warnings = nullptr) {
  ClassMetrics m;
  m.support = support;
  auto warn = [&](const char* what) {
    if (warnings) warnings->push_back(name + ": " + what + " has a zero denominator, reported as 0");
  };
  if (tp + fp > 0) {
    m.precision = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    warn("precision");
  }
  if (tp + fn > 0) {
    m.recall = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    warn("recall");
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    warn("f1");
  }
  return m;
}

inline EvalReport metrics_from_confusion(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) fail(ErrorCode::EmptyMatrix, "confusion matrix has no samples");
  EvalReport r;
  r.classes = cm.classes;
  r.confusion = cm;
  r.n_samples = total;
  const std::size_t k = cm.num_classes();
  for (std::size_t c = 0; c < k; ++c) {
    const std::uint64_t tp = cm.at(c, c);
    std::uint64_t fp = 0, fn = 0;
    for (std::size_t o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    r.per_class.push_back(class_metrics(tp, fp, fn, cm.support(c), cm.classes[c], &r.warnings));
  }
  for (const auto& m : r.per_class) {
    r.overall.precision += m.precision;
    r.overall.recall += m.recall;
    r.overall.f1 += m.f1;
  }
  r.overall.precision /= static_cast<double>(k);
  r.overall.recall /= static_cast<double>(k);
  r.overall.f1 /= static_cast<double>(k);
  r.overall.support = total;
  r.accuracy = 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
  return r;
}

// ---------------------------------------------------------------------------
// JSON rendering
// ---------------------------------------------------------------------------

inline nlohmann::json report_to_json(const EvalReport& r) {
  using nlohmann::json;
  auto metrics = [](const ClassMetrics& m) {
    return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                {"support", m.support}};
  };
  json per_class = json::object();
  for (std::size_t c = 0; c < r.classes.size(); ++c) per_class[r.classes[c]] = metrics(r.per_class[c]);
  json confusion = json::array();
  const std::size_t k = r.confusion.num_classes();
  for (std::size_t t = 0; t < k; ++t) {
    json row = json::array();
    for (std::size_t p = 0; p < k; ++p) row.push_back(r.confusion.at(t, p));
    confusion.push_back(std::move(row));
  }
  return json{{"accuracy", r.accuracy},
              {"averaging", "macro"},
              {"classes", r.classes},
              {"per_class", std::move(per_class)},
              {"overall", metrics(r.overall)},
              {"confusion", std::move(confusion)},
              {"tta", r.tta},
              {"n_views", r.n_views},
              {"n_samples", r.n_samples},
              {"warnings", r.warnings}};
}

inline std::string render_report(const EvalReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline EvalReport parse_report(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.classes = j.at("classes").get<std::vector<std::string>>();
    auto metrics = [](const nlohmann::json& m) {
      return ClassMetrics{m.at("precision").get<double>(), m.at("recall").get<double>(),
                          m.at("f1").get<double>(), m.at("support").get<std::uint64_t>()};
    };
    for (const auto& name : r.classes) r.per_class.push_back(metrics(j.at("per_class").at(name)));
    r.overall = metrics(j.at("overall"));
    r.accuracy = j.at("accuracy").get<double>();
    r.confusion.classes = r.classes;
    for (const auto& row : j.at("confusion")) {
      for (const auto& v : row) r.confusion.counts.push_back(v.get<std::uint64_t>());
    }
    if (r.confusion.counts.size() != r.classes.size() * r.classes.size()) {
      fail(ErrorCode::CorruptFile, "confusion matrix shape does not match class table");
    }
    r.tta = j.at("tta").get<bool>();
    r.n_views = j.at("n_views").get<std::size_t>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptFile, std::string("malformed report JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

/// Softmax taken in double over float logits, so rows sum to 1 within 1e-15.
inline std::vector<double> probabilities_from_logits(std::span<const float> logits) {
  std::vector<double> z(logits.begin(), logits.end());
  softmax_inplace(std::span<double>(z));
  return z;
}

/// Eval-mode class probabilities for every row.
inline Matrix<double> predict_rows(const HeadParams<float>& model, const Matrix<float>& x,
                                   std::size_t chunk = 256) {
  Matrix<double> out(x.rows, model.num_classes());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.rows; start += chunk) {
    const std::size_t end = std::min(x.rows, start + chunk);
    idx.clear();
    for (std::size_t i = start; i < end; ++i) idx.push_back(i);
    const auto cache = head_forward(model, select_rows(x, std::span<const std::size_t>(idx)), Mode::Eval);
    for (std::size_t r = 0; r < cache.logits.rows; ++r) {
      const auto p = probabilities_from_logits(cache.logits.row(r));
      std::copy(p.begin(), p.end(), out.row(start + r).begin());
    }
  }
  return out;
}

/// Stream key for view `view` of test sample `sample`.
inline std::uint64_t tta_view_key(std::uint64_t sample, std::uint64_t view) {
  return mix_key({sample, 0x545441ULL, view});
}

/// Mean of the softmax outputs over the original image plus n_views - 1
/// augmented copies. The deep vector, when present, is held fixed and put in
/// front of each view's radiomic vector. The running mean reproduces a
/// repeated vector bit-exactly; the result is renormalized only if its sum
/// drifts from 1 by more than 1e-12.
inline std::vector<double> tta_predict(const HeadParams<float>& model, const Image& img,
                                       std::span<const float> deep, std::size_t n_views,
                                       const AugmentConfig& cfg,
                                       const RadiomicExtractor& extractor,
                                       std::uint64_t sample_index = 0) {
  if (n_views < 1) fail(ErrorCode::InvalidParam, "TTA needs at least one view");
  std::vector<double> mean(model.num_classes(), 0.0);
  for (std::size_t v = 0; v < n_views; ++v) {
    const Image view = v == 0 ? img : augment(img, cfg, tta_view_key(sample_index, v));
    const auto rad = extractor.extract(view);
    Matrix<float> row;
    if (deep.empty()) {
      row = Matrix<float>(1, rad.values.size(), rad.values);
    } else {
      row = Matrix<float>(1, deep.size() + rad.values.size(), fuse_features(deep, rad.values).values);
    }
    const auto cache = head_forward(model, row, Mode::Eval);
    const auto p = probabilities_from_logits(cache.logits.row(0));
    const double k = static_cast<double>(v + 1);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += (p[c] - mean[c]) / k;
  }
  double sum = 0.0;
  for (double m : mean) sum += m;
  if (std::abs(sum - 1.0) > 1e-12) {
    for (auto& m : mean) m /= sum;
  }
  return mean;
}

struct EvalOptions {
  bool tta = false;
  std::size_t n_views = 8;
  AugmentConfig augment;
};

/// Inputs needed to re-extract radiomics for augmented views.
struct TtaSource {
  std::function<Image(std::size_t)> load_image;  // preprocessed unit-domain image
  const Matrix<float>* deep = nullptr;
  const RadiomicExtractor* extractor = nullptr;
};

/// Predicts every sample (argmax, lowest index on ties) and summarizes.
/// Without TTA the stored feature rows are used directly.
inline EvalReport evaluate(const HeadParams<float>& model, const Matrix<float>& features,
                           std::span<const std::uint8_t> labels, const EvalOptions& opts,
                           const TtaSource* source = nullptr,
                           std::vector<std::string> classes = default_class_table()) {
  if (features.rows == 0 || labels.empty()) fail(ErrorCode::EmptyDataset, "nothing to evaluate");
  if (features.rows != labels.size()) fail(ErrorCode::DimMismatch, "feature rows and labels disagree");
  std::vector<std::size_t> preds(labels.size()), truth(labels.begin(), labels.end());
  if (!opts.tta) {
    const auto probs = predict_rows(model, features);
    for (std::size_t i = 0; i < probs.rows; ++i) preds[i] = argmax(probs.row(i));
  } else {
    if (source == nullptr || !source->load_image || source->extractor == nullptr) {
      fail(ErrorCode::InvalidParam, "TTA evaluation needs an image source");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      std::span<const float> deep;
      if (source->deep != nullptr) deep = source->deep->row(i);
      const auto p = tta_predict(model, source->load_image(i), deep, opts.n_views, opts.augment,
                                 *source->extractor, i);
      preds[i] = argmax(std::span<const double>(p));
    }
  }
  auto report = metrics_from_confusion(confusion_matrix(preds, truth, std::move(classes)));
  report.tta = opts.tta;
  report.n_views = opts.tta ? opts.n_views : 1;
  return report;
}

}  // namespace radnet
