#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "metric_oracle.hpp"
#include "radnet/eval.hpp"
#include "radnet/rng.hpp"
#include "test_util.hpp"

using namespace radnet;

namespace {

Image random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  CounterRng rng(seed);
  Image img(w, h);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform01());
  return img;
}

}  // namespace

TEST(Confusion, HandCount) {
  const std::vector<std::size_t> labels{0, 0, 1}, preds{0, 1, 1};
  const auto cm = confusion_matrix(preds, labels);
  EXPECT_EQ(cm.at(0, 0), 1u);
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.at(1, 1), 1u);
  EXPECT_EQ(cm.total(), 3u);
  EXPECT_EQ(cm.trace(), 2u);
}

TEST(Confusion, PerfectIsDiagonal) {
  const std::vector<std::size_t> v{0, 1, 2, 3, 3, 2};
  const auto cm = confusion_matrix(v, v);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t p = 0; p < 4; ++p) {
      if (t != p) {
        EXPECT_EQ(cm.at(t, p), 0u);
      }
    }
  }
  const auto r = metrics_from_confusion(cm);
  EXPECT_EQ(r.accuracy, 100.0);
  for (const auto& m : r.per_class) {
    EXPECT_EQ(m.precision, 100.0);
    EXPECT_EQ(m.recall, 100.0);
    EXPECT_EQ(m.f1, 100.0);
  }
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Confusion, Errors) {
  const std::vector<std::size_t> a{0, 1}, b{0};
  EXPECT_RADNET_ERROR(confusion_matrix(a, b), LengthMismatch);
  const std::vector<std::size_t> c{0, 7};
  EXPECT_RADNET_ERROR(confusion_matrix(c, a), IndexOutOfRange);
  ConfusionMatrix empty{default_class_table(), std::vector<std::uint64_t>(16, 0)};
  EXPECT_RADNET_ERROR(metrics_from_confusion(empty), EmptyMatrix);
}

TEST(Metrics, OneClassSlice) {
  const auto m = class_metrics(8, 2, 1, 9, "glioma");
  EXPECT_NEAR(m.precision, 80.0, 1e-12);
  EXPECT_NEAR(m.recall, 800.0 / 9.0, 1e-12);
  EXPECT_NEAR(m.f1, 84.21052631578947, 1e-10);
}

TEST(Metrics, ZeroDenominatorWarns) {
  // Class 3 never appears and is never predicted.
  const std::vector<std::size_t> labels{0, 1, 2}, preds{0, 1, 2};
  const auto r = metrics_from_confusion(confusion_matrix(preds, labels));
  EXPECT_EQ(r.per_class[3].precision, 0.0);
  EXPECT_EQ(r.per_class[3].f1, 0.0);
  EXPECT_EQ(r.warnings.size(), 3u);
  EXPECT_NEAR(r.overall.precision, 75.0, 1e-12);
}

TEST(Metrics, MatchBruteForce) {
  CounterRng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<std::size_t> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng.below(4);
      labels[i] = rng.below(4);
    }
    const auto r = metrics_from_confusion(confusion_matrix(preds, labels));
    const auto oracle = radnet::testing::brute_force_metrics(preds, labels, 4);
    double mp = 0, mr = 0, mf = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      ASSERT_EQ(r.per_class[c], oracle[c]);
      mp += oracle[c].precision / 4;
      mr += oracle[c].recall / 4;
      mf += oracle[c].f1 / 4;
    }
    ASSERT_NEAR(r.overall.precision, mp, 1e-12);
    ASSERT_NEAR(r.overall.recall, mr, 1e-12);
    ASSERT_NEAR(r.overall.f1, mf, 1e-12);
  }
}

TEST(Report, JsonRoundTrip) {
  const std::vector<std::size_t> labels{0, 0, 1, 2, 3, 3}, preds{0, 1, 1, 2, 3, 0};
  auto r = metrics_from_confusion(confusion_matrix(preds, labels));
  r.tta = true;
  r.n_views = 8;
  const auto text = render_report(r);
  EXPECT_EQ(parse_report(text), r);
  const auto j = nlohmann::json::parse(text);
  for (const auto& name : {"glioma", "meningioma", "pituitary", "notumor"}) {
    EXPECT_TRUE(j["per_class"].contains(name));
  }
  EXPECT_EQ(j["averaging"], "macro");
  EXPECT_EQ(j["confusion"].size(), 4u);
  EXPECT_RADNET_ERROR(parse_report("{}"), CorruptFile);
}

TEST(Predict, RowsSumToOne) {
  const std::vector<std::size_t> hidden{8};
  const auto model = init_head<float>(5, hidden, 4, 0.5, 1);
  Matrix<float> x(20, 5);
  CounterRng rng(2);
  for (auto& v : x.data) v = static_cast<float>(rng.uniform(-50, 50));
  const auto p = predict_rows(model, x, 7);
  for (std::size_t r = 0; r < p.rows; ++r) {
    double s = 0;
    for (double v : p.row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Tta, SingleViewEqualsPlain) {
  RadiomicExtractor ex;
  const auto img = random_image(32, 32, 3);
  const auto rad = ex.extract(img);
  const std::vector<std::size_t> hidden{8};
  const auto model = init_head<float>(rad.values.size(), hidden, 4, 0.5, 4);
  const auto plain = predict_rows(model, Matrix<float>(1, rad.values.size(), rad.values));
  const auto tta = tta_predict(model, img, {}, 1, AugmentConfig{}, ex, 0);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(tta[c], plain(0, c));
}

TEST(Tta, IdentityViewsEqualPlain) {
  RadiomicExtractor ex;
  const auto img = random_image(32, 32, 5);
  const auto rad = ex.extract(img);
  const std::vector<std::size_t> hidden{8};
  const auto model = init_head<float>(rad.values.size(), hidden, 4, 0.5, 6);
  const auto plain = predict_rows(model, Matrix<float>(1, rad.values.size(), rad.values));
  const auto tta = tta_predict(model, img, {}, 8, AugmentConfig::disabled(), ex, 0);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(tta[c], plain(0, c));
}

TEST(Tta, DeterministicAndNormalized) {
  RadiomicExtractor ex;
  const auto img = random_image(32, 32, 7);
  const std::vector<float> deep{0.5f, -1.0f, 2.0f};
  const std::vector<std::size_t> hidden{8};
  const auto model = init_head<float>(3 + ex.extract(img).values.size(), hidden, 4, 0.5, 8);
  AugmentConfig cfg;
  cfg.seed = 9;
  const auto a = tta_predict(model, img, deep, 8, cfg, ex, 3);
  const auto b = tta_predict(model, img, deep, 8, cfg, ex, 3);
  EXPECT_EQ(a, b);
  double s = 0;
  for (double v : a) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_RADNET_ERROR(tta_predict(model, img, deep, 0, cfg, ex, 3), InvalidParam);
}

TEST(Evaluate, PerfectModelAndErrors) {
  // A head whose logits copy the one-hot input.
  const std::vector<std::size_t> hidden{};
  auto model = init_head<float>(4, hidden, 4, 0.0, 1);
  std::fill(model.weights[0].data.begin(), model.weights[0].data.end(), 0.0f);
  for (std::size_t i = 0; i < 4; ++i) model.weights[0](i, i) = 10.0f;
  const std::vector<std::uint8_t> labels{0, 1, 2, 3, 2, 1};
  Matrix<float> x(labels.size(), 4);
  for (std::size_t i = 0; i < labels.size(); ++i) x(i, labels[i]) = 1.0f;
  const auto r = evaluate(model, x, labels, EvalOptions{});
  EXPECT_EQ(r.accuracy, 100.0);
  EXPECT_EQ(r.n_samples, labels.size());
  EXPECT_FALSE(r.tta);
  EXPECT_EQ(r.n_views, 1u);
  EXPECT_RADNET_ERROR(evaluate(model, Matrix<float>(0, 4), {}, EvalOptions{}), EmptyDataset);
  EvalOptions tta;
  tta.tta = true;
  EXPECT_RADNET_ERROR(evaluate(model, x, labels, tta), InvalidParam);
}
