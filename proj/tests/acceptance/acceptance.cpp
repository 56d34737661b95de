// Acceptance suite: prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "../gradcheck.hpp"
#include "../metric_oracle.hpp"
#include "CLI11.hpp"
#include "radnet/cli.hpp"

using namespace radnet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Fail;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Image random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  CounterRng rng(seed);
  Image img(w, h);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform01());
  return img;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "radnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  const auto b = read_file_bytes(p);
  return {b.begin(), b.end()};
}

// ----------------------------------------------------------------- 1

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t entries = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    auto c = testing::make_gradcheck_case(1000 + i);
    const auto r = testing::gradcheck(c);
    worst = std::max(worst, r.max_rel_error);
    entries += r.checked;
  }
  const double secs = seconds_since(t0);
  return pass_if(worst < 1e-4 && secs < 30.0,
                 "20 configurations, " + std::to_string(entries) + " parameters, max rel error " +
                     fmt(worst) + " (< 1e-4), " + fmt(secs) + " s (< 30 s)");
}

// ----------------------------------------------------------------- 2

Outcome transform_exactness() {
  CounterRng rng(2);
  double worst_sum = 0.0;
  for (int r = 0; r < 1000; ++r) {
    std::vector<double> z(2 + rng.below(9));
    for (auto& v : z) v = rng.uniform(-40.0, 40.0);
    softmax_inplace(std::span<double>(z));
    double s = 0.0;
    for (double v : z) s += v;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  Matrix<double> onehot(3, 4, {1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  const double perfect = cross_entropy(onehot, onehot);
  const double uniform = cross_entropy(Matrix<double>(3, 4, 0.25), onehot);
  double worst_gelu = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = -8.0 + 16.0 * i / 999.0;
    worst_gelu = std::max(worst_gelu, std::abs(gelu(x) - gelu(-x) - x));
  }
  const bool ok = worst_sum <= 1e-9 && perfect == 0.0 && std::abs(uniform - std::log(4.0)) <= 1e-9 &&
                  worst_gelu <= 1e-9;
  return pass_if(ok, "softmax |sum-1| " + fmt(worst_sum) + ", CE(perfect) " + fmt(perfect) +
                         ", |CE(uniform)-ln4| " + fmt(std::abs(uniform - std::log(4.0))) +
                         ", gelu identity " + fmt(worst_gelu) + " (all <= 1e-9)");
}

// ----------------------------------------------------------------- 3

double plane_energy(const Plane& p) {
  double s = 0.0;
  for (double v : p.data) s += v * v;
  return s;
}

Outcome dwt_orthonormality() {
  double worst_rec = 0.0, worst_energy = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto img = random_image(64, 64, 300 + i);
    const auto dec = haar_forward(img, 1 + i % 4);
    const auto back = haar_inverse(dec);
    double e_in = 0.0;
    for (std::size_t k = 0; k < img.size(); ++k) {
      worst_rec = std::max(worst_rec, std::abs(back.data[k] - double{img.data[k]}));
      e_in += double{img.data[k]} * img.data[k];
    }
    double e_out = plane_energy(dec.ll);
    for (const auto& l : dec.levels) e_out += plane_energy(l.lh) + plane_energy(l.hl) + plane_energy(l.hh);
    worst_energy = std::max(worst_energy, std::abs(e_out - e_in) / e_in);
  }
  return pass_if(worst_rec < 1e-6 && worst_energy <= 1e-4,
                 "100 images 64x64, max reconstruction error " + fmt(worst_rec) +
                     " (< 1e-6), max Parseval rel error " + fmt(worst_energy) + " (<= 1e-4)");
}

// ----------------------------------------------------------------- 4

Outcome descriptor_hand_cases() {
  const Image flat(64, 64, Domain::Unit, 0.37f);
  std::vector<std::string> failures;
  for (float v : hog_features(flat)) {
    if (v != 0.0f) {
      failures.push_back("HOG");
      break;
    }
  }
  const auto lbp = lbp_features(flat);
  for (std::size_t i = 0; i < lbp.size(); ++i) {
    if (lbp[i] != (i == 255 ? 1.0f : 0.0f)) {
      failures.push_back("LBP");
      break;
    }
  }
  const auto gab = gabor_features(flat);
  for (std::size_t i = 1; i < gab.size(); i += 2) {
    if (gab[i] != 0.0f) {
      failures.push_back("Gabor std");
      break;
    }
  }
  const auto dec = haar_forward(flat, 2);
  bool details_zero = true;
  for (const auto& l : dec.levels) {
    for (const auto* b : {&l.lh, &l.hl, &l.hh}) {
      for (double v : b->data) details_zero = details_zero && v == 0.0;
    }
  }
  if (!details_zero) failures.push_back("DWT details");
  const auto h = haar_forward(Plane{2, 2, {1, 2, 3, 4}}, 1);
  if (!(h.ll.data[0] == 5.0 && h.levels[0].lh.data[0] == -2.0 && h.levels[0].hl.data[0] == -1.0 &&
        h.levels[0].hh.data[0] == 0.0)) {
    failures.push_back("Haar 2x2");
  }
  std::string detail = "constant image: HOG zero, LBP mass at 255, Gabor std zero, DWT details zero; "
                       "[[1,2],[3,4]] -> (5,-2,-1,0)";
  for (const auto& f : failures) detail += "; mismatch in " + f;
  return pass_if(failures.empty(), detail);
}

// ----------------------------------------------------------------- 5

Outcome metric_oracle() {
  CounterRng rng(5);
  std::size_t mismatches = 0;
  double worst_macro = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    std::vector<std::size_t> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng.below(4);
      labels[i] = rng.below(4);
    }
    const auto r = metrics_from_confusion(confusion_matrix(preds, labels));
    const auto oracle = testing::brute_force_metrics(preds, labels, 4);
    double p = 0.0, rc = 0.0, f = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      mismatches += !(r.per_class[c] == oracle[c]);
      p += r.per_class[c].precision;
      rc += r.per_class[c].recall;
      f += r.per_class[c].f1;
    }
    worst_macro = std::max({worst_macro, std::abs(r.overall.precision - p / 4),
                            std::abs(r.overall.recall - rc / 4), std::abs(r.overall.f1 - f / 4)});
  }
  return pass_if(mismatches == 0 && worst_macro <= 1e-12,
                 "1000 random sets, " + std::to_string(mismatches) + " per-class mismatches, macro error " +
                     fmt(worst_macro) + " (<= 1e-12)");
}

// ----------------------------------------------------------------- 6 and 7

struct EndToEnd {
  bool ran = false;
  bool ok_a = false, ok_b = false;
  double seconds_a = 0.0;
  double accuracy = 0.0;
  double tta_accuracy = 0.0;
  std::vector<std::string> differing;
  std::string error;
  fs::path run_a;
};

EndToEnd& end_to_end(const fs::path& work) {
  static EndToEnd e;
  if (e.ran) return e;
  e.ran = true;
  std::error_code ec;
  fs::remove_all(work / "e2e", ec);
  const auto data = work / "e2e/data";
  e.run_a = work / "e2e/run_a";
  const auto run_b = work / "e2e/run_b";
  // 4 classes x (80 train + 20 test) = 400 images at 64x64.
  if (run_cli({"synth", "--out", data.string(), "--train-per-class", "80", "--test-per-class", "20",
               "--size", "64", "--seed", "2024"}) != 0) {
    e.error = "synthetic dataset generation failed";
    return e;
  }
  const auto t0 = Clock::now();
  e.ok_a = run_cli({"extract", "--data", data.string(), "--out", e.run_a.string(), "--seed", "17"}) == 0 &&
           run_cli({"train", "--out", e.run_a.string(), "--seed", "17"}) == 0 &&
           run_cli({"eval", "--out", e.run_a.string(), "--data", data.string(), "--seed", "17", "--tta"}) == 0;
  e.seconds_a = seconds_since(t0);
  if (!e.ok_a) {
    e.error = "pipeline run failed";
    return e;
  }
  e.accuracy = parse_report(slurp(e.run_a / "metrics.json")).accuracy;
  e.tta_accuracy = parse_report(slurp(e.run_a / "metrics_tta.json")).accuracy;

  // Second run driven only by the first run's manifest.
  const auto manifest = (e.run_a / "manifest.json").string();
  fs::create_directories(run_b);
  const auto manifest_copy = (work / "e2e/manifest_a.json").string();
  fs::copy_file(manifest, manifest_copy, fs::copy_options::overwrite_existing);
  e.ok_b = run_cli({"extract", "--config", manifest_copy, "--out", run_b.string()}) == 0 &&
           run_cli({"train", "--config", manifest_copy, "--out", run_b.string()}) == 0 &&
           run_cli({"eval", "--config", manifest_copy, "--out", run_b.string()}) == 0;
  if (!e.ok_b) {
    e.error = "manifest rerun failed";
    return e;
  }
  for (const char* f : {"features_Training.rfv", "features_Testing.rfv", "segments.json", "model.rhn",
                        "history.csv", "metrics.json", "metrics_tta.json"}) {
    if (!fs::exists(run_b / f) || slurp(e.run_a / f) != slurp(run_b / f)) e.differing.emplace_back(f);
  }
  return e;
}

Outcome scaled_end_to_end(const fs::path& work) {
  const auto& e = end_to_end(work);
  if (!e.ok_a) return {Status::Fail, e.error};
  const bool ok = e.accuracy >= 90.0 && e.seconds_a < 300.0 && e.ok_b && e.differing.empty();
  return pass_if(ok, "400 synthetic 64x64 images: held-out accuracy " + fmt(e.accuracy) + "% (>= 90), TTA " +
                         fmt(e.tta_accuracy) + "%, extract+train+eval " + fmt(e.seconds_a) +
                         " s (< 300 s), rerun " + (e.ok_b && e.differing.empty() ? "identical" : "differs"));
}

Outcome determinism(const fs::path& work) {
  const auto& e = end_to_end(work);
  if (!e.ok_a || !e.ok_b) return {Status::Fail, e.error};
  std::string detail = "rerun from manifest: feature files, model, history CSV and metrics JSON ";
  if (e.differing.empty()) {
    detail += "byte-identical";
  } else {
    detail += "differ:";
    for (const auto& f : e.differing) detail += " " + f;
  }
  return pass_if(e.differing.empty(), detail);
}

// ----------------------------------------------------------------- 8

Outcome training_protocol() {
  // Two classes, same features for train and validation, validation labels
  // flipped: every full-batch step that fits the training labels makes the
  // validation loss worse.
  CounterRng rng(8);
  Matrix<float> x(64, 8);
  std::vector<std::uint8_t> y(64), flipped(64);
  for (std::size_t i = 0; i < 64; ++i) {
    y[i] = static_cast<std::uint8_t>(i % 2);
    flipped[i] = static_cast<std::uint8_t>(1 - y[i]);
    for (std::size_t d = 0; d < 8; ++d) {
      x(i, d) = static_cast<float>((d % 2 == y[i] ? 3.0 : 0.0) + rng.uniform(-1.0, 1.0));
    }
  }
  TrainConfig cfg;
  cfg.hidden = {};
  cfg.num_classes = 2;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-2;
  cfg.seed = 8;
  const auto r = train<float>(x, y, x, flipped, cfg);
  const auto& h = r.history;
  bool worsening = true;
  for (std::size_t i = 1; i < h.epochs.size(); ++i) worsening = worsening && h.epochs[i].val_loss > h.epochs[i - 1].val_loss;
  const bool stop_ok = h.stopped_early && h.best_epoch == 1 && h.epochs.size() == 11;
  const bool lr_ok = h.epochs.size() == 11 && h.epochs[5].lr == 1e-2 && h.epochs[6].lr == 1e-2 * 0.1;

  // Scheduler on its own: flat losses, reductions every 5 stagnant epochs,
  // floored at min_lr.
  PlateauScheduler s{0.1, 5, 1e-6, 1e-8};
  double lr = 1e-3;
  std::vector<double> lrs;
  for (int e = 1; e <= 30; ++e) {
    lr = s.step(1.0, lr);
    lrs.push_back(lr);
  }
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12 * b; };
  // Cuts land at epochs 6, 11, 16 (1e-4, 1e-5, 1e-6); the fourth cut at
  // epoch 21 would go below min_lr and is floored.
  const bool sched_ok = lrs[4] == 1e-3 && near(lrs[5], 1e-4) && near(lrs[10], 1e-5) && near(lrs[15], 1e-6) &&
                        lrs[20] == 1e-6 && lrs[29] == 1e-6;
  return pass_if(worsening && stop_ok && lr_ok && sched_ok,
                 "worsening validation: stopped at epoch " + std::to_string(h.epochs.size()) + " (expect 11), best " +
                     std::to_string(h.best_epoch) + ", lr after 5 stagnant epochs " +
                     (h.epochs.size() > 6 ? fmt(h.epochs[6].lr) : std::string("n/a")) +
                     " (expect 0.001); flat-loss schedule floors at " + fmt(lrs.back()));
}

// ----------------------------------------------------------------- 9

Outcome throughput(const fs::path& work) {
  RadiomicExtractor ex;
  std::vector<Image> imgs;
  for (std::uint64_t i = 0; i < 5; ++i) {
    Image raw(256, 256, Domain::Raw8);
    CounterRng rng(900 + i);
    for (auto& v : raw.data) v = static_cast<float>(rng.below(256));
    imgs.push_back(preprocess(raw));
  }
  ex.extract(imgs[0]);  // warm-up
  const int rounds = 4;
  const auto t0 = Clock::now();
  for (int r = 0; r < rounds; ++r) {
    for (const auto& img : imgs) ex.extract(img);
  }
  const double ms = 1000.0 * seconds_since(t0) / (rounds * imgs.size());
  const auto& e = end_to_end(work);
  double manifest_ms = -1.0;
  if (e.ok_a) {
    const auto m = nlohmann::json::parse(slurp(e.run_a / "manifest.json"));
    manifest_ms = m["extract"]["timing"].value("extract_ms_per_image", -1.0);
  }
  return pass_if(ms < 50.0 && manifest_ms > 0.0 && manifest_ms < 50.0,
                 "radiomic extraction at 224x224: " + fmt(ms) + " ms/image here, " + fmt(manifest_ms) +
                     " ms/image recorded in the end-to-end manifest (< 50 ms)");
}

// ----------------------------------------------------------------- 10

Outcome full_data(const fs::path& work) {
  const char* root = std::getenv("RADNET_FULL_DATA");
  if (root == nullptr || *root == '\0') {
    return {Status::Skip, "set RADNET_FULL_DATA (and optionally RADNET_DEEP_TRAIN / RADNET_DEEP_TEST) to run"};
  }
  const auto out = work / "full";
  std::vector<std::string> train_args{"train", "--out", out.string()};
  std::vector<std::string> eval_args{"eval", "--out", out.string()};
  if (const char* d = std::getenv("RADNET_DEEP_TRAIN")) train_args.insert(train_args.end(), {"--deep-features", d});
  if (const char* d = std::getenv("RADNET_DEEP_TEST")) eval_args.insert(eval_args.end(), {"--deep-features", d});
  const bool ok = run_cli({"extract", "--data", root, "--out", out.string()}) == 0 && run_cli(train_args) == 0 &&
                  run_cli(eval_args) == 0;
  if (!ok) return {Status::Fail, "pipeline failed on the full dataset"};
  const auto train_count = read_feature_file(out / "features_Training.rfv").count();
  const auto report = parse_report(slurp(out / "metrics.json"));
  const bool shape = train_count == 5712 && report.n_samples == 1311 && report.per_class.size() == 4;
  return pass_if(shape, "train " + std::to_string(train_count) + " (expect 5712), test " +
                            std::to_string(report.n_samples) + " (expect 1311), accuracy " +
                            fmt(report.accuracy) + "% (not thresholded)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radnet acceptance suite"};
  std::string workdir = (fs::temp_directory_path() / "radnet_acceptance").string();
  std::vector<int> only;
  app.add_option("--workdir", workdir, "scratch directory for end-to-end runs");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  const fs::path work(workdir);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"transform exactness", transform_exactness},
      {"DWT orthonormality", dwt_orthonormality},
      {"descriptor hand-cases", descriptor_hand_cases},
      {"metric oracle", metric_oracle},
      {"scaled-down end-to-end", [&] { return scaled_end_to_end(work); }},
      {"determinism", [&] { return determinism(work); }},
      {"training protocol", training_protocol},
      {"throughput", [&] { return throughput(work); }},
      {"full-data check", [&] { return full_data(work); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& ex) {
      o = {Status::Fail, std::string("exception: ") + ex.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Skip ? "SKIP" : "FAIL";
    failed += o.status == Status::Fail;
    std::printf("criterion %2d %s  %s: %s\n", id, tag, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
