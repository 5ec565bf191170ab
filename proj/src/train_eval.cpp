#include "driverid/train_eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

namespace driverid {

namespace {

// Portable in-place shuffle driven by the raw 64-bit stream.
void shuffle_indices(std::vector<int>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng() % i]);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = master ^ (0x9e3779b97f4a7c15ull * (a * 1000003ull + b + 1ull));
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdull;
  x ^= x >> 33;
  return x;
}

std::map<int, std::vector<int>> by_class(const std::vector<int>& labels) {
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i)
    groups[labels[i]].push_back(static_cast<int>(i));
  return groups;
}

}  // namespace

void Dataset::validate() const {
  if (samples.empty()) throw ValidationError("empty dataset");
  if (classes < 2) throw ValidationError("dataset needs >= 2 classes");
  const long T = samples.front().x.rows();
  const long M = samples.front().x.cols();
  for (const auto& s : samples) {
    if (s.y < 0 || s.y >= classes)
      throw ValidationError("label out of range: " + std::to_string(s.y));
    if (s.x.rows() != T || s.x.cols() != M)
      throw DimensionMismatch("inconsistent sample shapes");
  }
  if (static_cast<int>(samples.size()) < classes)
    throw ValidationError("fewer samples than classes");
}

double topk_accuracy(const std::vector<Prediction>& preds,
                     const std::vector<int>& labels, int k) {
  if (preds.size() != labels.size() || preds.empty())
    throw ValidationError("topk_accuracy: size mismatch or empty");
  int hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int upto = std::min<int>(k, static_cast<int>(preds[i].topk.size()));
    for (int j = 0; j < upto; ++j)
      if (preds[i].topk[j].first == labels[i]) {
        ++hits;
        break;
      }
  }
  return double(hits) / double(preds.size());
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> assignment(labels.size(), -1);
  for (auto& [label, indices] : by_class(labels)) {
    shuffle_indices(indices, rng);
    for (std::size_t i = 0; i < indices.size(); ++i)
      assignment[indices[i]] = static_cast<int>(i % folds);
  }
  return assignment;
}

TrainResult train(const ModelConfig& mcfg, const Dataset& scaled,
                  const TrainConfig& tcfg) {
  scaled.validate();
  if (tcfg.val_fraction <= 0.0 || tcfg.val_fraction >= 1.0)
    throw ValidationError("val_fraction must be in (0,1)");

  std::vector<int> labels;
  for (const auto& s : scaled.samples) labels.push_back(s.y);
  for (auto& [label, indices] : by_class(labels))
    if (indices.size() < 2)
      throw ValidationError("TooFewSamplesPerClass: class " +
                            std::to_string(label));

  // stratified train/validation split
  std::mt19937_64 rng(tcfg.seed);
  std::vector<int> train_idx, val_idx;
  for (auto& [label, indices] : by_class(labels)) {
    shuffle_indices(indices, rng);
    std::size_t n_val = static_cast<std::size_t>(
        std::lround(tcfg.val_fraction * double(indices.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, indices.size() - 1);
    for (std::size_t i = 0; i < indices.size(); ++i)
      (i < n_val ? val_idx : train_idx).push_back(indices[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  std::vector<int> val_labels;
  for (int i : val_idx) val_labels.push_back(scaled.samples[i].y);
  Batch val_batch = make_batch(scaled.samples, val_idx);
  std::vector<PatternSequence> val_seqs;
  for (int i : val_idx) val_seqs.push_back(scaled.samples[i]);

  ModelConfig cfg = mcfg;
  cfg.classes = scaled.classes;
  cfg.timesteps = static_cast<int>(scaled.samples.front().x.rows());
  cfg.features = static_cast<int>(scaled.samples.front().x.cols());
  cfg.mode = scaled.mode;

  ModelParams params = build_model(cfg, tcfg.seed);
  params.label_map = scaled.label_map;
  auto refs = model_param_refs(params, true);
  AdamState adam = init_adam(refs, tcfg.adam);

  const int batch_size =
      std::min<int>(tcfg.batch, static_cast<int>(train_idx.size()));
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");

  TrainResult result;
  ModelParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  int iteration = 0;
  LossBreakdown last_loss;
  std::vector<MatrixXd> grads;
  std::vector<int> order = train_idx;
  std::size_t cursor = order.size(); // triggers an initial shuffle

  while (iteration < tcfg.max_iterations) {
    if (cursor + batch_size > order.size()) {
      shuffle_indices(order, rng);
      cursor = 0;
    }
    std::vector<int> batch_idx(order.begin() + cursor,
                               order.begin() + cursor + batch_size);
    cursor += batch_size;
    ++iteration;

    Batch batch = make_batch(scaled.samples, batch_idx);
    try {
      last_loss = compute_gradients(params, cfg, batch, grads);
    } catch (const NonFiniteLoss&) {
      throw NonFiniteLoss("non-finite loss at iteration " +
                          std::to_string(iteration));
    }
    clip_gradients(grads, tcfg.clip_norm);
    adam_update(refs, grads, adam);

    if (iteration % tcfg.eval_every == 0 || iteration == tcfg.max_iterations) {
      LossBreakdown val_loss = unified_loss(params, cfg, val_batch);
      auto preds = predict(params, cfg, val_seqs, 3);
      EvalPoint pt;
      pt.iteration = iteration;
      pt.train_total = last_loss.total;
      pt.train_classification = last_loss.classification;
      pt.train_reconstruction = last_loss.reconstruction;
      pt.val_total = val_loss.total;
      pt.val_top1 = topk_accuracy(preds, val_labels, 1);
      pt.val_top3 = topk_accuracy(preds, val_labels, 3);
      result.history.push_back(pt);
      if (val_loss.total < best_val) {
        best_val = val_loss.total;
        best = params;
        best_iter = iteration;
      } else if (iteration - best_iter > tcfg.patience) {
        break;
      }
    }
  }

  result.params = std::move(best);
  result.best_iteration = best_iter;
  result.iterations_run = iteration;
  return result;
}

namespace {

struct FoldJob {
  int repeat, fold;
  std::vector<int> train_idx, test_idx;
  std::uint64_t seed;
};

FoldResult run_fold(const Dataset& dataset, const ModelConfig& mcfg,
                    const TrainConfig& tcfg, const PatternOptions& opts,
                    const FoldJob& job) {
  auto start = std::chrono::steady_clock::now();

  std::vector<PatternSequence> train_raw, test_raw;
  for (int i : job.train_idx) train_raw.push_back(dataset.samples[i]);
  for (int i : job.test_idx) test_raw.push_back(dataset.samples[i]);

  // scaler sees only this fold's training data
  FeatureScaler scaler = fit_scaler(train_raw, opts.scale_st_only);
  Dataset train_ds;
  train_ds.classes = dataset.classes;
  train_ds.mode = dataset.mode;
  train_ds.label_map = dataset.label_map;
  for (const auto& s : train_raw)
    train_ds.samples.push_back(apply_scaler(scaler, s));

  TrainConfig fold_tcfg = tcfg;
  fold_tcfg.seed = job.seed;
  TrainResult trained = train(mcfg, train_ds, fold_tcfg);
  trained.params.scaler = scaler;

  ModelConfig cfg = mcfg;
  cfg.classes = dataset.classes;
  cfg.timesteps = static_cast<int>(dataset.samples.front().x.rows());
  cfg.features = static_cast<int>(dataset.samples.front().x.cols());

  std::vector<PatternSequence> test_scaled;
  std::vector<int> test_labels;
  for (const auto& s : test_raw) {
    test_scaled.push_back(apply_scaler(scaler, s));
    test_labels.push_back(s.y);
  }
  auto preds = predict(trained.params, cfg, test_scaled, 3);

  FoldResult r;
  r.repeat = job.repeat;
  r.fold = job.fold;
  r.top1 = topk_accuracy(preds, test_labels, 1);
  r.top3 = topk_accuracy(preds, test_labels, 3);
  r.seconds = std::chrono::duration<double>(
                  std::chrono::steady_clock::now() - start).count();
  return r;
}

void aggregate(MetricsReport& report) {
  const double r = double(report.folds.size());
  double m1 = 0, m3 = 0;
  for (const auto& f : report.folds) {
    m1 += f.top1;
    m3 += f.top3;
  }
  m1 /= r;
  m3 /= r;
  double s1 = 0, s3 = 0;
  for (const auto& f : report.folds) {
    s1 += (f.top1 - m1) * (f.top1 - m1);
    s3 += (f.top3 - m3) * (f.top3 - m3);
  }
  if (report.folds.size() > 1) {
    s1 = std::sqrt(s1 / (r - 1));
    s3 = std::sqrt(s3 / (r - 1));
  } else {
    s1 = s3 = 0;
  }
  report.top1_mean = m1;
  report.top1_ci = 1.96 * s1 / std::sqrt(r);
  report.top3_mean = m3;
  report.top3_ci = 1.96 * s3 / std::sqrt(r);
}

}  // namespace

MetricsReport kfold_cv(const Dataset& dataset, const ModelConfig& mcfg,
                       const TrainConfig& tcfg, int folds, int repeats,
                       int jobs, const PatternOptions& opts) {
  dataset.validate();
  if (folds < 2) throw ValidationError("folds must be >= 2");
  if (repeats < 1) throw ValidationError("repeats must be >= 1");
  std::vector<int> labels;
  for (const auto& s : dataset.samples) labels.push_back(s.y);
  for (auto& [label, indices] : by_class(labels))
    if (static_cast<int>(indices.size()) < folds)
      throw ValidationError("ClassTooSmall: class " + std::to_string(label) +
                            " has " + std::to_string(indices.size()) +
                            " samples, needs >= " + std::to_string(folds));

  auto start = std::chrono::steady_clock::now();
  std::vector<FoldJob> jobs_list;
  for (int rep = 0; rep < repeats; ++rep) {
    auto assignment =
        stratified_folds(labels, folds, derive_seed(tcfg.seed, rep, 0));
    for (int f = 0; f < folds; ++f) {
      FoldJob job;
      job.repeat = rep;
      job.fold = f;
      job.seed = derive_seed(tcfg.seed, rep, f + 1);
      for (std::size_t i = 0; i < assignment.size(); ++i)
        (assignment[i] == f ? job.test_idx : job.train_idx)
            .push_back(static_cast<int>(i));
      jobs_list.push_back(std::move(job));
    }
  }

  std::vector<FoldResult> results(jobs_list.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < jobs_list.size(); ++i)
      results[i] = run_fold(dataset, mcfg, tcfg, opts, jobs_list[i]);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= jobs_list.size()) return;
        results[i] = run_fold(dataset, mcfg, tcfg, opts, jobs_list[i]);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  MetricsReport report;
  report.folds = std::move(results);
  aggregate(report);
  report.wall_clock_seconds = std::chrono::duration<double>(
                                  std::chrono::steady_clock::now() - start).count();
  std::ostringstream echo;
  echo << "cell=" << cell_name(mcfg.cell) << " mode=" << mode_name(dataset.mode)
       << " embedding=" << mcfg.embedding << " residual=" << mcfg.residual
       << " decoder=" << mcfg.decoder << " lambda=" << mcfg.lambda
       << " folds=" << folds << " repeats=" << repeats
       << " batch=" << tcfg.batch << " iters=" << tcfg.max_iterations
       << " seed=" << tcfg.seed;
  report.config_echo = echo.str();
  return report;
}

std::vector<SweepRow> sweep(const std::string& key,
                            const std::vector<std::string>& values,
                            const SweepInput& input, ModelConfig mcfg,
                            const TrainConfig& tcfg, int folds, int repeats,
                            int jobs) {
  if (values.empty()) throw ValidationError("empty sweep grid");
  std::vector<SweepRow> rows;
  for (const auto& value : values) {
    ModelConfig cfg = mcfg;
    WindowConfig window = input.window;
    PatternMode mode = input.mode;
    if (key == "lambda") {
      cfg.lambda = std::stod(value);
    } else if (key == "lf") {
      window.lf = std::stoi(value);
    } else if (key == "mode") {
      mode = parse_mode(value);
    } else if (key == "cell") {
      cfg.cell = parse_cell(value);
    } else if (key == "ablation") {
      if (value == "plain") {
        cfg.residual = false;
        cfg.decoder = false;
      } else if (value == "res") {
        cfg.residual = true;
        cfg.decoder = false;
      } else if (value == "resarnet") {
        cfg.residual = true;
        cfg.decoder = true;
      } else {
        throw ValidationError("ablation value must be plain|res|resarnet");
      }
    } else {
      throw ValidationError("unknown sweep key '" + key +
                            "' (lambda|lf|mode|cell|ablation)");
    }

    Dataset ds;
    ds.mode = mode;
    ds.samples = encode_trips(input.trips, mode, window, input.pattern_opts,
                              ds.label_map);
    ds.classes = static_cast<int>(ds.label_map.size());
    cfg.mode = mode;

    SweepRow row;
    row.grid_point = key + "=" + value;
    row.report = kfold_cv(ds, cfg, tcfg, folds, repeats, jobs,
                          input.pattern_opts);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace driverid
