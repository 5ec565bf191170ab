#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "driverid/io.hpp"
#include "driverid/model.hpp"
#include "driverid/synth.hpp"
#include "driverid/train_eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace driverid;

namespace {

// Every tunable in one document; CLI flags override individual values.
struct RunConfig {
  int ls = 60, lf = 10;
  double dv = 1.0, db = 1.0;
  std::string mode = "FUSED";
  bool wrap_st_bearing = false;
  bool scale_st_only = false;
  std::string cell = "gru";
  int embedding = 100;
  bool residual = true;
  bool decoder = true;
  double lambda = 0.5;
  int batch = 256, iterations = 1500, patience = 100, eval_every = 10;
  double val_fraction = 0.15, lr = 1e-3;
  std::uint64_t seed = 42;
  int folds = 5, repeats = 5;
};

void expect_keys(const json& obj, const std::string& where,
                 const std::vector<std::string>& allowed,
                 std::vector<std::string>& violations) {
  for (const auto& [key, value] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      violations.push_back(where + ": unknown key '" + key + "'");
}

RunConfig load_run_config(const std::string& path) {
  RunConfig rc;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("ConfigInvalid: " + std::string(e.what()));
  }
  std::vector<std::string> violations;
  expect_keys(doc, "config",
              {"window", "thresholds", "mode", "scaling", "model", "training",
               "evaluation"},
              violations);
  auto get = [&](const json& obj, const std::string& where,
                 const std::string& key, auto& out) {
    if (!obj.contains(key)) return;
    try {
      out = obj.at(key).get<std::decay_t<decltype(out)>>();
    } catch (const json::exception&) {
      violations.push_back(where + "." + key + ": wrong type");
    }
  };
  if (doc.contains("window")) {
    const auto& w = doc["window"];
    expect_keys(w, "window", {"ls", "lf"}, violations);
    get(w, "window", "ls", rc.ls);
    get(w, "window", "lf", rc.lf);
  }
  if (doc.contains("thresholds")) {
    const auto& t = doc["thresholds"];
    expect_keys(t, "thresholds", {"dv", "db"}, violations);
    get(t, "thresholds", "dv", rc.dv);
    get(t, "thresholds", "db", rc.db);
  }
  if (doc.contains("mode")) get(doc, "config", "mode", rc.mode);
  if (doc.contains("scaling")) {
    const auto& s = doc["scaling"];
    expect_keys(s, "scaling", {"st_only", "wrap_st_bearing"}, violations);
    get(s, "scaling", "st_only", rc.scale_st_only);
    get(s, "scaling", "wrap_st_bearing", rc.wrap_st_bearing);
  }
  if (doc.contains("model")) {
    const auto& m = doc["model"];
    expect_keys(m, "model",
                {"cell", "embedding", "residual", "decoder", "lambda"},
                violations);
    get(m, "model", "cell", rc.cell);
    get(m, "model", "embedding", rc.embedding);
    get(m, "model", "residual", rc.residual);
    get(m, "model", "decoder", rc.decoder);
    get(m, "model", "lambda", rc.lambda);
  }
  if (doc.contains("training")) {
    const auto& t = doc["training"];
    expect_keys(t, "training",
                {"batch", "iterations", "patience", "eval_every",
                 "val_fraction", "lr", "seed"},
                violations);
    get(t, "training", "batch", rc.batch);
    get(t, "training", "iterations", rc.iterations);
    get(t, "training", "patience", rc.patience);
    get(t, "training", "eval_every", rc.eval_every);
    get(t, "training", "val_fraction", rc.val_fraction);
    get(t, "training", "lr", rc.lr);
    get(t, "training", "seed", rc.seed);
  }
  if (doc.contains("evaluation")) {
    const auto& e = doc["evaluation"];
    expect_keys(e, "evaluation", {"folds", "repeats"}, violations);
    get(e, "evaluation", "folds", rc.folds);
    get(e, "evaluation", "repeats", rc.repeats);
  }
  if (!violations.empty()) {
    std::string msg = "ConfigInvalid:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw ValidationError(msg);
  }
  return rc;
}

WindowConfig window_of(const RunConfig& rc) { return {rc.ls, rc.lf}; }

PatternOptions options_of(const RunConfig& rc) {
  PatternOptions o;
  o.thresholds = {rc.dv, rc.db};
  o.wrap_st_bearing = rc.wrap_st_bearing;
  o.scale_st_only = rc.scale_st_only;
  return o;
}

ModelConfig model_of(const RunConfig& rc) {
  ModelConfig m;
  m.cell = parse_cell(rc.cell);
  m.embedding = rc.embedding;
  m.residual = rc.residual;
  m.decoder = rc.decoder;
  m.lambda = rc.lambda;
  m.mode = parse_mode(rc.mode);
  return m;
}

TrainConfig train_of(const RunConfig& rc) {
  TrainConfig t;
  t.batch = rc.batch;
  t.max_iterations = rc.iterations;
  t.patience = rc.patience;
  t.eval_every = rc.eval_every;
  t.val_fraction = rc.val_fraction;
  t.adam.lr = rc.lr;
  t.seed = rc.seed;
  return t;
}

void add_window_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--ls", rc.ls, "subtrajectory length in seconds");
  cmd->add_option("--lf", rc.lf, "segment length in seconds (stride lf/2)");
  cmd->add_option("--dv", rc.dv, "constant-speed threshold, km/h");
  cmd->add_option("--db", rc.db, "straight-driving threshold, degrees");
  cmd->add_option("--mode", rc.mode, "pattern mode: MS|ST|FUSED");
  cmd->add_flag("--wrap-st-bearing", rc.wrap_st_bearing,
                "use wrapped bearing difference in transition intensity");
  cmd->add_flag("--scale-st-only", rc.scale_st_only,
                "min-max scale only the ST columns");
}

void add_model_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--cell", rc.cell, "recurrent cell: gru|lstm");
  cmd->add_option("--embedding", rc.embedding, "driving-style embedding dim");
  cmd->add_option("--residual", rc.residual, "enable residual connections");
  cmd->add_option("--decoder", rc.decoder, "enable the reconstruction decoder");
  cmd->add_option("--lambda", rc.lambda, "reconstruction loss weight in [0,1]");
}

void add_train_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--batch", rc.batch, "mini-batch size");
  cmd->add_option("--iterations", rc.iterations, "max training iterations");
  cmd->add_option("--patience", rc.patience,
                  "iterations without validation improvement before stopping");
  cmd->add_option("--eval-every", rc.eval_every, "iterations between evals");
  cmd->add_option("--val-fraction", rc.val_fraction, "validation holdout");
  cmd->add_option("--lr", rc.lr, "Adam learning rate");
  cmd->add_option("--seed", rc.seed, "master RNG seed");
}

int run(int argc, char** argv) {
  RunConfig rc;
  // --config establishes defaults before the regular flag pass
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") rc = load_run_config(argv[i + 1]);

  CLI::App app{"driver identification from GPS subtrajectories"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON run config")
      ->each([](const std::string&) {}); // consumed in the pre-pass

  std::string in_path, out_path, model_path, report_path, csv_path,
      scaler_path, preset = "separable5", sweep_key, sweep_values;
  int jobs = 1, max_gap = 3, min_trip_secs = 0, trips_override = -1,
      secs_override = -1;
  bool skip_bad_rows = false, as_json = false;
  std::uint64_t synth_seed = 0;
  bool synth_seed_set = false;

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic fleet CSV");
  synth_cmd->add_option("--preset", preset, "separable5|separable10|hard10");
  synth_cmd->add_option("--out", out_path, "output CSV path")->required();
  synth_cmd->add_option("--trips", trips_override, "trips per driver");
  synth_cmd->add_option("--secs", secs_override, "trip length in seconds");
  synth_cmd->add_option("--seed", synth_seed, "fleet seed")
      ->each([&](const std::string&) { synth_seed_set = true; });

  auto* prep_cmd = app.add_subcommand("prep", "parse CSV, derive kinematics");
  prep_cmd->add_option("--in", in_path, "fleet CSV")->required();
  prep_cmd->add_option("--out", out_path, "trips JSONL")->required();
  prep_cmd->add_option("--max-gap", max_gap, "max fillable sampling gap, s");
  prep_cmd->add_option("--min-trip-secs", min_trip_secs,
                       "drop derived trips shorter than this");
  prep_cmd->add_flag("--skip-bad-rows", skip_bad_rows,
                     "drop invalid rows instead of failing");

  auto* describe_cmd =
      app.add_subcommand("describe", "per-signal fleet statistics");
  describe_cmd->add_option("--in", in_path, "fleet CSV or trips JSONL")
      ->required();
  describe_cmd->add_flag("--json", as_json, "emit JSON instead of a table");

  auto* encode_cmd =
      app.add_subcommand("encode", "encode trips into pattern sequences");
  encode_cmd->add_option("--in", in_path, "trips JSONL")->required();
  encode_cmd->add_option("--out", out_path, "encoded dataset JSONL")->required();
  encode_cmd->add_option("--scaler-out", scaler_path,
                         "sidecar scaler path (default: scaler.json next to --out)");
  add_window_flags(encode_cmd, rc);

  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  train_cmd->add_option("--in", in_path, "encoded dataset JSONL")->required();
  train_cmd->add_option("--out", model_path, "model file")->required();
  add_window_flags(train_cmd, rc);
  add_model_flags(train_cmd, rc);
  add_train_flags(train_cmd, rc);

  auto* eval_cmd =
      app.add_subcommand("eval", "repeated stratified k-fold cross-validation");
  eval_cmd->add_option("--in", in_path, "encoded dataset JSONL")->required();
  eval_cmd->add_option("--report", report_path, "metrics JSON output");
  eval_cmd->add_option("--csv", csv_path, "per-fold CSV output");
  eval_cmd->add_option("--folds", rc.folds, "fold count");
  eval_cmd->add_option("--repeats", rc.repeats, "repeat count");
  eval_cmd->add_option("--jobs", jobs, "parallel fold jobs (1 = sequential)");
  add_window_flags(eval_cmd, rc);
  add_model_flags(eval_cmd, rc);
  add_train_flags(eval_cmd, rc);

  auto* predict_cmd = app.add_subcommand("predict", "classify raw CSV windows");
  predict_cmd->add_option("--model", model_path, "model file")->required();
  predict_cmd->add_option("--in", in_path, "raw fleet CSV")->required();
  predict_cmd->add_option("--out", out_path, "predictions JSONL")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "grid sweep of one config key");
  sweep_cmd->add_option("--key", sweep_key,
                        "lambda|lf|mode|cell|ablation")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated grid values")
      ->required();
  sweep_cmd->add_option("--in", in_path, "trips JSONL")->required();
  sweep_cmd->add_option("--csv", csv_path, "per-fold CSV output");
  sweep_cmd->add_option("--report", report_path, "per-grid-point JSON output");
  sweep_cmd->add_option("--folds", rc.folds, "fold count");
  sweep_cmd->add_option("--repeats", rc.repeats, "repeat count");
  sweep_cmd->add_option("--jobs", jobs, "parallel fold jobs");
  add_window_flags(sweep_cmd, rc);
  add_model_flags(sweep_cmd, rc);
  add_train_flags(sweep_cmd, rc);

  auto* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "verify analytic gradients against finite differences");

  CLI11_PARSE(app, argc, argv);

  if (*synth_cmd) {
    FleetSpec spec = preset_fleet(preset);
    if (trips_override > 0) spec.trips_per_driver = trips_override;
    if (secs_override > 0) spec.trip_secs = secs_override;
    if (synth_seed_set) spec.seed = synth_seed;
    auto rows = generate_fleet(spec);
    write_fleet_csv(rows, out_path);
    std::cout << "wrote " << rows.size() << " rows for "
              << spec.archetypes.size() << " drivers to " << out_path << "\n";
  } else if (*prep_cmd) {
    ParseResult parsed = parse_fleet_csv(in_path, !skip_bad_rows);
    auto trips = prep_trips(parsed, max_gap,
                            static_cast<std::size_t>(min_trip_secs));
    write_trips_jsonl(trips, out_path);
    std::cout << "parsed " << parsed.parsed_rows << " rows ("
              << parsed.rejected_rows << " rejected), " << trips.size()
              << " trips -> " << out_path << "\n";
  } else if (*describe_cmd) {
    std::vector<Trip> trips;
    if (in_path.size() > 6 && in_path.ends_with(".jsonl"))
      trips = read_trips_jsonl(in_path);
    else
      trips = prep_trips(parse_fleet_csv(in_path));
    FleetDescription d = describe_fleet(trips);
    std::cout << (as_json ? describe_fleet_json(d) : format_fleet_table(d));
  } else if (*encode_cmd) {
    auto trips = read_trips_jsonl(in_path);
    Dataset ds;
    ds.mode = parse_mode(rc.mode);
    ds.samples = encode_trips(trips, ds.mode, window_of(rc), options_of(rc),
                              ds.label_map);
    ds.classes = static_cast<int>(ds.label_map.size());
    write_dataset_jsonl(ds, out_path);
    FeatureScaler scaler = fit_scaler(ds.samples, rc.scale_st_only);
    if (scaler_path.empty())
      scaler_path = (fs::path(out_path).parent_path() / "scaler.json").string();
    write_scaler_json(scaler, scaler_path);
    std::cout << "encoded " << ds.samples.size() << " subtrajectories ("
              << ds.classes << " drivers, T="
              << ds.samples.front().x.rows() << ", M="
              << ds.samples.front().x.cols() << ") -> " << out_path << "\n";
  } else if (*train_cmd) {
    Dataset raw = read_dataset_jsonl(in_path);
    FeatureScaler scaler = fit_scaler(raw.samples, rc.scale_st_only);
    Dataset scaled = raw;
    for (auto& s : scaled.samples) s = apply_scaler(scaler, s);
    ModelConfig mcfg = model_of(rc);
    mcfg.mode = scaled.mode;
    TrainResult result = train(mcfg, scaled, train_of(rc));
    result.params.scaler = scaler;
    ModelConfig final_cfg = mcfg;
    final_cfg.classes = scaled.classes;
    final_cfg.timesteps = static_cast<int>(scaled.samples.front().x.rows());
    final_cfg.features = static_cast<int>(scaled.samples.front().x.cols());
    PipelineConfig pipe{window_of(rc), options_of(rc)};
    save_model(result.params, final_cfg, pipe, model_path);
    const EvalPoint& last = result.history.back();
    std::cout << "trained " << result.iterations_run << " iterations (best at "
              << result.best_iteration << "), val L_u="
              << format_double(last.val_total) << ", val top1="
              << format_double(last.val_top1) << " -> " << model_path << "\n";
  } else if (*eval_cmd) {
    Dataset ds = read_dataset_jsonl(in_path);
    ModelConfig mcfg = model_of(rc);
    mcfg.mode = ds.mode;
    MetricsReport report = kfold_cv(ds, mcfg, train_of(rc), rc.folds,
                                    rc.repeats, jobs, options_of(rc));
    if (!report_path.empty()) write_metrics_json(report, report_path);
    if (!csv_path.empty()) write_metrics_csv({{"eval", report}}, csv_path);
    std::cout << "top1 " << format_double(report.top1_mean * 100) << "% +- "
              << format_double(report.top1_ci * 100) << ", top3 "
              << format_double(report.top3_mean * 100) << "% +- "
              << format_double(report.top3_ci * 100) << " over "
              << report.folds.size() << " folds in "
              << format_double(report.wall_clock_seconds) << "s\n";
  } else if (*predict_cmd) {
    LoadedModel loaded = load_model(model_path);
    auto trips = prep_trips(parse_fleet_csv(in_path));
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write " + out_path);
    std::size_t count = 0;
    for (const auto& trip : trips) {
      int window_index = 0;
      for (const auto& sub :
           slice_subtrajectories(trip, loaded.pipeline.window)) {
        PatternSequence seq = encode_subtrajectory(
            sub, loaded.config.mode, loaded.pipeline.window,
            loaded.pipeline.options);
        seq.y = 0;
        PatternSequence scaled = apply_scaler(loaded.params.scaler, seq);
        auto preds = predict(loaded.params, loaded.config, {scaled}, 3);
        const Prediction& p = preds[0];
        json topk = json::array();
        for (const auto& [cls, prob] : p.topk)
          topk.push_back({loaded.params.label_map[cls], prob});
        json probs = json::array();
        for (const auto& [cls, prob] : p.topk) probs.push_back(prob);
        json obj = {{"trip_id", trip.trip_id},
                    {"window", window_index++},
                    {"driver_id_predicted", loaded.params.label_map[p.label]},
                    {"topk", std::move(topk)},
                    {"probabilities", std::move(probs)}};
        out << obj.dump() << '\n';
        ++count;
      }
    }
    std::cout << "predicted " << count << " subtrajectories -> " << out_path
              << "\n";
  } else if (*sweep_cmd) {
    SweepInput input;
    input.trips = read_trips_jsonl(in_path);
    input.window = window_of(rc);
    input.pattern_opts = options_of(rc);
    input.mode = parse_mode(rc.mode);
    std::vector<std::string> values;
    std::stringstream ss(sweep_values);
    std::string v;
    while (std::getline(ss, v, ',')) values.push_back(v);
    auto rows = sweep(sweep_key, values, input, model_of(rc), train_of(rc),
                      rc.folds, rc.repeats, jobs);
    if (!csv_path.empty()) write_metrics_csv(rows, csv_path);
    json all = json::array();
    for (const auto& row : rows) {
      std::cout << row.grid_point << ": top1 "
                << format_double(row.report.top1_mean * 100) << "% +- "
                << format_double(row.report.top1_ci * 100) << ", top3 "
                << format_double(row.report.top3_mean * 100) << "%\n";
      all.push_back({{"grid_point", row.grid_point},
                     {"top1_mean", row.report.top1_mean},
                     {"top1_ci95", row.report.top1_ci},
                     {"top3_mean", row.report.top3_mean},
                     {"top3_ci95", row.report.top3_ci}});
    }
    if (!report_path.empty()) {
      std::ofstream rout(report_path);
      if (!rout) throw IoError("cannot write " + report_path);
      rout << all.dump(2) << "\n";
    }
  } else if (*gradcheck_cmd) {
    bool all_pass = true;
    std::mt19937_64 rng(7);
    for (CellKind cell : {CellKind::GRU, CellKind::LSTM}) {
      for (bool use_decoder : {false, true}) {
        for (bool use_residual : {false, true}) {
          ModelConfig cfg;
          cfg.cell = cell;
          cfg.embedding = 5;
          cfg.residual = use_residual;
          cfg.decoder = use_decoder;
          cfg.lambda = 0.7;
          cfg.classes = 3;
          cfg.timesteps = 3;
          cfg.features = 6;
          ModelParams params = build_model(cfg, 11);
          Batch batch;
          batch.xs.assign(3, MatrixXd(4, 6));
          for (auto& x : batch.xs)
            for (long i = 0; i < x.size(); ++i)
              x.data()[i] = uniform_real(rng, 0.0, 1.0);
          batch.labels = {0, 1, 2, 1};
          std::vector<MatrixXd> grads;
          compute_gradients(params, cfg, batch, grads);
          auto refs = model_param_refs(params, true);
          auto report = grad_check(refs, grads, [&]() {
            return unified_loss(params, cfg, batch).total;
          });
          std::cout << cell_name(cell) << (use_residual ? "+res" : "")
                    << (use_decoder ? "+dec" : "") << ": max rel err "
                    << format_double(report.max_rel_error) << " ("
                    << report.worst_param << ") "
                    << (report.pass ? "PASS" : "FAIL") << "\n";
          all_pass = all_pass && report.pass;
        }
      }
    }
    std::cout << (all_pass ? "gradcheck PASS" : "gradcheck FAIL") << "\n";
    return all_pass ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
