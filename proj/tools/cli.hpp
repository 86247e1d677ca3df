#pragma once

// The `lad` command line: model, detect, threshold, eval, roc, implant,
// gmrf, energy. Kept in a header so tests can drive it in-process.

#include "lad/lad.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace lad::cli {

using io::json;

namespace detail {

struct UsageError {
  std::vector<std::string> messages;
};

inline int log_level() {
  const char* env = std::getenv("LAD_LOG");
  return env ? std::atoi(env) : 0;
}

inline void log(std::ostream& err, int level, const std::string& message) {
  if (log_level() >= level) err << "lad: " << message << "\n";
}

inline json instrumentation() {
  return {{"covariance_inversions", counters().covariance_inversions.load()},
          {"eigendecompositions", counters().eigendecompositions.load()}};
}

inline ImageCube load_input(const RunConfig& cfg) {
  ImageCube cube = io::read_cube(cfg.input);
  const auto drop = bands_to_discard(cfg);
  return drop.empty() ? cube : io::discard_bands(cube, drop);
}

inline Connectivity connectivity_for(const RunConfig& cfg, const ImageCube& cube) {
  const int c = cfg.connectivity ? *cfg.connectivity : (cube.ndim() == 3 ? 6 : 4);
  const std::size_t expected = c == 4 ? 2 : 3;
  if (cube.ndim() != expected) {
    throw Error(ErrorCode::invalid_config, "connectivity does not match the cube dimensionality",
                {{"connectivity", std::to_string(c)}, {"ndim", std::to_string(cube.ndim())}});
  }
  return c == 4 ? Connectivity::four : Connectivity::six;
}

/// Builds the graph model requested by the config. Cauchy weights need only
/// the band means; partial correlations need the inverted covariance.
inline io::ModelFile build_graph(const RunConfig& cfg, const ImageCube& cube, bool spatial, bool with_eigen) {
  io::ModelFile out;
  WeightMatrix spectral;
  Vector mean;
  if (cfg.weights == "cauchy") {
    mean = band_mean(cube);
    spectral = cauchy_weights(mean, cfg.alpha);
  } else {
    BackgroundStats stats = estimate_background_stats(cube, true, cfg.ridge);
    spectral = partial_correlation_weights(stats);
    mean = stats.mean;
    out.stats = std::move(stats);
  }
  WeightMatrix weights = spatial ? spatial_spectral_weights(spectral, cfg.spatial_weight, connectivity_for(cfg, cube))
                                 : std::move(spectral);
  GraphModel model = build_laplacian(std::move(weights), parse_laplacian(cfg.laplacian), std::move(mean));
  if (with_eigen) model = eigendecompose(std::move(model));
  out.graph = std::move(model);
  return out;
}

inline json config_provenance(const RunConfig& cfg) {
  json j;
  j["detector"] = cfg.detector;
  j["weights"] = cfg.weights;
  j["laplacian"] = cfg.laplacian;
  j["alpha"] = cfg.alpha ? json(*cfg.alpha) : json(nullptr);
  j["psi"] = cfg.psi;
  j["p"] = cfg.p ? json(*cfg.p) : json(nullptr);
  j["spatial_weight"] = cfg.spatial_weight;
  j["connectivity"] = cfg.connectivity ? json(*cfg.connectivity) : json(nullptr);
  j["ridge"] = cfg.ridge;
  j["discard_bands"] = cfg.discard_bands;
  j["water_bands"] = cfg.water_bands;
  return j;
}

inline TruncationPolicy policy_for(const RunConfig& cfg) {
  return cfg.p ? TruncationPolicy::fixed(*cfg.p) : TruncationPolicy::energy(cfg.psi);
}

inline void require_paths(std::vector<std::string>& errors, std::initializer_list<std::pair<const char*, const std::string*>> paths) {
  for (const auto& [flag, value] : paths) {
    if (value->empty()) errors.push_back(std::string(flag) + " is required");
  }
}

inline void finish_validation(std::vector<std::string> errors) {
  if (!errors.empty()) throw UsageError{std::move(errors)};
}

/// Adds the detector/graph options shared by several subcommands.
inline void add_model_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--weights", cfg.weights, "partial-correlation | cauchy");
  cmd->add_option("--laplacian", cfg.laplacian, "sym | comb");
  cmd->add_option("--alpha", cfg.alpha, "Cauchy scale (default: mean of band means)");
  cmd->add_option("--spatial-weight", cfg.spatial_weight, "weight of same-band links to lattice neighbors");
  cmd->add_option("--connectivity", cfg.connectivity, "4 (2D) or 6 (3D)");
  cmd->add_option("--ridge", cfg.ridge, "diagonal loading before covariance inversion");
  cmd->add_option("--discard-bands", cfg.discard_bands, "1-based bands to drop, e.g. 108-112,154-167,224");
  cmd->add_flag("--water-bands", cfg.water_bands, "drop the 20 AVIRIS water-absorption bands");
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline void cmd_model(const RunConfig& cfg, const std::string& kind, bool spatial, bool with_eigen, std::ostream& out) {
  ImageCube cube = load_input(cfg);
  io::ModelFile file;
  if (kind == "background") {
    file.stats = estimate_background_stats(cube, true, cfg.ridge);
  } else {
    file = build_graph(cfg, cube, spatial, with_eigen);
  }
  file.provenance = config_provenance(cfg);
  file.provenance["kind"] = kind;
  io::write_model(file, cfg.output);

  json summary{{"command", "model"}, {"kind", kind}, {"bands", cube.bands()}};
  if (file.graph) {
    summary["order"] = file.graph->order();
    summary["clamped_weights"] = file.graph->weights.clamped;
  }
  if (file.stats && file.stats->rcond) summary["rcond"] = *file.stats->rcond;
  summary["instrumentation"] = instrumentation();
  out << summary.dump() << "\n";
}

inline void cmd_detect(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  ImageCube cube = load_input(cfg);
  std::optional<io::ModelFile> stored;
  if (!cfg.model.empty()) stored = io::read_model(cfg.model);
  log(err, 1, "scoring " + std::to_string(cube.pixels()) + " pixels x " + std::to_string(cube.bands()) + " bands with " + cfg.detector);

  std::optional<ScoreMap> scores;
  json summary{{"command", "detect"}, {"detector", cfg.detector}, {"pixels", cube.pixels()}, {"bands", cube.bands()}};

  if (cfg.detector == "rxd" || cfg.detector == "rxd-p") {
    const bool need_precision = cfg.detector == "rxd";
    BackgroundStats stats;
    if (stored && stored->stats) {
      stats = *stored->stats;
      if (need_precision && !stats.precision) {
        auto [precision, rcond] = spd_inverse(stats.covariance, cfg.ridge);
        stats.precision = std::move(precision);
        stats.rcond = rcond;
      }
    } else {
      stats = estimate_background_stats(cube, need_precision, cfg.ridge);
    }
    if (cfg.detector == "rxd") {
      scores = rxd_score(cube, stats);
    } else {
      auto result = rxd_p_score(cube, stats, policy_for(cfg));
      summary["retained_p"] = result.policy.retained_p;
      scores = std::move(result.scores);
    }
  } else {
    const bool spatial = cfg.detector == "lad-s";
    const bool truncated = cfg.detector == "lad-p";
    GraphModel model;
    if (stored && stored->graph) {
      model = *stored->graph;
      if (truncated && !model.eigen) model = eigendecompose(std::move(model));
    } else {
      model = *build_graph(cfg, cube, spatial, truncated).graph;
    }
    if (truncated) {
      auto result = lad_p_score(cube, model, policy_for(cfg));
      summary["retained_p"] = result.policy.retained_p;
      scores = std::move(result.scores);
    } else if (model.topology() == Topology::spatial_spectral) {
      scores = lad_s_score(cube, model);
    } else {
      if (spatial) throw Error(ErrorCode::invalid_argument, "lad-s needs a spatial-spectral model");
      scores = lad_score(cube, model);
    }
    summary["order"] = model.order();
  }

  json provenance = config_provenance(cfg);
  io::write_scores(*scores, cfg.output, provenance);
  summary["max_score"] = scores->max();
  summary["instrumentation"] = instrumentation();
  out << summary.dump() << "\n";
}

inline void cmd_threshold(const std::string& scores_path, double t, const std::string& output, std::ostream& out) {
  const ScoreMap scores = io::read_scores(scores_path);
  const Mask mask = apply_threshold(scores, t);
  io::write_mask(mask, output);
  out << json{{"command", "threshold"}, {"t", t}, {"eta", t * std::max(scores.max(), 0.0)}, {"flagged", mask.count()}}.dump()
      << "\n";
}

inline std::vector<double> grid_for(double step) {
  const double steps = std::round(1.0 / step);
  if (std::abs(steps * step - 1.0) > 1e-9) {
    throw Error(ErrorCode::invalid_config, "grid step must divide 1 evenly", {{"step", std::to_string(step)}});
  }
  return default_grid(static_cast<std::size_t>(steps));
}

inline void cmd_eval(const std::string& pred_path, const std::string& scores_path, const std::string& truth_path,
                     std::optional<double> t, double grid_step, const std::string& output, const std::string& roc_out,
                     std::ostream& out) {
  const Mask truth = io::read_mask(truth_path);
  json report;
  if (!pred_path.empty()) {
    const Mask pred = io::read_mask(pred_path);
    const Confusion c = confusion(pred, truth);
    report["counts"] = io::confusion_json(c);
    report["soi"] = soi(pred, truth);
    report["f1"] = f1_score(c);
  } else {
    const ScoreMap scores = io::read_scores(scores_path);
    const auto grid = grid_for(grid_step);
    const double at = t ? *t : best_threshold(scores, truth, grid).t;
    const EvalReport r = evaluate(scores, truth, at, grid);
    report = io::report_json(r);
    if (!roc_out.empty()) io::write_file_atomic(roc_out, io::roc_csv(r.roc));
  }
  if (!output.empty()) io::write_file_atomic(output, io::dump_json(report));
  out << report.dump() << "\n";
}

inline void cmd_roc(const std::string& scores_path, const std::string& truth_path, double grid_step,
                    const std::string& output, std::ostream& out) {
  const ScoreMap scores = io::read_scores(scores_path);
  const Mask truth = io::read_mask(truth_path);
  const auto roc = roc_curve(scores, truth, grid_for(grid_step));
  const std::string csv = io::roc_csv(roc);
  if (output.empty()) out << csv;
  else io::write_file_atomic(output, csv);
}

struct ImplantOptions {
  std::string target, source, labels, mask, output, truth_out;
  int k = 0;
  std::uint64_t seed = 0;
  SquareLineLayout layout;
};

inline json layout_json(const SquareLineLayout& layout) {
  return {{"max_side", layout.max_side}, {"rotation", layout.rotation}, {"square_gap", layout.square_gap},
          {"line_gap", layout.line_gap}, {"mirrored", layout.mirrored}};
}

inline void cmd_implant(const ImplantOptions& o, std::ostream& out) {
  const ImageCube target = io::read_cube(o.target);
  const ImageCube source = o.source.empty() ? target : io::read_cube(o.source);
  ImplantSpec spec;
  spec.mask = o.mask.empty() ? square_line_mask(target.dims(), o.layout) : io::read_mask(o.mask);
  spec.source_labels = io::read_labels(o.labels);
  spec.k = o.k;
  spec.seed = o.seed;
  const ImageCube result = implant(target, spec, source);
  json provenance{{"implant", {{"class", o.k}, {"seed", o.seed}}}};
  if (o.mask.empty()) provenance["implant"]["layout"] = layout_json(o.layout);
  io::write_cube(result, o.output, io::DType::f64, provenance);
  if (!o.truth_out.empty()) io::write_mask(spec.mask, o.truth_out);
  out << json{{"command", "implant"}, {"implanted", spec.mask.count()}, {"class", o.k}}.dump() << "\n";
}

struct GmrfOptions {
  std::string dims = "64x64";
  std::size_t bands = 8;
  double rho = 0.0;
  double shift = 0.0;
  std::string shift_pattern = "alternating";
  std::string anomaly = "square-line";
  double mean_base = 0.0;
  double mean_step = 0.0;
  std::uint64_t seed = 0;
  std::string output, truth_out;
  SquareLineLayout layout;
};

inline Dims parse_dims(const std::string& text) {
  Dims dims;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, 'x')) {
    try {
      dims.push_back(static_cast<std::size_t>(std::stoull(item)));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::invalid_config, "malformed dims (expected RxC or DxRxC)", {{"dims", text}});
    }
  }
  validate_dims(dims);
  return dims;
}

inline void cmd_gmrf(const GmrfOptions& o, std::ostream& out) {
  const Dims dims = parse_dims(o.dims);
  const Matrix precision = ar1_precision(o.bands, o.rho);
  const auto m = static_cast<Eigen::Index>(o.bands);
  std::optional<GmrfAnomaly> anomaly;
  if (o.anomaly == "square-line" && o.shift != 0.0) {
    // Marginal standard deviation is 1 for the AR(1) background.
    Vector shift(m);
    for (Eigen::Index b = 0; b < m; ++b) shift(b) = o.shift * ((o.shift_pattern == "alternating" && b % 2) ? -1.0 : 1.0);
    anomaly = GmrfAnomaly{square_line_mask(dims, o.layout), shift};
  }
  Vector mean(m);
  for (Eigen::Index b = 0; b < m; ++b) mean(b) = o.mean_base + o.mean_step * static_cast<double>(b);
  const GmrfScene scene = sample_gmrf_scene(dims, o.bands, precision, anomaly, o.seed, mean);
  json provenance{{"gmrf", {{"rho", o.rho}, {"shift", o.shift}, {"shift_pattern", o.shift_pattern}, {"seed", o.seed},
                            {"mean_base", o.mean_base}, {"mean_step", o.mean_step}}}};
  if (anomaly) provenance["gmrf"]["layout"] = layout_json(o.layout);
  io::write_cube(scene.cube, o.output, io::DType::f64, provenance);
  if (!o.truth_out.empty()) io::write_mask(scene.truth, o.truth_out);
  out << json{{"command", "gmrf"}, {"pixels", scene.cube.pixels()}, {"bands", o.bands}, {"anomalous", scene.truth.count()}}.dump()
      << "\n";
}

/// Energy table: per-component energy, cumulative energy and ratio, with the
/// weight each component receives in the detector (1/kappa for KLT, lambda
/// for GFT).
inline void cmd_energy(const RunConfig& cfg, const std::string& basis, const std::string& output, std::ostream& out) {
  ImageCube cube = load_input(cfg);
  Vector component;
  Vector weight;
  if (basis == "klt") {
    const BackgroundStats stats = estimate_background_stats(cube, false);
    const CovarianceBasis cov = covariance_basis(stats);
    RowMatrix coeffs(static_cast<Eigen::Index>(cube.pixels()), cov.vectors.cols());
    for (std::size_t i = 0; i < cube.pixels(); ++i) {
      coeffs.row(static_cast<Eigen::Index>(i)) = klt_transform(center_pixel(cube.pixel(i), stats), cov.vectors).transpose();
    }
    component = component_energies(coeffs);
    weight = cov.kappa.unaryExpr([](double k) { return k > 0.0 ? 1.0 / k : 0.0; });
  } else {
    const GraphModel model = *build_graph(cfg, cube, cfg.detector == "lad-s", true).graph;
    lad::detail::BlockAccumulator acc(static_cast<Eigen::Index>(model.order()));
    lad::detail::for_each_signal(cube, model, [&](std::size_t, const Vector& s) {
      acc.add(gft_transform(s, model).array().square().matrix());
    });
    component = acc.total();
    weight = model.eigen->values;
  }
  const auto curve = energy_curve(component);
  const double total = curve.back();
  std::string csv = "j,energy,cumulative,ratio,weight\n";
  for (std::size_t j = 0; j < curve.size(); ++j) {
    csv += std::to_string(j + 1) + "," + io::format_double(component(static_cast<Eigen::Index>(j))) + "," +
           io::format_double(curve[j]) + "," + io::format_double(total > 0.0 ? curve[j] / total : 0.0) + "," +
           io::format_double(weight(static_cast<Eigen::Index>(j))) + "\n";
  }
  if (output.empty()) out << csv;
  else io::write_file_atomic(output, csv);
  json summary{{"command", "energy"}, {"basis", basis}, {"components", curve.size()}};
  if (total > 0.0) summary["selected_p"] = select_p(curve, cfg.psi);
  if (!output.empty()) out << summary.dump() << "\n";
}

inline void emit_error(std::ostream& err, const std::string& code, const std::string& message, const json& extra) {
  json j{{"error", {{"code", code}, {"message", message}}}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j["error"][it.key()] = it.value();
  err << j.dump() << "\n";
}

}  // namespace detail

/// Runs one CLI invocation. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  counters().reset();
  CLI::App app{"Graph-Laplacian and RX anomaly detection for multi-band images"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI configuration file");

  RunConfig cfg;
  std::string kind = "graph";
  bool spatial = false, with_eigen = false;
  std::string scores_path, truth_path, pred_path, report_out, roc_out, basis = "klt";
  std::optional<double> eval_t;
  double grid_step = 0.02;
  detail::ImplantOptions implant_opts;
  detail::GmrfOptions gmrf_opts;

  auto* model = app.add_subcommand("model", "build and serialize a background or graph model");
  model->add_option("--input,-i", cfg.input, "input cube header");
  model->add_option("--out,-o", cfg.output, "output model header");
  model->add_option("--kind", kind, "background | graph");
  model->add_flag("--spatial", spatial, "build the spatial-spectral graph");
  model->add_flag("--eigen", with_eigen, "store the Laplacian eigensystem");
  detail::add_model_options(model, cfg);

  auto* detect = app.add_subcommand("detect", "score every pixel");
  detect->add_option("--input,-i", cfg.input, "input cube header");
  detect->add_option("--out,-o", cfg.output, "output score cube header");
  detect->add_option("--detector,-d", cfg.detector, "rxd | rxd-p | lad | lad-p | lad-s");
  detect->add_option("--model,-m", cfg.model, "prebuilt model header");
  detect->add_option("--psi", cfg.psi, "retained energy fraction for rxd-p / lad-p");
  detect->add_option("--p", cfg.p, "fixed component count for rxd-p / lad-p");
  detail::add_model_options(detect, cfg);

  auto* threshold = app.add_subcommand("threshold", "binarize a score map at t * max(score)");
  threshold->add_option("--scores,-s", scores_path, "score cube header");
  threshold->add_option("--t", cfg.t, "threshold fraction in [0, 1]");
  threshold->add_option("--out,-o", cfg.output, "output PGM mask");

  auto* eval = app.add_subcommand("eval", "compare a mask or score map with ground truth");
  eval->add_option("--pred", pred_path, "predicted PGM mask");
  eval->add_option("--scores,-s", scores_path, "score cube header (sweeps thresholds)");
  eval->add_option("--truth", truth_path, "ground-truth PGM mask");
  eval->add_option("--t", eval_t, "report counts at this fraction (default: best)");
  eval->add_option("--grid-step", grid_step, "threshold grid spacing");
  eval->add_option("--out,-o", report_out, "JSON report");
  eval->add_option("--roc-out", roc_out, "ROC CSV");

  auto* roc = app.add_subcommand("roc", "ROC table (fpr,tpr,t) over a threshold grid");
  roc->add_option("--scores,-s", scores_path, "score cube header");
  roc->add_option("--truth", truth_path, "ground-truth PGM mask");
  roc->add_option("--grid-step", grid_step, "threshold grid spacing");
  roc->add_option("--out,-o", report_out, "CSV output (stdout when omitted)");

  auto* implant_cmd = app.add_subcommand("implant", "implant class pixels under a mask");
  implant_cmd->add_option("--target", implant_opts.target, "target cube header");
  implant_cmd->add_option("--source", implant_opts.source, "labeled source cube (default: target)");
  implant_cmd->add_option("--labels", implant_opts.labels, "single-band integer label cube for the source");
  implant_cmd->add_option("--class,-k", implant_opts.k, "class to draw pixels from");
  implant_cmd->add_option("--mask", implant_opts.mask, "PGM implant mask (default: square-line layout)");
  implant_cmd->add_option("--seed", implant_opts.seed, "RNG seed");
  implant_cmd->add_option("--max-side", implant_opts.layout.max_side, "largest square side");
  implant_cmd->add_option("--rotation", implant_opts.layout.rotation, "layout rotation in radians");
  implant_cmd->add_option("--square-gap", implant_opts.layout.square_gap, "gap between squares");
  implant_cmd->add_option("--line-gap", implant_opts.layout.line_gap, "gap between the two lines");
  implant_cmd->add_option("--out,-o", implant_opts.output, "output cube header");
  implant_cmd->add_option("--truth-out", implant_opts.truth_out, "output PGM truth mask");

  auto* gmrf = app.add_subcommand("gmrf", "sample a Gaussian scene with an optional mean-shift anomaly");
  gmrf->add_option("--dims", gmrf_opts.dims, "RxC or DxRxC");
  gmrf->add_option("--bands", gmrf_opts.bands, "channel count");
  gmrf->add_option("--rho", gmrf_opts.rho, "AR(1) band correlation (0: independent)");
  gmrf->add_option("--shift", gmrf_opts.shift, "anomaly mean shift in standard deviations (0: none)");
  gmrf->add_option("--shift-pattern", gmrf_opts.shift_pattern, "alternating | uniform");
  gmrf->add_option("--anomaly", gmrf_opts.anomaly, "square-line | none");
  gmrf->add_option("--mean-base", gmrf_opts.mean_base, "background mean of band 1");
  gmrf->add_option("--mean-step", gmrf_opts.mean_step, "background mean increment per band");
  gmrf->add_option("--seed", gmrf_opts.seed, "RNG seed");
  gmrf->add_option("--max-side", gmrf_opts.layout.max_side, "largest square side");
  gmrf->add_option("--rotation", gmrf_opts.layout.rotation, "layout rotation in radians");
  gmrf->add_option("--out,-o", gmrf_opts.output, "output cube header");
  gmrf->add_option("--truth-out", gmrf_opts.truth_out, "output PGM truth mask");

  auto* energy = app.add_subcommand("energy", "cumulative energy and eigenvalue table");
  energy->add_option("--input,-i", cfg.input, "input cube header");
  energy->add_option("--basis", basis, "klt | gft");
  energy->add_option("--detector,-d", cfg.detector, "lad-s selects the spatial-spectral graph for gft");
  energy->add_option("--psi", cfg.psi, "energy fraction used to report the selected p");
  energy->add_option("--out,-o", report_out, "CSV output (stdout when omitted)");
  detail::add_model_options(energy, cfg);

  std::vector<std::string> storage{"lad"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      throw detail::UsageError{{e.what()}};
    }

    std::vector<std::string> errors;
    if (*model) {
      errors = validate(cfg);
      detail::require_paths(errors, {{"--input", &cfg.input}, {"--out", &cfg.output}});
      if (kind != "graph" && kind != "background") errors.push_back("kind must be graph or background");
      detail::finish_validation(errors);
      detail::cmd_model(cfg, kind, spatial, with_eigen, out);
    } else if (*detect) {
      errors = validate(cfg);
      detail::require_paths(errors, {{"--input", &cfg.input}, {"--out", &cfg.output}});
      detail::finish_validation(errors);
      detail::cmd_detect(cfg, out, err);
    } else if (*threshold) {
      if (!(cfg.t >= 0.0 && cfg.t <= 1.0)) errors.push_back("t must lie in [0, 1]");
      detail::require_paths(errors, {{"--scores", &scores_path}, {"--out", &cfg.output}});
      detail::finish_validation(errors);
      detail::cmd_threshold(scores_path, cfg.t, cfg.output, out);
    } else if (*eval) {
      detail::require_paths(errors, {{"--truth", &truth_path}});
      if (pred_path.empty() == scores_path.empty()) errors.push_back("exactly one of --pred and --scores is required");
      if (eval_t && !(*eval_t >= 0.0 && *eval_t <= 1.0)) errors.push_back("t must lie in [0, 1]");
      if (!(grid_step > 0.0 && grid_step <= 1.0)) errors.push_back("grid-step must lie in (0, 1]");
      detail::finish_validation(errors);
      detail::cmd_eval(pred_path, scores_path, truth_path, eval_t, grid_step, report_out, roc_out, out);
    } else if (*roc) {
      detail::require_paths(errors, {{"--scores", &scores_path}, {"--truth", &truth_path}});
      if (!(grid_step > 0.0 && grid_step <= 1.0)) errors.push_back("grid-step must lie in (0, 1]");
      detail::finish_validation(errors);
      detail::cmd_roc(scores_path, truth_path, grid_step, report_out, out);
    } else if (*implant_cmd) {
      detail::require_paths(errors, {{"--target", &implant_opts.target}, {"--labels", &implant_opts.labels},
                                     {"--out", &implant_opts.output}});
      if (implant_opts.layout.max_side < 1) errors.push_back("max-side must be >= 1");
      detail::finish_validation(errors);
      detail::cmd_implant(implant_opts, out);
    } else if (*gmrf) {
      detail::require_paths(errors, {{"--out", &gmrf_opts.output}});
      if (gmrf_opts.bands < 1) errors.push_back("bands must be >= 1");
      if (!(std::abs(gmrf_opts.rho) < 1.0)) errors.push_back("rho must lie in (-1, 1)");
      if (gmrf_opts.shift_pattern != "alternating" && gmrf_opts.shift_pattern != "uniform") {
        errors.push_back("shift-pattern must be alternating or uniform");
      }
      if (gmrf_opts.anomaly != "square-line" && gmrf_opts.anomaly != "none") errors.push_back("anomaly must be square-line or none");
      detail::finish_validation(errors);
      detail::cmd_gmrf(gmrf_opts, out);
    } else if (*energy) {
      errors = validate(cfg);
      detail::require_paths(errors, {{"--input", &cfg.input}});
      if (basis != "klt" && basis != "gft") errors.push_back("basis must be klt or gft");
      detail::finish_validation(errors);
      detail::cmd_energy(cfg, basis, report_out, out);
    }
    return 0;
  } catch (const detail::UsageError& e) {
    detail::emit_error(err, "invalid_config", "invalid command line or configuration", {{"details", e.messages}});
    return 2;
  } catch (const Error& e) {
    io::json context = io::json::object();
    for (const auto& [k, v] : e.context()) context[k] = v;
    detail::emit_error(err, to_string(e.code()), e.what(), {{"context", context}});
    return e.code() == ErrorCode::invalid_config ? 2 : 1;
  } catch (const std::exception& e) {
    detail::emit_error(err, "internal", e.what(), io::json::object());
    return 1;
  }
}

}  // namespace lad::cli
