#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsg/dataset_io.hpp"
#include "rsg/errors.hpp"
#include "rsg/synth_scenes.hpp"
#include "rsg/train_eval.hpp"

namespace rsg {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    OracleRules, lane_width, same_lane_lat, heading_tol_deg, follow_gap, follow_ratio_min,
    follow_ratio_max, same_lane_gap, approach_closing, approach_dist, pass_lat_min, pass_lat_max,
    pass_window, overtake_ratio, stopped_speed, human_wait_dist, human_cross_speed,
    human_cross_lat, vehicle_wait_dist, vehicle_cross_speed, vehicle_cross_lat,
    may_intersect_dist, on_lane_dist, group_dist, group_speed, group_heading_deg, group_frames,
    behind_gap, behind_lat, waiting_ts_dist, human_still_speed, stop_ts_dist, wait_ts_dist,
    react_ts_dist, react_decel, sign_lat, avoid_dist, avoid_lat, avoid_lat_speed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CountRange, min, max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScenarioWeights, following, passing_by, crossing,
                                                group, overtaking, approaching)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenConfig, n_scenes, duration_s, hz, n_vehicles,
                                                n_humans, n_obstacles, n_signs, weights, seed,
                                                sensor_range, position_noise, rules)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenerateOptions, noise, jitter, jitter_min_gap,
                                                jitter_max_gap)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, hidden_dim, num_layers, init_scale,
                                                seed)

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"learning_rate", c.learning_rate},
       {"optimizer", to_string(c.optimizer)},
       {"momentum", c.momentum},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"adam_eps", c.adam_eps},
       {"no_relation_downweight", c.no_relation_downweight},
       {"slope", to_string(c.slope)},
       {"seed", c.seed},
       {"max_dist", c.max_dist},
       {"validation_fraction", c.validation_fraction}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.optimizer = parse_optimizer(j.value("optimizer", std::string(to_string(d.optimizer))));
  c.momentum = j.value("momentum", d.momentum);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.no_relation_downweight = j.value("no_relation_downweight", d.no_relation_downweight);
  c.slope = parse_slope_mode(j.value("slope", std::string(to_string(d.slope))));
  c.seed = j.value("seed", d.seed);
  c.max_dist = j.value("max_dist", d.max_dist);
  c.validation_fraction = j.value("validation_fraction", d.validation_fraction);
}

}  // namespace rsg

namespace rsg::cli {

namespace {

using json = nlohmann::json;

struct EvalSettings {
  std::vector<int> k{15, 25};
  std::string split = "test";
  bool merge_behind = false;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalSettings, k, split, merge_behind)

struct Paths {
  std::string data, priors, model, out, report, history;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Paths, data, priors, model, out, report, history)

/// Everything a command can be configured with. Each command echoes the
/// whole thing; feeding the echo back through --config reproduces the run.
struct RunConfig {
  GenConfig gen;
  GenerateOptions generate;
  ModelConfig model;
  TrainConfig train;
  double alpha = 1.0;
  double test_fraction = 0.1;
  EvalSettings eval;
  Paths paths;
};

json to_json_config(const RunConfig& c) {
  return {{"gen", c.gen},       {"generate", c.generate},
          {"model", c.model},   {"train", c.train},
          {"alpha", c.alpha},   {"test_fraction", c.test_fraction},
          {"eval", c.eval},     {"paths", c.paths}};
}

RunConfig from_json_config(const json& j) {
  RunConfig c;
  c.gen = j.at("gen").get<GenConfig>();
  c.generate = j.at("generate").get<GenerateOptions>();
  c.model = j.at("model").get<ModelConfig>();
  c.train = j.at("train").get<TrainConfig>();
  c.alpha = j.at("alpha").get<double>();
  c.test_fraction = j.at("test_fraction").get<double>();
  c.eval = j.at("eval").get<EvalSettings>();
  c.paths = j.at("paths").get<Paths>();
  return c;
}

/// Rejects keys that the defaults do not have, so typos do not pass silently.
void check_known(const json& given, const json& known, const std::string& prefix) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const auto name = prefix.empty() ? key : prefix + "." + key;
    if (!known.is_object() || !known.contains(key)) {
      throw ValidationError("unknown config key '" + name + "'");
    }
    if (known.at(key).is_object()) check_known(value, known.at(key), name);
  }
}

json* lookup(json& root, const std::string& dotted) {
  json* cur = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
  }
  return cur;
}

void set_value(json& root, const std::string& dotted, const std::string& raw) {
  json* slot = lookup(root, dotted);
  if (slot == nullptr) throw ValidationError("unknown config key '" + dotted + "'");
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  *slot = value;
}

/// Options shared by every command plus the merged configuration.
struct Session {
  std::string config_file;
  std::vector<std::string> overrides;
  json cfg = to_json_config(RunConfig{});

  void add_common(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON config file (keys as in the echoed config)");
    cmd->add_option("--set", overrides, "Override a config key: section.key=value")
        ->allow_extra_args(false);
  }

  /// Applies the config file, then --set overrides. Explicit flags are
  /// applied by the caller afterwards.
  void load() {
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw IoError("cannot open config " + config_file);
      json given;
      try {
        given = json::parse(in);
      } catch (const json::parse_error& e) {
        throw IoError(config_file + ": " + e.what());
      }
      check_known(given, cfg, "");
      cfg.merge_patch(given);
    }
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + o + "'");
      set_value(cfg, o.substr(0, eq), o.substr(eq + 1));
    }
  }

  RunConfig resolve(std::ostream& out) const {
    RunConfig rc;
    try {
      rc = from_json_config(cfg);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("bad config value: ") + e.what());
    }
    out << "effective config:\n" << to_json_config(rc).dump(2) << "\n";
    return rc;
  }
};

std::string require_path(const std::string& p, const char* what) {
  if (p.empty()) throw ValidationError(std::string("missing ") + what + " path");
  return p;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

void print_stats(const Dataset& d, std::ostream& out) {
  std::array<std::int64_t, kNumRelationships> counts{};
  std::int64_t total = 0, nodes = 0;
  for (const auto& s : d.scenes) {
    for (const auto& f : s.frames) {
      nodes += static_cast<std::int64_t>(f.nodes.size());
      for (const auto& e : f.edges) {
        ++counts[static_cast<std::size_t>(index_of(e.rel))];
        ++total;
      }
    }
  }
  const auto frames = static_cast<std::int64_t>(d.frame_count());
  out << "scenes: " << d.scenes.size() << "\nframes: " << frames << "\nlabeled edges: " << total
      << "\nobjects per frame: "
      << (frames == 0 ? 0.0 : static_cast<double>(nodes) / static_cast<double>(frames)) << "\n";
  std::vector<std::pair<std::int64_t, std::size_t>> order;
  for (std::size_t r = 0; r < kNumRelationships; ++r) order.push_back({counts[r], r});
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  out << "relationship marginals:\n";
  std::int64_t top5 = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto [n, r] = order[i];
    if (n == 0) continue;
    if (i < 5) top5 += n;
    char buf[96];
    std::snprintf(buf, sizeof buf, "  %-30s %8lld  %s\n",
                  std::string(to_string(relation_from_index(static_cast<int>(r)))).c_str(),
                  static_cast<long long>(n), pct(total ? double(n) / double(total) : 0).c_str());
    out << buf;
  }
  out << "top-5 share: " << pct(total ? double(top5) / double(total) : 0) << "\n";
}

void print_priors(const PriorTable& pt, std::ostream& out) {
  out << "prior table (rows: lower-id class, higher-id class; alpha=" << pt.smoothing_alpha()
      << ")\n";
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      const auto ci = class_from_index(static_cast<int>(i));
      const auto cj = class_from_index(static_cast<int>(j));
      const auto& p = pt.prior_vector(ci, cj);
      double sum = 0;
      for (double v : p) sum += v;
      out << "  " << to_string(ci) << " / " << to_string(cj) << "  (row sum "
          << (std::abs(sum - 1.0) <= 1e-9 ? "1 ok" : std::to_string(sum)) << ")\n";
      for (std::size_t r = 0; r < kNumRelationships; ++r) {
        if (p[r] <= 0) continue;
        char buf[96];
        std::snprintf(buf, sizeof buf, "    %-30s %.6f\n",
                      std::string(to_string(relation_from_index(static_cast<int>(r)))).c_str(),
                      p[r]);
        out << buf;
      }
    }
  }
}

std::pair<Dataset, Dataset> load_split(const RunConfig& rc) {
  const auto data = load_dataset(require_path(rc.paths.data, "--data"));
  return split_dataset(data, rc.test_fraction);
}

json report_json(const EvalReport& r) {
  json rat = json::object();
  for (const auto& [k, v] : r.r_at) rat[std::to_string(k)] = v;
  json per = json::object();
  for (std::size_t c = 0; c + 1 < kNumRelationships; ++c) {
    const double v = r.per_class_accuracy[c];
    per[std::string(to_string(relation_from_index(static_cast<int>(c))))] =
        std::isnan(v) ? json(nullptr) : json(v);
  }
  return {{"label", r.label},
          {"frames", r.frames},
          {"related_pairs", r.related_pairs},
          {"r_at", rat},
          {"pairwise_accuracy", r.pairwise_accuracy},
          {"avg_edges_per_frame", r.avg_edges_per_frame},
          {"avg_degree_gt", r.avg_degree_gt},
          {"avg_degree_pred", r.avg_degree_pred},
          {"per_class_accuracy", per}};
}

int cmd_gen(Session& s, std::optional<std::uint64_t> seed, std::optional<int> scenes,
            std::optional<double> duration, std::optional<double> hz, bool jitter, bool no_noise,
            const std::string& out_path, std::ostream& out) {
  s.load();
  if (seed) s.cfg["gen"]["seed"] = *seed;
  if (scenes) s.cfg["gen"]["n_scenes"] = *scenes;
  if (duration) s.cfg["gen"]["duration_s"] = *duration;
  if (hz) s.cfg["gen"]["hz"] = *hz;
  if (jitter) s.cfg["generate"]["jitter"] = true;
  if (no_noise) s.cfg["generate"]["noise"] = false;
  if (!out_path.empty()) s.cfg["paths"]["out"] = out_path;
  const auto rc = s.resolve(out);
  if (rc.gen.n_scenes < 1) throw ValidationError("--scenes must be at least 1");
  const auto path = require_path(rc.paths.out, "--out");
  const auto d = generate_dataset(rc.gen, rc.generate);
  save_dataset(d, path);
  print_stats(d, out);
  out << "wrote " << path << "\n";
  return kOk;
}

int cmd_priors(Session& s, std::optional<double> alpha, const std::string& train_path,
               const std::string& out_path, std::ostream& out) {
  s.load();
  if (alpha) s.cfg["alpha"] = *alpha;
  if (!train_path.empty()) s.cfg["paths"]["data"] = train_path;
  if (!out_path.empty()) s.cfg["paths"]["priors"] = out_path;
  const auto rc = s.resolve(out);
  const auto path = require_path(rc.paths.priors, "--out");
  const auto [train_set, test_set] = load_split(rc);
  const auto pt = compute_priors(train_set, rc.alpha);
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      const auto ci = class_from_index(static_cast<int>(i));
      const auto cj = class_from_index(static_cast<int>(j));
      if (rc.alpha == 0.0 && pt.zero_support(ci, cj)) {
        throw ValidationError("zero support with alpha=0 for class pair " +
                              std::string(to_string(ci)) + " / " + std::string(to_string(cj)));
      }
    }
  }
  print_priors(pt, out);
  save_priors(pt, path);
  out << "computed from " << train_set.scenes.size() << " training scenes; wrote " << path << "\n";
  return kOk;
}

int cmd_train(Session& s, std::optional<int> layers, std::optional<std::string> slope,
              std::optional<int> epochs, std::optional<std::uint64_t> seed,
              const std::string& data, const std::string& priors, const std::string& out_path,
              const std::string& history, std::ostream& out) {
  s.load();
  if (layers) s.cfg["model"]["num_layers"] = *layers;
  if (slope) s.cfg["train"]["slope"] = *slope;
  if (epochs) s.cfg["train"]["epochs"] = *epochs;
  if (seed) {
    s.cfg["train"]["seed"] = *seed;
    s.cfg["model"]["seed"] = *seed;
  }
  if (!data.empty()) s.cfg["paths"]["data"] = data;
  if (!priors.empty()) s.cfg["paths"]["priors"] = priors;
  if (!out_path.empty()) s.cfg["paths"]["model"] = out_path;
  if (!history.empty()) s.cfg["paths"]["history"] = history;
  const auto rc = s.resolve(out);
  const auto model_path = require_path(rc.paths.model, "--out");
  const auto pt = load_priors(require_path(rc.paths.priors, "--priors"));
  const auto [train_set, test_set] = load_split(rc);
  out << "training on " << train_set.scenes.size() << " scenes (" << train_set.frame_count()
      << " frames)\n";
  std::ostringstream log;
  log << "epoch,mean_loss,val_accuracy\n";
  const auto result = train(train_set, pt, rc.model, rc.train, [&](const EpochStats& e) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %3d  loss %.6f  val_accuracy %.4f\n", e.epoch,
                  e.mean_loss, e.val_accuracy);
    out << buf << std::flush;
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.mean_loss, e.val_accuracy);
    log << buf;
  });
  save_model(result.params, model_path,
             {{"slope", std::string(to_string(rc.train.slope))},
              {"layers", std::to_string(rc.model.num_layers)},
              {"epochs", std::to_string(rc.train.epochs)}});
  const auto history_path =
      rc.paths.history.empty() ? model_path + ".history.csv" : rc.paths.history;
  write_text_file(history_path, log.str());
  out << "wrote " << model_path << " and " << history_path << "\n";
  return kOk;
}

int cmd_eval(Session& s, const std::string& data, const std::string& model,
             const std::string& priors, const std::string& ks, const std::string& report,
             const std::string& split, bool oracle, bool merge, const std::string& label,
             std::ostream& out) {
  s.load();
  if (!data.empty()) s.cfg["paths"]["data"] = data;
  if (!model.empty()) s.cfg["paths"]["model"] = model;
  if (!priors.empty()) s.cfg["paths"]["priors"] = priors;
  if (!report.empty()) s.cfg["paths"]["report"] = report;
  if (!split.empty()) s.cfg["eval"]["split"] = split;
  if (merge) s.cfg["eval"]["merge_behind"] = true;
  if (!ks.empty()) {
    json list = json::array();
    std::stringstream ss(ks);
    std::string part;
    while (std::getline(ss, part, ',')) {
      try {
        list.push_back(std::stoi(part));
      } catch (const std::exception&) {
        throw ValidationError("bad --k entry '" + part + "'");
      }
    }
    s.cfg["eval"]["k"] = list;
  }
  const auto rc = s.resolve(out);
  if (rc.eval.split != "test" && rc.eval.split != "all") {
    throw ValidationError("eval.split must be 'test' or 'all'");
  }
  const auto full = load_dataset(require_path(rc.paths.data, "--data"));
  const Dataset test = rc.eval.split == "all" ? full : split_dataset(full, rc.test_fraction).second;

  std::optional<PriorTable> pt;
  std::optional<ModelParameters> params;
  Annotations notes;
  Predictor predictor;
  std::string name = label;
  if (oracle) {
    predictor = oracle_predictor();
    if (name.empty()) name = "oracle";
  } else {
    pt = load_priors(require_path(rc.paths.priors, "--priors"));
    params = load_model(require_path(rc.paths.model, "--model"), &notes);
    predictor = model_predictor(*pt, *params, rc.train.max_dist);
    if (name.empty()) {
      name = "rsg_net (slope=" + (notes.count("slope") ? notes["slope"] : std::string("?")) +
             ", layers=" + std::to_string(params->config.num_layers) + ")";
    }
  }
  const auto mergemap = common_behind_merge();
  std::vector<FrameResult> frames;
  auto rep = evaluate(test, predictor, rc.eval.k, rc.eval.merge_behind ? &mergemap : nullptr,
                      &frames);
  rep.label = name;
  const auto text = format_report(rep);
  out << text;
  if (!rc.paths.report.empty()) {
    const std::filesystem::path base(rc.paths.report);
    write_text_file(base, text);
    auto stem = base;
    stem.replace_extension();
    write_text_file(stem.string() + ".confusion.csv", confusion_csv(rep.confusion));
    write_text_file(stem.string() + ".json", report_json(rep).dump(2) + "\n");
    std::vector<PredictionRecord> recs;
    recs.reserve(frames.size());
    for (const auto& f : frames) {
      recs.push_back({f.scene_id, f.frame_index, f.prediction.candidate_pairs, f.prediction.ranked,
                      f.prediction.graph.edges});
    }
    const auto pred_path = (base.has_parent_path() ? base.parent_path() : std::filesystem::path("."))
                           / "predictions.rsgj";
    save_predictions(recs, pred_path);
    out << "wrote " << base.string() << ", " << stem.string() << ".confusion.csv, "
        << stem.string() << ".json, " << pred_path.string() << "\n";
  }
  return kOk;
}

int cmd_gradcheck(Session& s, std::optional<int> layers, std::optional<std::uint64_t> seed,
                  std::optional<int> hidden, double tol, std::ostream& out) {
  s.load();
  if (layers) s.cfg["model"]["num_layers"] = *layers;
  if (seed) s.cfg["model"]["seed"] = *seed;
  if (hidden) s.cfg["model"]["hidden_dim"] = *hidden;
  const auto rc = s.resolve(out);
  const auto rep = model_gradient_check(rc.model, rc.model.seed);
  char buf[160];
  std::snprintf(buf, sizeof buf, "max relative error %.3e over %zu coordinates (tolerance %.1e)\n",
                rep.max_rel_error, rep.coordinates, tol);
  out << buf;
  if (!(rep.max_rel_error <= tol)) {
    out << "FAILED\n";
    return kNumeric;
  }
  out << "ok\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Road scene graph generation: synthetic data, priors, training, evaluation",
               "rsg"};
  app.require_subcommand(1);
  Session session;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset (.rsgd)");
  session.add_common(gen);
  std::optional<std::uint64_t> gen_seed;
  std::optional<int> gen_scenes;
  std::optional<double> gen_duration, gen_hz;
  bool gen_jitter = false, gen_no_noise = false;
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output dataset path");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--scenes", gen_scenes, "Number of scenes");
  gen->add_option("--duration", gen_duration, "Scene duration in seconds");
  gen->add_option("--hz", gen_hz, "Frame rate (must be 2)");
  gen->add_flag("--jitter", gen_jitter, "Widen annotation boundaries into ramps");
  gen->add_flag("--no-noise", gen_no_noise, "Skip observation noise");

  auto* pri = app.add_subcommand("priors", "Count class-pair relationship priors (.rsgp)");
  session.add_common(pri);
  std::optional<double> pri_alpha;
  std::string pri_train, pri_out;
  pri->add_option("--train", pri_train, "Dataset; priors use its training split");
  pri->add_option("--alpha", pri_alpha, "Additive smoothing");
  pri->add_option("--out", pri_out, "Output prior path");

  auto* trn = app.add_subcommand("train", "Train the model (.rsgm)");
  session.add_common(trn);
  std::optional<int> trn_layers, trn_epochs;
  std::optional<std::string> trn_slope;
  std::optional<std::uint64_t> trn_seed;
  std::string trn_data, trn_priors, trn_out, trn_history;
  trn->add_option("--data", trn_data, "Dataset; training uses its training split");
  trn->add_option("--priors", trn_priors, "Prior table");
  trn->add_option("--layers", trn_layers, "Stacked message-passing layers (1..)");
  trn->add_option("--slope", trn_slope, "off | paper | continuous");
  trn->add_option("--epochs", trn_epochs, "Epochs");
  trn->add_option("--seed", trn_seed, "Seed for initialization and shuffling");
  trn->add_option("--out", trn_out, "Output model path");
  trn->add_option("--history", trn_history, "History CSV path (default <out>.history.csv)");

  auto* evl = app.add_subcommand("eval", "Evaluate on the test split");
  session.add_common(evl);
  std::string evl_data, evl_model, evl_priors, evl_k, evl_report, evl_split, evl_label;
  bool evl_oracle = false, evl_merge = false;
  evl->add_option("--data", evl_data, "Dataset; evaluation uses its test split");
  evl->add_option("--model", evl_model, "Model file");
  evl->add_option("--priors", evl_priors, "Prior table");
  evl->add_option("--k", evl_k, "Comma-separated K values, e.g. 15,25");
  evl->add_option("--report", evl_report, "Report text path; CSV/JSON/predictions go beside it");
  evl->add_option("--split", evl_split, "test | all");
  evl->add_option("--label", evl_label, "Row label in the report");
  evl->add_flag("--oracle", evl_oracle, "Score the ground truth itself");
  evl->add_flag("--merge-behind", evl_merge, "Merge the three behind relations in the confusion");

  auto* gck = app.add_subcommand("gradcheck", "Finite-difference check of the full loss");
  session.add_common(gck);
  std::optional<int> gck_layers, gck_hidden;
  std::optional<std::uint64_t> gck_seed;
  double gck_tol = 1e-4;
  gck->add_option("--layers", gck_layers, "Stacked layers");
  gck->add_option("--seed", gck_seed, "Scene and initialization seed");
  gck->add_option("--hidden", gck_hidden, "Hidden width");
  gck->add_option("--tol", gck_tol, "Maximum allowed relative error");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen(session, gen_seed, gen_scenes, gen_duration, gen_hz, gen_jitter, gen_no_noise,
                     gen_out, out);
    }
    if (pri->parsed()) return cmd_priors(session, pri_alpha, pri_train, pri_out, out);
    if (trn->parsed()) {
      return cmd_train(session, trn_layers, trn_slope, trn_epochs, trn_seed, trn_data, trn_priors,
                       trn_out, trn_history, out);
    }
    if (evl->parsed()) {
      return cmd_eval(session, evl_data, evl_model, evl_priors, evl_k, evl_report, evl_split,
                      evl_oracle, evl_merge, evl_label, out);
    }
    if (gck->parsed()) return cmd_gradcheck(session, gck_layers, gck_seed, gck_hidden, gck_tol, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kUsage;
}

}  // namespace rsg::cli
