#include "rsg/dataset_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rsg/errors.hpp"

namespace rsg {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kDatasetKind = "rsg_dataset";
constexpr std::string_view kPriorsKind = "rsg_priors";
constexpr std::string_view kModelKind = "rsg_model";
constexpr std::string_view kPredictionsKind = "rsg_predictions";

json header(std::string_view kind) {
  return json{{"schema_version", kSchemaVersion}, {"kind", kind}};
}

void check_header(const json& j, std::string_view kind, const std::string& source) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw IoError(source + ": missing schema_version");
  }
  const auto& v = j.at("schema_version");
  const std::string version = v.is_string() ? v.get<std::string>() : v.dump();
  if (version != kSchemaVersion) {
    throw IoError(source + ": unsupported schema_version " + version + " (this build reads " +
                  std::string(kSchemaVersion) + ")");
  }
  if (!j.contains("kind") || j.at("kind") != kind) {
    throw IoError(source + ": expected kind " + std::string(kind));
  }
}

json parse_line(const std::string& line, const std::string& source, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw IoError(source + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

json parse_whole(std::istream& in, const std::string& source) {
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(source + ": " + e.what());
  }
}

template <typename F>
auto guarded(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw IoError(where + ": " + e.what());
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

template <typename W>
void save_with(const std::filesystem::path& path, W&& write) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write(out);
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

// --- scenes ----------------------------------------------------------------

json node_json(const ObjectNode& n) {
  json j{{"id", n.id},   {"class", to_string(n.cls)}, {"x", n.x},     {"y", n.y},
         {"vx", n.vx},   {"vy", n.vy},               {"ax", n.ax},   {"ay", n.ay},
         {"yaw", n.yaw}, {"pitch", n.pitch},         {"roll", n.roll}};
  if (n.group_id) j["group_id"] = *n.group_id;
  return j;
}

ObjectNode node_from(const json& j) {
  ObjectNode n;
  n.id = j.at("id").get<int>();
  n.cls = parse_object_class(j.at("class").get<std::string>());
  n.x = j.at("x").get<double>();
  n.y = j.at("y").get<double>();
  n.vx = j.at("vx").get<double>();
  n.vy = j.at("vy").get<double>();
  n.ax = j.at("ax").get<double>();
  n.ay = j.at("ay").get<double>();
  n.yaw = j.at("yaw").get<double>();
  n.pitch = j.at("pitch").get<double>();
  n.roll = j.at("roll").get<double>();
  if (j.contains("group_id") && !j.at("group_id").is_null()) n.group_id = j.at("group_id").get<int>();
  return n;
}

json edge_json(const RelationshipEdge& e) {
  return {{"subject_id", e.subject_id},
          {"object_id", e.object_id},
          {"relationship", to_string(e.rel)},
          {"confidence", e.confidence}};
}

RelationshipEdge edge_from(const json& j) {
  RelationshipEdge e;
  e.subject_id = j.at("subject_id").get<int>();
  e.object_id = j.at("object_id").get<int>();
  e.rel = parse_relationship(j.at("relationship").get<std::string>());
  e.confidence = j.at("confidence").get<double>();
  return e;
}

json scene_json(const Scene& s) {
  json frames = json::array();
  for (const auto& f : s.frames) {
    json nodes = json::array(), edges = json::array();
    for (const auto& n : f.nodes) nodes.push_back(node_json(n));
    for (const auto& e : f.edges) edges.push_back(edge_json(e));
    frames.push_back({{"frame_index", f.frame_index},
                      {"timestamp_s", f.timestamp_s},
                      {"nodes", std::move(nodes)},
                      {"edges", std::move(edges)}});
  }
  json intervals = json::array();
  for (const auto& iv : s.intervals) {
    intervals.push_back({{"subject_id", iv.subject_id},
                         {"object_id", iv.object_id},
                         {"relationship", to_string(iv.rel)},
                         {"a", iv.a},
                         {"b", iv.b},
                         {"c", iv.c},
                         {"d", iv.d}});
  }
  return {{"scene_id", s.scene_id}, {"frames", std::move(frames)}, {"intervals", std::move(intervals)}};
}

Scene scene_from(const json& j) {
  Scene s;
  s.scene_id = j.at("scene_id").get<std::string>();
  for (const auto& fj : j.at("frames")) {
    SceneGraph g;
    g.frame_index = fj.at("frame_index").get<int>();
    g.timestamp_s = fj.at("timestamp_s").get<double>();
    for (const auto& nj : fj.at("nodes")) g.nodes.push_back(node_from(nj));
    for (const auto& ej : fj.at("edges")) g.edges.push_back(edge_from(ej));
    s.frames.push_back(std::move(g));
  }
  for (const auto& ij : j.at("intervals")) {
    RelationshipInterval iv;
    iv.subject_id = ij.at("subject_id").get<int>();
    iv.object_id = ij.at("object_id").get<int>();
    iv.rel = parse_relationship(ij.at("relationship").get<std::string>());
    iv.a = ij.at("a").get<double>();
    iv.b = ij.at("b").get<double>();
    iv.c = ij.at("c").get<double>();
    iv.d = ij.at("d").get<double>();
    s.intervals.push_back(iv);
  }
  return s;
}

// --- models ----------------------------------------------------------------

json array_json(const ad::Parameter& p) {
  json data = json::array();
  for (ad::Index r = 0; r < p.value.rows(); ++r) {
    for (ad::Index c = 0; c < p.value.cols(); ++c) data.push_back(p.value(r, c));
  }
  return {{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"data", std::move(data)}};
}

json scored_json(const ScoredEdge& e) {
  return {{"subject_id", e.subject_id},
          {"object_id", e.object_id},
          {"relationship", to_string(e.rel)},
          {"confidence", e.confidence}};
}

ScoredEdge scored_from(const json& j) {
  return {j.at("subject_id").get<int>(), j.at("object_id").get<int>(),
          parse_relationship(j.at("relationship").get<std::string>()),
          j.at("confidence").get<double>()};
}

std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& d) {
  json h = header(kDatasetKind);
  h["meta"] = {{"name", d.meta.name},
               {"generator_seed", d.meta.generator_seed},
               {"counts", json(d.meta.counts)}};
  out << h.dump() << '\n';
  for (const auto& s : d.scenes) out << scene_json(s).dump() << '\n';
}

Dataset read_dataset(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  Dataset d;
  bool have_header = false;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, source, lineno);
    const std::string where = source + ":" + std::to_string(lineno);
    if (!have_header) {
      check_header(j, kDatasetKind, source);
      guarded(where, [&] {
        const auto& m = j.at("meta");
        d.meta.name = m.at("name").get<std::string>();
        d.meta.generator_seed = m.at("generator_seed").get<std::uint64_t>();
        d.meta.counts = m.at("counts").get<std::map<std::string, std::int64_t>>();
        return 0;
      });
      have_header = true;
      continue;
    }
    Scene s = guarded(where, [&] { return scene_from(j); });
    if (!ids.insert(s.scene_id).second) {
      throw ValidationError(where + ": duplicate scene_id " + s.scene_id);
    }
    const auto violations = validate_scene(s);
    if (!violations.empty()) {
      std::string msg = "scene " + s.scene_id + " is invalid:";
      for (const auto& v : violations) msg += "\n  " + describe(v);
      throw ValidationError(msg);
    }
    d.scenes.push_back(std::move(s));
  }
  if (!have_header) throw IoError(source + ": empty file");
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  save_with(path, [&](std::ostream& out) { write_dataset(out, d); });
}

Dataset load_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset(in, path.string());
}

void write_priors(std::ostream& out, const PriorTable& pt) {
  json h = header(kPriorsKind);
  h["alpha"] = pt.smoothing_alpha();
  json classes = json::array(), rels = json::array();
  for (std::size_t c = 0; c < kNumClasses; ++c) classes.push_back(to_string(class_from_index(static_cast<int>(c))));
  for (std::size_t r = 0; r < kNumRelationships; ++r) {
    rels.push_back(to_string(relation_from_index(static_cast<int>(r))));
  }
  h["classes"] = classes;
  h["relationships"] = rels;
  json rows = json::array();
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      const auto ci = class_from_index(static_cast<int>(i));
      const auto cj = class_from_index(static_cast<int>(j));
      rows.push_back({{"lo_class", to_string(ci)},
                      {"hi_class", to_string(cj)},
                      {"counts", pt.counts(ci, cj)},
                      {"probs", pt.prior_vector(ci, cj)}});
    }
  }
  h["rows"] = std::move(rows);
  out << h.dump(1) << '\n';
}

PriorTable read_priors(std::istream& in, const std::string& source) {
  const json j = parse_whole(in, source);
  check_header(j, kPriorsKind, source);
  return guarded(source, [&] {
    PriorTable::CountGrid grid{};
    std::set<std::pair<int, int>> seen;
    for (const auto& row : j.at("rows")) {
      const int i = index_of(parse_object_class(row.at("lo_class").get<std::string>()));
      const int k = index_of(parse_object_class(row.at("hi_class").get<std::string>()));
      const auto counts = row.at("counts").get<std::vector<std::int64_t>>();
      if (counts.size() != kNumRelationships) throw IoError(source + ": counts row has wrong length");
      for (std::size_t r = 0; r < kNumRelationships; ++r) {
        if (counts[r] < 0) throw ValidationError(source + ": negative count");
        grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)][r] = counts[r];
      }
      seen.insert({i, k});
    }
    if (seen.size() != kNumClasses * kNumClasses) throw IoError(source + ": missing class-pair rows");
    return PriorTable::from_counts(grid, j.at("alpha").get<double>());
  });
}

void save_priors(const PriorTable& pt, const std::filesystem::path& path) {
  save_with(path, [&](std::ostream& out) { write_priors(out, pt); });
}

PriorTable load_priors(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_priors(in, path.string());
}

void write_model(std::ostream& out, const ModelParameters& p, const Annotations& notes) {
  json h = header(kModelKind);
  h["config"] = {{"hidden_dim", p.config.hidden_dim},
                 {"num_layers", p.config.num_layers},
                 {"init_scale", p.config.init_scale},
                 {"seed", p.config.seed},
                 {"node_feature_dim", kNodeFeatDim},
                 {"edge_feature_dim", kEdgeFeatDim},
                 {"num_classes", kNumOutputClasses}};
  json arrays = json::array();
  for (const auto* a : p.all()) arrays.push_back(array_json(*a));
  h["annotations"] = json(notes);
  h["arrays"] = std::move(arrays);
  out << h.dump() << '\n';
}

ModelParameters read_model(std::istream& in, const std::string& source, Annotations* notes) {
  const json j = parse_whole(in, source);
  check_header(j, kModelKind, source);
  return guarded(source, [&] {
    const auto& c = j.at("config");
    ModelConfig cfg;
    cfg.hidden_dim = c.at("hidden_dim").get<int>();
    cfg.num_layers = c.at("num_layers").get<int>();
    cfg.init_scale = c.at("init_scale").get<double>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.validate();
    if (notes != nullptr) {
      *notes = j.contains("annotations") ? j.at("annotations").get<Annotations>() : Annotations{};
    }
    if (c.value("node_feature_dim", kNodeFeatDim) != kNodeFeatDim ||
        c.value("edge_feature_dim", kEdgeFeatDim) != kEdgeFeatDim ||
        c.value("num_classes", kNumOutputClasses) != kNumOutputClasses) {
      throw ValidationError(source + ": model feature/class dimensions do not match this build");
    }
    // Shapes come from a freshly initialized model; values from the file.
    ModelParameters p = init_parameters(cfg);
    const auto& arrays = j.at("arrays");
    auto slots = p.all();
    if (arrays.size() != slots.size()) {
      throw ValidationError(source + ": expected " + std::to_string(slots.size()) + " arrays, found " +
                            std::to_string(arrays.size()));
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& a = arrays[i];
      auto& slot = *slots[i];
      const auto name = a.at("name").get<std::string>();
      const auto shape = a.at("shape").get<std::vector<ad::Index>>();
      if (name != slot.name) throw ValidationError(source + ": array " + name + " out of place, expected " + slot.name);
      if (shape.size() != 2 || shape[0] != slot.value.rows() || shape[1] != slot.value.cols()) {
        throw ValidationError(source + ": array " + name + " has shape mismatching the config");
      }
      const auto data = a.at("data").get<std::vector<double>>();
      if (data.size() != static_cast<std::size_t>(shape[0] * shape[1])) {
        throw IoError(source + ": array " + name + " data length does not match its shape");
      }
      std::size_t k = 0;
      for (ad::Index r = 0; r < shape[0]; ++r) {
        for (ad::Index col = 0; col < shape[1]; ++col) {
          const double v = data[k++];
          if (!std::isfinite(v)) throw ValidationError(source + ": non-finite value in " + name);
          slot.value(r, col) = v;
        }
      }
      slot.zero_grad();
    }
    return p;
  });
}

void save_model(const ModelParameters& p, const std::filesystem::path& path,
                const Annotations& notes) {
  save_with(path, [&](std::ostream& out) { write_model(out, p, notes); });
}

ModelParameters load_model(const std::filesystem::path& path, Annotations* notes) {
  auto in = open_in(path);
  return read_model(in, path.string(), notes);
}

void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& recs) {
  out << header(kPredictionsKind).dump() << '\n';
  for (const auto& r : recs) {
    json ranked = json::array(), argmax = json::array();
    for (const auto& e : r.ranked) ranked.push_back(scored_json(e));
    for (const auto& e : r.argmax) argmax.push_back(edge_json(e));
    json line{{"scene_id", r.scene_id},
              {"frame_index", r.frame_index},
              {"candidate_pairs", r.candidate_pairs},
              {"ranked", std::move(ranked)},
              {"argmax", std::move(argmax)}};
    out << line.dump() << '\n';
  }
}

std::vector<PredictionRecord> read_predictions(std::istream& in, const std::string& source) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, source, lineno);
    if (!have_header) {
      check_header(j, kPredictionsKind, source);
      have_header = true;
      continue;
    }
    out.push_back(guarded(source + ":" + std::to_string(lineno), [&] {
      PredictionRecord r;
      r.scene_id = j.at("scene_id").get<std::string>();
      r.frame_index = j.at("frame_index").get<int>();
      r.candidate_pairs = j.at("candidate_pairs").get<std::size_t>();
      for (const auto& e : j.at("ranked")) r.ranked.push_back(scored_from(e));
      for (const auto& e : j.at("argmax")) r.argmax.push_back(edge_from(e));
      return r;
    }));
  }
  if (!have_header) throw IoError(source + ": empty file");
  return out;
}

void save_predictions(const std::vector<PredictionRecord>& recs,
                      const std::filesystem::path& path) {
  save_with(path, [&](std::ostream& out) { write_predictions(out, recs); });
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_predictions(in, path.string());
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os << "model: " << (r.label.empty() ? "rsg_net" : r.label) << '\n';
  os << "frames: " << r.frames << "  related pairs: " << r.related_pairs << "\n\n";
  os << "| Method |";
  for (const auto& [k, _] : r.r_at) os << " R@" << k << " |";
  os << " Avg. Pairwise Accuracy |\n|---|";
  for (std::size_t i = 0; i < r.r_at.size(); ++i) os << "---|";
  os << "---|\n| " << (r.label.empty() ? "rsg_net" : r.label) << " |";
  for (const auto& [_, v] : r.r_at) os << ' ' << fixed(100.0 * v, 1) << " |";
  os << ' ' << fixed(100.0 * r.pairwise_accuracy, 1) << " |\n\n";
  os << "avg edges per frame: " << fixed(r.avg_edges_per_frame, 3) << '\n';
  os << "avg degree: gt " << fixed(r.avg_degree_gt, 2) << " vs predicted "
     << fixed(r.avg_degree_pred, 2) << "\n\n";
  os << "per-class accuracy:\n";
  for (std::size_t c = 0; c + 1 < kNumRelationships; ++c) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "  %-30s %s\n",
                  std::string(to_string(relation_from_index(static_cast<int>(c)))).c_str(),
                  fixed(r.per_class_accuracy[c]).c_str());
    os << buf;
  }
  return os.str();
}

std::string confusion_csv(const ConfusionMatrix& cm, bool rates) {
  const auto& m = rates ? cm.rates : cm.counts;
  std::ostringstream os;
  os << "ground_truth";
  for (const auto& l : cm.labels) os << ',' << l;
  os << '\n';
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    os << cm.labels[i];
    for (std::size_t j = 0; j < cm.labels.size(); ++j) {
      const double v = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      os << ',' << (rates ? fixed(v, 6) : fixed(v, 0));
    }
    os << '\n';
  }
  return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  save_with(path, [&](std::ostream& out) { out << text; });
}

}  // namespace rsg
