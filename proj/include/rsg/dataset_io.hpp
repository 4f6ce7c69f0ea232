#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rsg/metrics.hpp"
#include "rsg/priors.hpp"
#include "rsg/rsg_net.hpp"

namespace rsg {

/// Version written into every file; readers reject anything else.
inline constexpr std::string_view kSchemaVersion = "1";

// Datasets (.rsgd): a header line, then one scene per line.

void write_dataset(std::ostream& out, const Dataset& d);
/// `source` names the stream in error messages.
Dataset read_dataset(std::istream& in, const std::string& source = "<stream>");
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Prior tables (.rsgp). Probabilities are written for readers in other
// languages; loading recomputes them from the stored counts and alpha.

void write_priors(std::ostream& out, const PriorTable& pt);
PriorTable read_priors(std::istream& in, const std::string& source = "<stream>");
void save_priors(const PriorTable& pt, const std::filesystem::path& path);
PriorTable load_priors(const std::filesystem::path& path);

// Model parameters (.rsgm): config plus named row-major arrays with shapes.
// Free-form string annotations (e.g. how the model was trained) ride along.

using Annotations = std::map<std::string, std::string>;

void write_model(std::ostream& out, const ModelParameters& p, const Annotations& notes = {});
ModelParameters read_model(std::istream& in, const std::string& source = "<stream>",
                           Annotations* notes = nullptr);
void save_model(const ModelParameters& p, const std::filesystem::path& path,
                const Annotations& notes = {});
ModelParameters load_model(const std::filesystem::path& path, Annotations* notes = nullptr);

// Prediction dumps (.rsgj): a header line, then one frame per line.

struct PredictionRecord {
  std::string scene_id;
  int frame_index = 0;
  std::size_t candidate_pairs = 0;
  std::vector<ScoredEdge> ranked;
  std::vector<RelationshipEdge> argmax;

  bool operator==(const PredictionRecord&) const = default;
};

void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& recs);
std::vector<PredictionRecord> read_predictions(std::istream& in,
                                               const std::string& source = "<stream>");
void save_predictions(const std::vector<PredictionRecord>& recs,
                      const std::filesystem::path& path);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

// Reports.

/// Table-style text: R@K columns, pairwise accuracy, degree statistics and
/// per-class accuracy.
std::string format_report(const EvalReport& r);
/// Header row of labels, then one row per ground-truth label. `rates` picks
/// the row-normalized matrix instead of raw counts.
std::string confusion_csv(const ConfusionMatrix& cm, bool rates = true);

/// Writes text to a file, throwing IoError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace rsg
