#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "rsg/dataset.hpp"

namespace rsg {

/// Geometric labeling thresholds. Units: meters, m/s, m/s^2, degrees, frames.
struct OracleRules {
  double lane_width = 3.5;
  double same_lane_lat = 1.5;
  double heading_tol_deg = 15.0;
  double follow_gap = 25.0;
  double follow_ratio_min = 0.8;
  double follow_ratio_max = 1.2;
  double same_lane_gap = 50.0;
  double approach_closing = 1.0;
  double approach_dist = 30.0;
  double pass_lat_min = 1.5;
  double pass_lat_max = 6.0;
  int pass_window = 3;
  double overtake_ratio = 1.2;
  double stopped_speed = 0.5;
  double human_wait_dist = 10.0;
  double human_cross_speed = 0.3;
  double human_cross_lat = 6.0;
  double vehicle_wait_dist = 15.0;
  double vehicle_cross_speed = 0.5;
  double vehicle_cross_lat = 8.0;
  double may_intersect_dist = 30.0;
  double on_lane_dist = 40.0;
  double group_dist = 4.0;
  double group_speed = 1.0;
  double group_heading_deg = 15.0;
  int group_frames = 4;
  double behind_gap = 15.0;
  double behind_lat = 2.0;
  double waiting_ts_dist = 3.0;
  double human_still_speed = 0.3;
  double stop_ts_dist = 10.0;
  double wait_ts_dist = 40.0;
  double react_ts_dist = 50.0;
  double react_decel = 0.5;
  double sign_lat = 8.0;
  double avoid_dist = 25.0;
  double avoid_lat = 3.5;
  double avoid_lat_speed = 0.3;
};

struct CountRange {
  int min = 0;
  int max = 0;
};

struct ScenarioWeights {
  double following = 6.0;
  double passing_by = 2.0;
  double crossing = 1.5;
  double group = 1.0;
  double overtaking = 1.0;
  double approaching = 1.5;
};

struct GenConfig {
  int n_scenes = 220;
  double duration_s = 20.0;
  double hz = 2.0;
  CountRange n_vehicles{1, 3};
  CountRange n_humans{0, 3};
  CountRange n_obstacles{0, 3};
  CountRange n_signs{0, 1};
  ScenarioWeights weights;
  std::uint64_t seed = 0;
  /// Objects farther than this from the ego vehicle are not observed.
  double sensor_range = 50.0;
  /// Gaussian sigma added to observed x, y (not to labels).
  double position_noise = 0.1;
  OracleRules rules;

  int frame_count() const;
  void validate() const;
};

/// Deterministic scripted episode. Frames hold noise-free ego-relative
/// kinematics; intervals are crisp (a == b, c == d) and equal
/// oracle_label(scene).
Scene generate_scene(const GenConfig& cfg, std::uint64_t scene_seed);

/// Re-derives crisp intervals from the frames with the threshold rules.
std::vector<RelationshipInterval> oracle_label(const Scene& s, const OracleRules& rules = {});

/// Per-frame relation of one unordered pair, or NoRelation. `window` supplies
/// the pair's relative longitudinal offsets (x_j - x_i) over neighboring
/// frames for the passing test. Exposed for tests.
RelationshipEdge classify_pair(const ObjectNode& ni, const ObjectNode& nj,
                               const std::vector<double>& window_dx, bool group_sustained,
                               const OracleRules& rules = {});

/// Adds zero-mean Gaussian noise to observed positions of every non-ego node.
void add_observation_noise(Scene& s, std::uint64_t seed, double sigma);

/// Widens each crisp breakpoint into a ramp of a uniformly drawn width in
/// [min_gap, max_gap] frames centered on the original boundary, clamped to
/// [lo, hi].
std::vector<RelationshipInterval> jitter_annotations(
    const std::vector<RelationshipInterval>& intervals, std::uint64_t seed, double min_gap = 3.0,
    double max_gap = 7.0, double lo = 0.0,
    double hi = std::numeric_limits<double>::infinity());

struct GenerateOptions {
  bool noise = true;
  bool jitter = false;
  double jitter_min_gap = 3.0;
  double jitter_max_gap = 7.0;
};

/// cfg.n_scenes scenes with ids scene-0000.. and per-scene seeds 0..n-1.
Dataset generate_dataset(const GenConfig& cfg, const GenerateOptions& opts = {});

}  // namespace rsg
