#include "rsg/dataset.hpp"

#include <cmath>

namespace rsg {

std::size_t Dataset::frame_count() const {
  std::size_t n = 0;
  for (const auto& s : scenes) n += s.frames.size();
  return n;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test_fraction must lie in (0, 1)");
  }
  if (d.scenes.empty()) throw ValidationError("empty dataset");
  const auto n = d.scenes.size();
  // guard against 0.1 * 500 evaluating to 50.000000000000007
  auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n) - 1e-9));
  n_test = std::min(std::max<std::size_t>(n_test, 1), n);

  Dataset train, test;
  train.meta = d.meta;
  test.meta = d.meta;
  train.meta.name = d.meta.name + "/train";
  test.meta.name = d.meta.name + "/test";
  train.scenes.assign(d.scenes.begin(), d.scenes.end() - static_cast<std::ptrdiff_t>(n_test));
  test.scenes.assign(d.scenes.end() - static_cast<std::ptrdiff_t>(n_test), d.scenes.end());
  train.meta.counts["scenes"] = static_cast<std::int64_t>(train.scenes.size());
  test.meta.counts["scenes"] = static_cast<std::int64_t>(test.scenes.size());
  return {std::move(train), std::move(test)};
}

std::map<PairKey, RelationshipType> labeled_pairs(const Scene& s, const SceneGraph& frame) {
  const auto mapping = group_map(frame);
  auto root = [&](int id) {
    for (const auto& [m, r] : mapping) {
      if (m == id) return r;
    }
    return id;
  };
  std::map<PairKey, RelationshipType> out;
  const auto x = static_cast<double>(frame.frame_index);
  for (const auto& iv : s.intervals) {
    if (!iv.labels_frame(x)) continue;
    if (frame.find(iv.subject_id) == nullptr || frame.find(iv.object_id) == nullptr) continue;
    const int si = root(iv.subject_id);
    const int oi = root(iv.object_id);
    if (si == oi) continue;
    out.emplace(pair_key(si, oi), iv.rel);
  }
  return out;
}

}  // namespace rsg
