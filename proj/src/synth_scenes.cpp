#include "rsg/synth_scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "rng.hpp"
#include "rsg/errors.hpp"

// World frame: straight road along +x. Lane 0 (the ego lane) is centered on
// y = 0 and lane 1 on y = lane_width, both driving towards +x. The right
// shoulder sits near y = -3, sidewalks at y = -4.5 and y = 8. Observations are
// ego-relative in x only; lateral positions and velocities stay in the road
// frame, so "y" doubles as the offset from the ego lane center.

namespace rsg {

namespace {

using detail::Rng;
using R = RelationshipType;
using C = ObjectClass;

constexpr double kLane1 = 3.5;
constexpr double kShoulder = -3.0;
constexpr double kSidewalkRight = -4.5;
constexpr double kSidewalkLeft = 8.0;
constexpr double kPi = std::numbers::pi;

struct Phase {
  double t0 = 0;
  double ax = 0, ay = 0;
};

struct State {
  double x = 0, y = 0, vx = 0, vy = 0, ax = 0, ay = 0;
};

struct Actor {
  C cls = C::Vehicle;
  double x0 = 0, y0 = 0, vx0 = 0, vy0 = 0;
  double facing = 0;
  std::vector<Phase> phases;  // sorted by t0; implicit zero phase before the first

  void add(double t0, double ax, double ay) { phases.push_back({t0, ax, ay}); }

  State at(double t) const {
    State s{x0, y0, vx0, vy0, 0, 0};
    double cur = 0, ax = 0, ay = 0;
    auto advance = [&](double until) {
      const double dt = until - cur;
      if (dt <= 0) return;
      s.x += s.vx * dt + 0.5 * ax * dt * dt;
      s.y += s.vy * dt + 0.5 * ay * dt * dt;
      s.vx += ax * dt;
      s.vy += ay * dt;
      if (std::abs(s.vx) < 1e-9) s.vx = 0;
      if (std::abs(s.vy) < 1e-9) s.vy = 0;
      cur = until;
    };
    for (const auto& p : phases) {
      if (p.t0 > t) break;
      advance(p.t0);
      ax = p.ax;
      ay = p.ay;
    }
    advance(t);
    s.ax = ax;
    s.ay = ay;
    return s;
  }
};

double speed(const ObjectNode& n) { return std::hypot(n.vx, n.vy); }

double heading_gap_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2 * kPi);
  if (d > kPi) d = 2 * kPi - d;
  return d * 180.0 / kPi;
}

bool in_travel_lane(double y, const OracleRules& r) {
  return y > -r.lane_width / 2 && y < 1.5 * r.lane_width;
}

bool window_crosses(const std::vector<double>& w) {
  if (w.empty()) return false;
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  return *lo < 0 && *hi >= 0;
}

bool is_group(R r) { return r == R::HumanGroup || r == R::VehicleGroup || r == R::ObstacleGroup; }

RelationshipEdge edge(const ObjectNode& s, const ObjectNode& o, R r) {
  return {s.id, o.id, r, 1.0};
}

RelationshipEdge none(const ObjectNode& a, const ObjectNode& b) {
  return {a.id, b.id, R::NoRelation, 1.0};
}

bool group_condition(const ObjectNode& a, const ObjectNode& b, const OracleRules& r) {
  if (a.cls != b.cls || a.id == kEgoId || b.id == kEgoId) return false;
  if (a.cls == C::TrafficSign) return false;
  if (std::hypot(a.x - b.x, a.y - b.y) >= r.group_dist) return false;
  if (std::abs(speed(a) - speed(b)) >= r.group_speed) return false;
  return heading_gap_deg(a.yaw, b.yaw) < r.group_heading_deg;
}

RelationshipEdge classify_vv(const ObjectNode& a, const ObjectNode& b,
                             const std::vector<double>& window_dx, bool group,
                             const OracleRules& r) {
  if (group && a.id != kEgoId && b.id != kEgoId) return edge(a, b, R::VehicleGroup);

  for (const auto* pr : {&a, &b}) {
    const auto& s = *pr;
    const auto& o = pr == &a ? b : a;
    if (speed(s) < r.stopped_speed && in_travel_lane(s.y, r) && o.x - s.x > 0 &&
        o.x - s.x <= r.vehicle_wait_dist && std::abs(o.vy) > r.vehicle_cross_speed &&
        std::abs(o.y - s.y) < r.vehicle_cross_lat) {
      return edge(s, o, R::VehicleWaitingForCrossing);
    }
  }

  const double dy = std::abs(a.y - b.y);
  const double sa = speed(a), sb = speed(b);
  if (dy >= r.pass_lat_min && dy < r.pass_lat_max && window_crosses(window_dx)) {
    const bool a_faster = sa >= sb;
    const auto& fast = a_faster ? a : b;
    const auto& slow = a_faster ? b : a;
    const double fs = std::max(sa, sb), ss = std::min(sa, sb);
    if (ss >= r.stopped_speed && fs / ss >= r.overtake_ratio) {
      return edge(fast, slow, R::Overtaking);
    }
    if (fs >= r.stopped_speed) return edge(fast, slow, R::VehiclePassingBy);
  }

  if (std::max(sa, sb) < r.stopped_speed) return none(a, b);
  const bool a_rear = a.x < b.x || (a.x == b.x && a.id < b.id);
  const auto& rear = a_rear ? a : b;
  const auto& front = a_rear ? b : a;
  const double gap = front.x - rear.x;
  const bool same_lane =
      dy < r.same_lane_lat && heading_gap_deg(a.yaw, b.yaw) < r.heading_tol_deg;
  if (same_lane && gap > 0 && gap <= r.follow_gap && front.vx >= r.stopped_speed) {
    const double ratio = rear.vx / front.vx;
    if (ratio >= r.follow_ratio_min && ratio <= r.follow_ratio_max) {
      return edge(rear, front, R::Following);
    }
  }
  const double dist = std::hypot(gap, a.y - b.y);
  if (rear.vx - front.vx > r.approach_closing && dist < r.approach_dist) {
    return edge(rear, front, R::Approaching);
  }
  if (same_lane && gap <= r.same_lane_gap) return edge(rear, front, R::SameLane);
  return none(a, b);
}

RelationshipEdge classify_hv(const ObjectNode& h, const ObjectNode& v, const OracleRules& r) {
  const double ahead = h.x - v.x;
  const double dy = std::abs(h.y - v.y);
  const bool lane = in_travel_lane(v.y, r);
  const bool crossing = std::abs(h.vy) > r.human_cross_speed;
  const double sv = speed(v);
  if (sv < r.stopped_speed && lane && ahead > 0 && ahead <= r.human_wait_dist && crossing &&
      dy < r.human_cross_lat) {
    return edge(h, v, R::HumanWaitingForCrossing);
  }
  if (sv >= r.stopped_speed && lane && ahead > 0 && ahead <= r.may_intersect_dist && crossing &&
      (dy < r.lane_width / 2 || (v.y - h.y) * h.vy > 0)) {
    return edge(h, v, R::HumanMayIntersect);
  }
  if (lane && dy < r.lane_width / 2 && !crossing && std::abs(ahead) <= r.on_lane_dist) {
    return edge(h, v, R::HumanOnLane);
  }
  if (-ahead > 0 && -ahead <= r.behind_gap && dy < r.behind_lat) {
    return edge(h, v, R::HumanBehindVehicle);
  }
  return none(h, v);
}

RelationshipEdge behind(const ObjectNode& s, const ObjectNode& o, R rel, const OracleRules& r) {
  const double gap = o.x - s.x;
  if (gap > 0 && gap <= r.behind_gap && std::abs(o.y - s.y) < r.behind_lat) return edge(s, o, rel);
  return none(s, o);
}

RelationshipEdge classify_vo(const ObjectNode& v, const ObjectNode& o,
                             const std::vector<double>& window_dx, const OracleRules& r) {
  const double ahead = o.x - v.x;
  const double dy = std::abs(o.y - v.y);
  if (std::abs(v.vy) > r.avoid_lat_speed && ahead > 0 && ahead <= r.avoid_dist &&
      dy < r.avoid_lat) {
    return edge(v, o, R::VehicleAvoiding);
  }
  if (speed(v) >= r.stopped_speed && dy >= r.pass_lat_min && dy < r.pass_lat_max &&
      window_crosses(window_dx)) {
    return edge(v, o, R::VehiclePassingByObstacle);
  }
  return none(v, o);
}

RelationshipEdge classify_vt(const ObjectNode& v, const ObjectNode& t, const OracleRules& r) {
  if (!in_travel_lane(v.y, r) || std::abs(t.y - v.y) >= r.sign_lat) return none(v, t);
  const double ahead = t.x - v.x;
  if (speed(v) < r.stopped_speed) {
    if (ahead > 0 && ahead <= r.stop_ts_dist) return edge(v, t, R::StopByTs);
    if (ahead > r.stop_ts_dist && ahead <= r.wait_ts_dist) return edge(v, t, R::WaitingForTs);
    return none(v, t);
  }
  if (v.ax < -r.react_decel && ahead > 0 && ahead <= r.react_ts_dist) {
    return edge(v, t, R::ReactByTs);
  }
  return none(v, t);
}

// --- scripted episodes -----------------------------------------------------

enum class Scenario { Following, PassingBy, Crossing, Group, Overtaking, Approaching };

struct Budget {
  int vehicles = 0, humans = 0, obstacles = 0, signs = 0;
};

bool feasible(Scenario s, const Budget& b) {
  switch (s) {
    case Scenario::Following:
    case Scenario::PassingBy:
    case Scenario::Overtaking:
      return b.vehicles >= 1;
    case Scenario::Crossing:
      return b.signs >= 1 && (b.humans >= 1 || b.vehicles >= 1);
    case Scenario::Group:
      return b.humans >= 2 || b.obstacles >= 2 || b.vehicles >= 2;
    case Scenario::Approaching:
      return b.vehicles >= 1 && b.obstacles >= 1;
  }
  return false;
}

double weight_of(Scenario s, const ScenarioWeights& w) {
  switch (s) {
    case Scenario::Following: return w.following;
    case Scenario::PassingBy: return w.passing_by;
    case Scenario::Crossing: return w.crossing;
    case Scenario::Group: return w.group;
    case Scenario::Overtaking: return w.overtaking;
    case Scenario::Approaching: return w.approaching;
  }
  return 0;
}

constexpr Scenario kScenarios[] = {Scenario::Following, Scenario::PassingBy,
                                   Scenario::Crossing,  Scenario::Group,
                                   Scenario::Overtaking, Scenario::Approaching};

class Builder {
 public:
  Builder(const GenConfig& cfg, Rng& rng, Budget budget)
      : cfg_(cfg), rng_(rng), budget_(budget), T_(cfg.duration_s) {
    v_ego_ = rng_.uniform(8.0, 12.0);
    ego_.cls = C::Vehicle;
    ego_.vx0 = v_ego_;
  }

  void run() {
    std::vector<Scenario> plan;
    const int want = 1 + (rng_.coin(0.6) ? 1 : 0) + (rng_.coin(0.25) ? 1 : 0);
    std::set<Scenario> used;
    for (int k = 0; k < want; ++k) {
      Budget left = budget_;
      for (auto s : plan) consume_min(s, left);
      std::vector<Scenario> options;
      std::vector<double> weights;
      for (auto s : kScenarios) {
        if (used.count(s) != 0 || weight_of(s, cfg_.weights) <= 0 || !feasible(s, left)) continue;
        if ((s == Scenario::Crossing && used.count(Scenario::Following) != 0) ||
            (s == Scenario::Following && used.count(Scenario::Crossing) != 0)) {
          continue;
        }
        options.push_back(s);
        weights.push_back(weight_of(s, cfg_.weights));
      }
      if (options.empty()) break;
      double u = rng_.uniform() * std::accumulate(weights.begin(), weights.end(), 0.0);
      std::size_t pick = 0;
      while (pick + 1 < options.size() && u >= weights[pick]) u -= weights[pick++];
      plan.push_back(options[pick]);
      used.insert(options[pick]);
    }
    // The crossing script changes the ego's speed profile, which the other
    // scripts read back, so it goes first.
    std::stable_partition(plan.begin(), plan.end(),
                          [](Scenario s) { return s == Scenario::Crossing; });
    for (auto s : plan) {
      switch (s) {
        case Scenario::Following: following(); break;
        case Scenario::PassingBy: passing_by(); break;
        case Scenario::Crossing: crossing(); break;
        case Scenario::Group: group(); break;
        case Scenario::Overtaking: overtaking(); break;
        case Scenario::Approaching: approaching(); break;
      }
    }
    background();
  }

  const Actor& ego() const { return ego_; }
  const std::vector<Actor>& actors() const { return actors_; }

 private:
  static void consume_min(Scenario s, Budget& b) {
    switch (s) {
      case Scenario::Following:
      case Scenario::PassingBy:
      case Scenario::Overtaking:
        --b.vehicles;
        break;
      case Scenario::Crossing:
        --b.signs;
        if (b.humans >= 1) --b.humans; else --b.vehicles;
        break;
      case Scenario::Group:
        if (b.humans >= 2) b.humans -= 2;
        else if (b.obstacles >= 2) b.obstacles -= 2;
        else b.vehicles -= 2;
        break;
      case Scenario::Approaching:
        --b.vehicles;
        --b.obstacles;
        break;
    }
  }

  Actor& spawn(C cls, double x, double y, double vx, double vy = 0, double facing = 0) {
    Actor a;
    a.cls = cls;
    a.x0 = x;
    a.y0 = y;
    a.vx0 = vx;
    a.vy0 = vy;
    a.facing = facing;
    switch (cls) {
      case C::Vehicle: --budget_.vehicles; break;
      case C::Human: --budget_.humans; break;
      case C::Obstacle: --budget_.obstacles; break;
      case C::TrafficSign: --budget_.signs; break;
    }
    actors_.push_back(a);
    return actors_.back();
  }

  double ego_x(double t) const { return ego_.at(t).x; }

  void crossing() {
    const double tb = rng_.uniform(2.0, 5.0);
    const double decel = rng_.uniform(1.5, 2.5);
    const double tau = v_ego_ / decel;
    const double x_stop = v_ego_ * tb + v_ego_ * v_ego_ / (2 * decel);
    const double x_sign = x_stop + rng_.uniform(4.0, 8.0);
    double t_go = 0;

    if (budget_.humans >= 1) {
      const double xh = x_sign + rng_.uniform(0.5, 2.0);
      auto& h = spawn(C::Human, xh, kSidewalkRight, 0, 0, kPi / 2);
      const double t_cross = tb + tau + rng_.uniform(1.0, 3.0);
      const double walk = 1.4;
      h.add(t_cross, 0, 2.8);
      h.add(t_cross + 0.5, 0, 0);
      const double cruise = (kSidewalkLeft - kSidewalkRight - 0.7) / walk;
      h.add(t_cross + 0.5 + cruise, 0, -2.8);
      h.add(t_cross + 1.0 + cruise, 0, 0);
      t_go = t_cross + 0.5 + (kLane1 * 0.5 + 1.0 - kSidewalkRight - 0.35) / walk +
             rng_.uniform(0.0, 1.0);
    } else {
      const double xc = x_sign + rng_.uniform(4.0, 8.0);
      auto& c = spawn(C::Vehicle, xc, -10.0, 0, 0, kPi / 2);
      const double t_c = tb + tau + rng_.uniform(0.5, 2.0);
      c.add(t_c, 0, 2.0);
      c.add(t_c + 1.5, 0, 0);
      t_go = t_c + 1.5 + (kLane1 * 0.5 + 2.0 + 10.0 - 2.25) / 3.0 + rng_.uniform(0.0, 1.0);
    }
    spawn(C::TrafficSign, x_sign, -3.5 + rng_.uniform(-0.3, 0.3), 0);

    ego_.add(tb, -decel, 0);
    ego_.add(tb + tau, 0, 0);
    ego_.add(t_go, 1.5, 0);
    ego_.add(t_go + v_ego_ / 1.5, 0, 0);
    ego_stops_ = true;

    if (budget_.vehicles >= 1 && rng_.coin(0.6)) {
      const double x0 = -rng_.uniform(12.0, 18.0);
      const double gap = rng_.uniform(7.0, 10.0);
      const double room = x_stop - gap - x0 - v_ego_ * tb;
      const double a_f = v_ego_ * v_ego_ / (2 * room);
      auto& f = spawn(C::Vehicle, x0, rng_.uniform(-0.2, 0.2), v_ego_);
      f.add(tb, -a_f, 0);
      f.add(tb + v_ego_ / a_f, 0, 0);
      const double t_f = std::max(t_go, tb + v_ego_ / a_f) + rng_.uniform(1.0, 2.0);
      f.add(t_f, 1.5, 0);
      f.add(t_f + v_ego_ / 1.5, 0, 0);
    }
    if (budget_.obstacles >= 1 && rng_.coin(0.5)) {
      spawn(C::Obstacle, x_sign - rng_.uniform(3.0, 12.0), kShoulder + rng_.uniform(-0.5, 0.5), 0);
    }
  }

  void following() {
    if (rng_.coin(0.3)) {
      // Lead brakes briefly and recovers.
      const double dv = rng_.uniform(0.0, 0.8);
      auto& lead = spawn(C::Vehicle, rng_.uniform(12.0, 24.0), rng_.uniform(-0.3, 0.3),
                         v_ego_ + dv);
      const double t1 = rng_.uniform(4.0, 12.0);
      const double a = rng_.uniform(1.0, 1.5);
      const double dur = rng_.uniform(1.5, 2.0);
      lead.add(t1, -a, 0);
      lead.add(t1 + dur, a, 0);
      lead.add(t1 + 2 * dur, 0, 0);
    } else {
      const double dv = rng_.uniform(-0.6, 1.0);
      const double gap0 = rng_.uniform(std::max(8.0, 6.0 - T_ * dv), 24.0);
      spawn(C::Vehicle, gap0, rng_.uniform(-0.3, 0.3), v_ego_ + dv);
    }
    if (budget_.vehicles >= 1 && !ego_stops_ && rng_.coin(0.5)) {
      const double x0 = -rng_.uniform(8.0, 20.0);
      const double max_dv = (-x0 - 6.0) / T_;
      const double dv = rng_.uniform(-0.6, std::max(-0.6, std::min(0.6, max_dv)));
      spawn(C::Vehicle, x0, rng_.uniform(-0.3, 0.3), v_ego_ + dv);
    }
  }

  void passing_by() {
    const double t_c = rng_.uniform(5.0, 15.0);
    const double y = kLane1 + rng_.uniform(-0.3, 0.3);
    if (rng_.coin(0.5)) {
      const double dv = rng_.uniform(1.0, 0.18 * v_ego_);
      spawn(C::Vehicle, ego_x(t_c) - (v_ego_ + dv) * t_c, y, v_ego_ + dv);
    } else {
      const double dv = rng_.uniform(0.8, v_ego_ / 6.5);
      spawn(C::Vehicle, ego_x(t_c) - (v_ego_ - dv) * t_c, y, v_ego_ - dv);
    }
  }

  void overtaking() {
    const double t_c = rng_.uniform(5.0, 14.0);
    const double y = kLane1 + rng_.uniform(-0.3, 0.3);
    const double v = rng_.coin(0.5) ? v_ego_ * rng_.uniform(1.3, 1.6)
                                    : v_ego_ * rng_.uniform(0.4, 0.7);
    spawn(C::Vehicle, ego_x(t_c) - v * t_c, y, v);
  }

  void approaching() {
    const double xw = rng_.uniform(70.0, 110.0);
    const int cones = std::min(budget_.obstacles, rng_.integer(1, 3));
    double last = xw;
    for (int i = 0; i < cones; ++i) {
      last = xw + i * rng_.uniform(2.0, 3.0);
      spawn(C::Obstacle, last, kLane1 + rng_.uniform(-0.3, 0.3), 0);
    }
    if (budget_.humans >= 1 && rng_.coin(0.7)) {
      spawn(C::Human, xw - rng_.uniform(3.0, 8.0), kLane1 + rng_.uniform(-0.4, 0.4), 0);
    }
    const double va = rng_.uniform(5.0, std::max(5.0, v_ego_ - 1.5));
    const double x0 = rng_.uniform(15.0, 30.0);
    auto& a = spawn(C::Vehicle, x0, kLane1, va);
    const double shift = 3.3;
    const double half = std::sqrt(shift / 2.0);  // lateral accel 2 m/s^2
    const double t_out = (xw - 30.0 - x0) / va;
    const double t_back = (last + 8.0 - x0) / va;
    if (t_out > 0) {
      a.add(t_out, 0, 2.0);
      a.add(t_out + half, 0, -2.0);
      a.add(t_out + 2 * half, 0, 0);
      a.add(t_back, 0, -2.0);
      a.add(t_back + half, 0, 2.0);
      a.add(t_back + 2 * half, 0, 0);
    }
  }

  void group() {
    std::vector<int> kinds;
    if (budget_.humans >= 2) kinds.push_back(0);
    if (budget_.obstacles >= 2) kinds.push_back(1);
    if (budget_.vehicles >= 2) kinds.push_back(2);
    if (kinds.empty()) return;
    const int kind = kinds[static_cast<std::size_t>(rng_.integer(0, static_cast<int>(kinds.size()) - 1))];
    if (kind == 0) {
      const int k = std::min(budget_.humans, rng_.integer(2, 3));
      const bool left = rng_.coin(0.5);
      const double y = left ? kSidewalkLeft : kSidewalkRight;
      const double v = (rng_.coin(0.5) ? 1.0 : -1.0) * rng_.uniform(1.1, 1.5);
      const double x = rng_.uniform(10.0, 120.0);
      for (int i = 0; i < k; ++i) {
        spawn(C::Human, x + i * rng_.uniform(0.8, 1.4), y + rng_.uniform(-0.5, 0.5), v);
      }
    } else if (kind == 1) {
      const int k = std::min(budget_.obstacles, rng_.integer(2, 3));
      const double x = rng_.uniform(30.0, 150.0);
      for (int i = 0; i < k; ++i) {
        spawn(C::Obstacle, x + i * rng_.uniform(1.5, 2.5), kShoulder + rng_.uniform(-0.3, 0.3), 0);
      }
    } else {
      const double x = rng_.uniform(20.0, 60.0);
      const double v = rng_.uniform(4.0, 6.0);
      spawn(C::Vehicle, x, 3.0, v);
      spawn(C::Vehicle, x + rng_.uniform(0.0, 1.5), 4.2, v + rng_.uniform(-0.2, 0.2));
    }
  }

  void background() {
    while (budget_.vehicles > 0) {
      spawn(C::Vehicle, rng_.uniform(15.0, 200.0), -2.6 + rng_.uniform(-0.2, 0.2), 0);
    }
    while (budget_.humans > 0) {
      if (!ego_stops_ && rng_.coin(0.3)) {
        jaywalker();
        continue;
      }
      const bool left = rng_.coin(0.5);
      const double v = (rng_.coin(0.5) ? 1.0 : -1.0) * rng_.uniform(1.0, 1.6);
      spawn(C::Human, rng_.uniform(-10.0, 180.0),
            (left ? kSidewalkLeft : kSidewalkRight) + rng_.uniform(-0.5, 0.5), v, 0,
            v > 0 ? 0.0 : kPi);
    }
    while (budget_.obstacles > 0) {
      spawn(C::Obstacle, rng_.uniform(20.0, 190.0), kShoulder + rng_.uniform(-0.3, 0.3), 0);
    }
    while (budget_.signs > 0) {
      spawn(C::TrafficSign, rng_.uniform(20.0, 190.0), -3.5 + rng_.uniform(-0.3, 0.3), 0);
    }
  }

  // Crosses from the right sidewalk and clears the ego lane a little before
  // the ego arrives.
  void jaywalker() {
    const double walk = rng_.uniform(1.2, 1.6);
    const double t_clear = rng_.uniform(4.0, 14.0);
    const double x = ego_x(t_clear + rng_.uniform(1.0, 3.0));
    const double t_start = t_clear - (kLane1 / 2 - kSidewalkRight) / walk;
    auto& h = spawn(C::Human, x, kSidewalkRight, 0, 0, kPi / 2);
    if (t_start > 0) {
      h.add(t_start, 0, walk / 0.25);
      h.add(t_start + 0.25, 0, 0);
      const double stop = t_start + 0.25 + (kSidewalkLeft - kSidewalkRight - walk * 0.125) / walk;
      h.add(stop, 0, -walk / 0.25);
      h.add(stop + 0.25, 0, 0);
    }
  }

  const GenConfig& cfg_;
  Rng& rng_;
  Budget budget_;
  double T_;
  double v_ego_ = 10;
  bool ego_stops_ = false;
  Actor ego_;
  std::vector<Actor> actors_;
};

int draw(Rng& rng, CountRange r) { return rng.integer(r.min, r.max); }

std::string scene_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene-%04d", i);
  return buf;
}

void assign_groups(Scene& s) {
  for (auto& f : s.frames) {
    std::map<int, int> parent;
    for (const auto& n : f.nodes) parent[n.id] = n.id;
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& e : f.edges) {
      if (!is_group(e.rel)) continue;
      const int a = find(e.subject_id), b = find(e.object_id);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::map<int, int> size;
    for (const auto& n : f.nodes) ++size[find(n.id)];
    for (auto& n : f.nodes) {
      const int root = find(n.id);
      n.group_id = size[root] > 1 ? std::optional<int>(root) : std::nullopt;
    }
  }
}

void edges_from_intervals(Scene& s) {
  for (auto& f : s.frames) {
    f.edges.clear();
    for (const auto& iv : s.intervals) {
      const double k = f.frame_index;
      if (k >= iv.b && k < iv.c) f.edges.push_back({iv.subject_id, iv.object_id, iv.rel, 1.0});
    }
  }
}

}  // namespace

int GenConfig::frame_count() const {
  return static_cast<int>(std::floor(duration_s * hz + 1e-9));
}

void GenConfig::validate() const {
  if (n_scenes < 0) throw ValidationError("n_scenes must be non-negative");
  if (!(hz == 2.0)) throw ValidationError("hz must be 2 (frames are 0.5 s apart)");
  if (!(duration_s > 0) || frame_count() < 2) throw ValidationError("duration_s * hz must give at least 2 frames");
  for (const auto* r : {&n_vehicles, &n_humans, &n_obstacles, &n_signs}) {
    if (r->min < 0 || r->max < r->min) throw ValidationError("bad object count range");
  }
  const double ws[] = {weights.following, weights.passing_by, weights.crossing,
                       weights.group, weights.overtaking, weights.approaching};
  double total = 0;
  for (double w : ws) {
    if (!(w >= 0) || !std::isfinite(w)) throw ValidationError("scenario weights must be >= 0");
    total += w;
  }
  if (total <= 0) throw ValidationError("all scenario weights are zero");
  if (!(sensor_range > 0)) throw ValidationError("sensor_range must be positive");
  if (!(position_noise >= 0)) throw ValidationError("position_noise must be >= 0");
  const Budget most{n_vehicles.max, n_humans.max, n_obstacles.max, n_signs.max};
  if (most.vehicles + most.humans + most.obstacles + most.signs > 0) {
    bool any = false;
    for (auto s : kScenarios) any = any || (weight_of(s, weights) > 0 && feasible(s, most));
    if (!any) {
      throw ValidationError("no scenario with positive weight fits the requested object counts");
    }
  }
}

RelationshipEdge classify_pair(const ObjectNode& ni, const ObjectNode& nj,
                               const std::vector<double>& window_dx, bool group_sustained,
                               const OracleRules& rules) {
  const bool swap = index_of(nj.cls) < index_of(ni.cls) ||
                    (nj.cls == ni.cls && nj.id < ni.id);
  const auto& p = swap ? nj : ni;
  const auto& q = swap ? ni : nj;
  std::vector<double> w = window_dx;
  if (swap) for (auto& v : w) v = -v;

  switch (p.cls) {
    case C::Human:
      switch (q.cls) {
        case C::Human:
          return group_sustained ? edge(p, q, R::HumanGroup) : none(p, q);
        case C::Vehicle: return classify_hv(p, q, rules);
        case C::Obstacle: return behind(p, q, R::HumanBehindObstacle, rules);
        case C::TrafficSign:
          if (speed(p) < rules.human_still_speed &&
              std::hypot(p.x - q.x, p.y - q.y) < rules.waiting_ts_dist) {
            return edge(p, q, R::HumanWaitingTs);
          }
          return none(p, q);
      }
      break;
    case C::Vehicle:
      switch (q.cls) {
        case C::Vehicle: return classify_vv(p, q, w, group_sustained, rules);
        case C::Obstacle: return classify_vo(p, q, w, rules);
        case C::TrafficSign: return classify_vt(p, q, rules);
        default: break;
      }
      break;
    case C::Obstacle:
      if (q.cls == C::Obstacle) return group_sustained ? edge(p, q, R::ObstacleGroup) : none(p, q);
      if (q.cls == C::TrafficSign) return behind(p, q, R::ObstacleBehindSign, rules);
      break;
    case C::TrafficSign:
      break;
  }
  return none(p, q);
}

std::vector<RelationshipInterval> oracle_label(const Scene& s, const OracleRules& rules) {
  const int nf = static_cast<int>(s.frames.size());
  std::vector<std::map<int, const ObjectNode*>> by_id(static_cast<std::size_t>(nf));
  std::set<PairKey> pairs;
  for (int k = 0; k < nf; ++k) {
    const auto& f = s.frames[static_cast<std::size_t>(k)];
    for (const auto& n : f.nodes) by_id[static_cast<std::size_t>(k)][n.id] = &n;
    for (std::size_t i = 0; i < f.nodes.size(); ++i) {
      for (std::size_t j = i + 1; j < f.nodes.size(); ++j) {
        pairs.insert(pair_key(f.nodes[i].id, f.nodes[j].id));
      }
    }
  }

  std::vector<RelationshipInterval> out;
  for (const auto& pk : pairs) {
    auto get = [&](int k, int id) -> const ObjectNode* {
      if (k < 0 || k >= nf) return nullptr;
      const auto& m = by_id[static_cast<std::size_t>(k)];
      auto it = m.find(id);
      return it == m.end() ? nullptr : it->second;
    };
    // Instantaneous group test and its run length through each frame.
    std::vector<bool> cond(static_cast<std::size_t>(nf), false);
    for (int k = 0; k < nf; ++k) {
      const auto* a = get(k, pk.lo);
      const auto* b = get(k, pk.hi);
      cond[static_cast<std::size_t>(k)] = a != nullptr && b != nullptr && group_condition(*a, *b, rules);
    }
    // A frame counts as grouped when it lies inside a run of at least
    // group_frames consecutive qualifying frames.
    std::vector<bool> sustained(static_cast<std::size_t>(nf), false);
    for (int k = 0; k < nf;) {
      if (!cond[static_cast<std::size_t>(k)]) { ++k; continue; }
      int e = k;
      while (e < nf && cond[static_cast<std::size_t>(e)]) ++e;
      if (e - k >= rules.group_frames) {
        for (int t = k; t < e; ++t) sustained[static_cast<std::size_t>(t)] = true;
      }
      k = e;
    }

    std::optional<RelationshipEdge> open;
    int start = 0;
    auto close = [&](int end) {
      if (open && open->rel != R::NoRelation) {
        const double a = start, d = end;
        out.push_back({open->subject_id, open->object_id, open->rel, a, a, d, d});
      }
    };
    for (int k = 0; k <= nf; ++k) {
      std::optional<RelationshipEdge> cur;
      if (k < nf) {
        const auto* a = get(k, pk.lo);
        const auto* b = get(k, pk.hi);
        if (a != nullptr && b != nullptr) {
          std::vector<double> window;
          for (int t = k - rules.pass_window; t <= k + rules.pass_window; ++t) {
            const auto* ta = get(t, pk.lo);
            const auto* tb = get(t, pk.hi);
            if (ta != nullptr && tb != nullptr) window.push_back(tb->x - ta->x);
          }
          cur = classify_pair(*a, *b, window, sustained[static_cast<std::size_t>(k)], rules);
          if (cur->rel == R::NoRelation) cur.reset();
        }
      }
      const bool same = open.has_value() == cur.has_value() &&
                        (!open || (open->rel == cur->rel && open->subject_id == cur->subject_id));
      if (!same) {
        close(k);
        open = cur;
        start = k;
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return std::tie(x.a, x.subject_id, x.object_id) < std::tie(y.a, y.subject_id, y.object_id);
  });
  return out;
}

Scene generate_scene(const GenConfig& cfg, std::uint64_t scene_seed) {
  cfg.validate();
  Rng rng(detail::mix_seed(cfg.seed, scene_seed, 1));
  Budget budget{draw(rng, cfg.n_vehicles), draw(rng, cfg.n_humans), draw(rng, cfg.n_obstacles),
                draw(rng, cfg.n_signs)};
  Builder b(cfg, rng, budget);
  if (budget.vehicles + budget.humans + budget.obstacles + budget.signs > 0) b.run();

  const auto& actors = b.actors();
  std::vector<int> ids(actors.size());
  std::iota(ids.begin(), ids.end(), 1);
  for (std::size_t i = ids.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<int>(i) - 1));
    std::swap(ids[i - 1], ids[j]);
  }

  Scene s;
  s.scene_id = scene_name(static_cast<int>(scene_seed));
  const int nf = cfg.frame_count();
  auto observe = [](int id, C cls, const State& st, const State& ego, double facing) {
    ObjectNode n;
    n.id = id;
    n.cls = cls;
    n.x = st.x - ego.x;
    n.y = st.y;
    n.vx = st.vx;
    n.vy = st.vy;
    n.ax = st.ax;
    n.ay = st.ay;
    n.yaw = std::hypot(st.vx, st.vy) > 0.1 ? std::atan2(st.vy, st.vx) : facing;
    if (n.yaw <= -kPi) n.yaw = kPi;
    return n;
  };
  for (int k = 0; k < nf; ++k) {
    SceneGraph g;
    g.frame_index = k;
    g.timestamp_s = k * kFramePeriod;
    const State ego = b.ego().at(g.timestamp_s);
    g.nodes.push_back(observe(kEgoId, C::Vehicle, ego, ego, 0));
    for (std::size_t i = 0; i < actors.size(); ++i) {
      const State st = actors[i].at(g.timestamp_s);
      if (std::abs(st.x - ego.x) > cfg.sensor_range) continue;
      g.nodes.push_back(observe(ids[i], actors[i].cls, st, ego, actors[i].facing));
    }
    std::sort(g.nodes.begin(), g.nodes.end(),
              [](const auto& x, const auto& y) { return x.id < y.id; });
    s.frames.push_back(std::move(g));
  }
  s.intervals = oracle_label(s, cfg.rules);
  edges_from_intervals(s);
  assign_groups(s);
  return s;
}

void add_observation_noise(Scene& s, std::uint64_t seed, double sigma) {
  if (sigma <= 0) return;
  Rng rng(detail::mix_seed(seed, 0, 2));
  for (auto& f : s.frames) {
    for (auto& n : f.nodes) {
      if (n.id == kEgoId) continue;
      n.x += sigma * rng.normal();
      n.y += sigma * rng.normal();
    }
  }
}

std::vector<RelationshipInterval> jitter_annotations(
    const std::vector<RelationshipInterval>& intervals, std::uint64_t seed, double min_gap,
    double max_gap, double lo, double hi) {
  if (!(min_gap >= 0) || max_gap < min_gap) throw ValidationError("bad jitter gap range");
  Rng rng(detail::mix_seed(seed, 0, 3));
  std::vector<RelationshipInterval> out;
  out.reserve(intervals.size());
  for (auto iv : intervals) {
    const double mid = 0.5 * (iv.b + iv.c);
    const double start = 0.5 * (iv.a + iv.b);
    const double end = 0.5 * (iv.c + iv.d);
    const double g1 = rng.uniform(min_gap, max_gap);
    const double g2 = rng.uniform(min_gap, max_gap);
    double a = start - g1 / 2, b = start + g1 / 2;
    if (a < lo) {
      a = lo;
      b = lo + g1;
    }
    double c = end - g2 / 2, d = end + g2 / 2;
    if (d > hi) {
      d = hi;
      c = hi - g2;
    }
    b = std::min(b, mid);
    c = std::max(c, mid);
    a = std::min(a, b);
    d = std::max(d, c);
    iv.a = a;
    iv.b = b;
    iv.c = c;
    iv.d = d;
    out.push_back(iv);
  }
  return out;
}

Dataset generate_dataset(const GenConfig& cfg, const GenerateOptions& opts) {
  cfg.validate();
  Dataset d;
  d.meta.name = "synthetic";
  d.meta.generator_seed = cfg.seed;
  for (int i = 0; i < cfg.n_scenes; ++i) {
    auto s = generate_scene(cfg, static_cast<std::uint64_t>(i));
    if (opts.jitter) {
      const double hi = static_cast<double>(s.frames.size());
      s.intervals = jitter_annotations(s.intervals, detail::mix_seed(cfg.seed, i, 4),
                                       opts.jitter_min_gap, opts.jitter_max_gap, 0.0, hi);
    }
    if (opts.noise) {
      add_observation_noise(s, detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(i), 5),
                            cfg.position_noise);
    }
    d.scenes.push_back(std::move(s));
  }
  d.meta.counts["scenes"] = static_cast<std::int64_t>(d.scenes.size());
  d.meta.counts["frames"] = static_cast<std::int64_t>(d.frame_count());
  return d;
}

}  // namespace rsg
