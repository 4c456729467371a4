#include "ppgta/expert.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

namespace ppgta {

const char* expert_kind_name(ExpertKind kind) {
  return kind == ExpertKind::PathFollow ? "path-follow" : "orbit-test";
}

int heading_towards(TilePos from, TilePos to) {
  const double dx = to.x - from.x, dy = to.y - from.y;
  // atan2 with north = 0, clockwise.
  double angle = std::atan2(dx, -dy);
  if (angle < 0) angle += 2.0 * std::numbers::pi;
  return static_cast<int>(std::lround(angle / (std::numbers::pi / 4.0))) % 8;
}

std::vector<TilePos> shortest_route(const World& world, TilePos from, TilePos to) {
  if (from == to) return {};
  const int n = world.size();
  std::vector<int> parent(static_cast<std::size_t>(n) * n, -1);
  auto idx = [n](TilePos p) { return static_cast<std::size_t>(p.y) * n + p.x; };
  std::deque<TilePos> queue{from};
  parent[idx(from)] = static_cast<int>(idx(from));
  while (!queue.empty()) {
    const TilePos p = queue.front();
    queue.pop_front();
    if (p == to) break;
    for (int h = 0; h < 8; h += 2) {
      const TilePos q{p.x + kHeadingStep[static_cast<std::size_t>(h)].x, p.y + kHeadingStep[static_cast<std::size_t>(h)].y};
      if (!world.walkable(q.x, q.y) || parent[idx(q)] >= 0) continue;
      parent[idx(q)] = static_cast<int>(idx(p));
      queue.push_back(q);
    }
    for (int h = 1; h < 8; h += 2) {
      const TilePos q{p.x + kHeadingStep[static_cast<std::size_t>(h)].x, p.y + kHeadingStep[static_cast<std::size_t>(h)].y};
      if (!world.walkable(q.x, q.y) || parent[idx(q)] >= 0) continue;
      parent[idx(q)] = static_cast<int>(idx(p));
      queue.push_back(q);
    }
  }
  if (parent[idx(to)] < 0) return {};
  std::vector<TilePos> route;
  for (TilePos p = to; !(p == from);) {
    route.push_back(p);
    const int pi = parent[idx(p)];
    p = {pi % n, pi / n};
  }
  std::reverse(route.begin(), route.end());
  return route;
}

namespace {

/// Records frames and poses while issuing actions.
class Recorder {
 public:
  Recorder(const World& world, Trajectory& traj, AgentPose pose, int budget)
      : world_(world), traj_(traj), pose_(pose), budget_(budget) {}

  bool full() const { return budget_ >= 0 && static_cast<int>(traj_.actions.size()) >= budget_; }
  const AgentPose& pose() const { return pose_; }

  void act(int action) {
    if (full()) return;
    traj_.poses.push_back(pose_);
    traj_.frames.push_back(render(world_, pose_));
    traj_.actions.push_back(action);
    pose_ = transition(world_, pose_, action);
  }

  void face(int heading) {
    const int diff = ((heading - pose_.heading) % 8 + 8) % 8;
    if (diff <= 4) {
      for (int i = 0; i < diff; ++i) act(kTurnRight);
    } else {
      for (int i = 0; i < 8 - diff; ++i) act(kTurnLeft);
    }
  }

  /// Translate one tile in world direction `dir`, rotating right first if needed.
  void move(int dir) {
    int rel = ((dir - pose_.heading) % 8 + 8) % 8;
    if (rel % 2 == 1) {
      act(kTurnRight);
      rel = ((dir - pose_.heading) % 8 + 8) % 8;
    }
    switch (rel) {
      case 0: act(kForward); break;
      case 2: act(kStrafeRight); break;
      case 4: act(kBack); break;
      case 6: act(kStrafeLeft); break;
      default: break;
    }
  }

 private:
  const World& world_;
  Trajectory& traj_;
  AgentPose pose_;
  int budget_;
};

int direction_of(TilePos from, TilePos to) {
  for (int h = 0; h < 8; ++h) {
    if (from.x + kHeadingStep[static_cast<std::size_t>(h)].x == to.x && from.y + kHeadingStep[static_cast<std::size_t>(h)].y == to.y) return h;
  }
  return -1;
}

}  // namespace

Trajectory path_follow_expert(const World& world, const AgentPose& start, int steps, std::uint64_t seed) {
  require(world.walkable(start.x, start.y), "path_follow_expert: start pose not walkable");
  Trajectory traj;
  traj.kind = ExpertKind::PathFollow;
  traj.seed = seed;
  traj.world_seed = world.spec().seed;
  traj.start = start;
  Recorder rec(world, traj, start, steps);

  auto passable = [&](const AgentPose& p, int dir) -> int {
    const TilePos d = kHeadingStep[static_cast<std::size_t>(dir & 7)];
    const int x = p.x + d.x, y = p.y + d.y;
    if (world.is_pathway(x, y) && world.walkable(x, y)) return 1;
    if (world.in_bounds(x, y) && world.kind(x, y) == TileKind::Gap && world.is_pathway(x + d.x, y + d.y) &&
        world.walkable(x + d.x, y + d.y)) {
      return 2;
    }
    return 0;
  };
  auto advance = [&](int kind) { rec.act(kind == 2 ? kJump : kForward); };

  if (rec.pose().heading % 2 == 1) rec.act(kTurnRight);
  while (!rec.full()) {
    const AgentPose p = rec.pose();
    const int h = p.heading;
    if (int k = passable(p, h + 6)) {
      rec.act(kTurnLeft);
      rec.act(kTurnLeft);
      advance(k);
    } else if (int k2 = passable(p, h)) {
      advance(k2);
    } else if (int k3 = passable(p, h + 2)) {
      rec.act(kTurnRight);
      rec.act(kTurnRight);
      advance(k3);
    } else if (int k4 = passable(p, h + 4)) {
      for (int i = 0; i < 4; ++i) rec.act(kTurnRight);
      advance(k4);
    } else {
      // Isolated tile: look around in place.
      rec.act(kTurnRight);
    }
  }
  return traj;
}

Trajectory orbit_test_expert(const World& world, int ooi_index, const AgentPose& start, std::uint64_t seed) {
  require(ooi_index >= 0 && static_cast<std::size_t>(ooi_index) < world.oois().size(),
          "orbit_test_expert: OOI index out of range");
  require(world.walkable(start.x, start.y), "orbit_test_expert: start pose not walkable");
  const Ooi& ooi = world.oois()[static_cast<std::size_t>(ooi_index)];
  std::vector<TilePos> ring;
  const TilePos here{start.x, start.y};
  for (const TilePos& r : world.reachable_ring(ooi_index)) {
    if (r == here || !shortest_route(world, here, r).empty()) ring.push_back(r);
  }
  if (ring.empty()) {
    throw UntestableOoi("OOI " + std::to_string(ooi.id) + " has no reachable ring tile");
  }

  Trajectory traj;
  traj.kind = ExpertKind::OrbitTest;
  traj.seed = seed;
  traj.world_seed = world.spec().seed;
  traj.target_ooi = ooi_index;
  traj.start = start;
  Recorder rec(world, traj, start, -1);

  // Nearest ring tile first, then clockwise around the remaining ones.
  std::size_t first = 0;
  std::size_t best = SIZE_MAX;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const std::size_t d = ring[i] == here ? 0 : shortest_route(world, here, ring[i]).size();
    if (d < best) {
      best = d;
      first = i;
    }
  }
  for (std::size_t k = 0; k < ring.size(); ++k) {
    const TilePos target = ring[(first + k) % ring.size()];
    TilePos cur{rec.pose().x, rec.pose().y};
    for (const TilePos& next : shortest_route(world, cur, target)) {
      rec.move(direction_of(cur, next));
      cur = {rec.pose().x, rec.pose().y};
    }
    rec.face(heading_towards(cur, ooi.tile));
  }
  return traj;
}

std::optional<AgentPose> orbit_start_pose(const World& world, int ooi_index, Rng& rng) {
  const TilePos c = world.oois().at(static_cast<std::size_t>(ooi_index)).tile;
  const int min_area = static_cast<int>(std::ceil(kTriggerAreaFraction * 32 * 32));
  std::vector<AgentPose> options;
  for (int y = c.y - kMaxTriggerDistance; y <= c.y + kMaxTriggerDistance; ++y) {
    for (int x = c.x - kMaxTriggerDistance; x <= c.x + kMaxTriggerDistance; ++x) {
      if (std::max(std::abs(x - c.x), std::abs(y - c.y)) < kMinTriggerDistance) continue;
      if (!world.in_bounds(x, y) || !world.walkable(x, y) || !world.in_main_component(x, y)) continue;
      const AgentPose pose{x, y, heading_towards({x, y}, c), 0};
      RenderInfo info;
      render(world, pose, &info);
      for (const VisibleOoi& v : info.visible) {
        if (v.ooi_index == ooi_index && v.area() >= min_area) options.push_back(pose);
      }
    }
  }
  if (options.empty()) return std::nullopt;
  return options[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(options.size()) - 1))];
}

std::vector<Trajectory> collect_demonstrations(const World& world, const DemoCounts& counts, std::uint64_t seed) {
  std::vector<int> testable;
  for (std::size_t i = 0; i < world.oois().size(); ++i) {
    if (world.oois()[i].reachable) testable.push_back(static_cast<int>(i));
  }
  require(!testable.empty() || counts.orbit == 0, "collect_demonstrations: no reachable OOI");
  require(!world.spawn_tiles().empty(), "collect_demonstrations: world has no spawn tiles");
  std::vector<Trajectory> out;
  Rng orbit_rng = make_stream(seed, "demos.orbit");
  int guard = 0;
  while (static_cast<int>(out.size()) < counts.orbit && guard++ < counts.orbit * 20) {
    const int target = testable[static_cast<std::size_t>(uniform_int(orbit_rng, 0, static_cast<int>(testable.size()) - 1))];
    auto start = orbit_start_pose(world, target, orbit_rng);
    if (!start) continue;
    try {
      out.push_back(orbit_test_expert(world, target, *start, seed + out.size()));
    } catch (const UntestableOoi&) {
    }
  }
  Rng path_rng = make_stream(seed, "demos.path");
  const auto& spawns = world.spawn_tiles();
  for (int i = 0; i < counts.path; ++i) {
    const TilePos s = spawns[static_cast<std::size_t>(uniform_int(path_rng, 0, static_cast<int>(spawns.size()) - 1))];
    const AgentPose start{s.x, s.y, 2 * uniform_int(path_rng, 0, 3), 0};
    out.push_back(path_follow_expert(world, start, counts.path_length, seed + 1000003ULL + static_cast<std::uint64_t>(i)));
  }
  return out;
}

}  // namespace ppgta
