#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ppgta/world.hpp"

namespace ppgta {

enum class ExpertKind : std::uint8_t { PathFollow = 0, OrbitTest = 1 };

const char* expert_kind_name(ExpertKind kind);

/// Ordered (frame, action) pairs; frames[i] is observed before actions[i] is taken.
struct Trajectory {
  ExpertKind kind = ExpertKind::PathFollow;
  std::uint64_t seed = 0;
  std::uint64_t world_seed = 0;
  int target_ooi = -1;
  AgentPose start;
  std::vector<Frame> frames;
  std::vector<int> actions;
  /// Pose at each frame; not persisted.
  std::vector<AgentPose> poses;

  std::size_t size() const { return actions.size(); }
};

/// Left-hand wall following along pathway tiles for `steps` actions.
Trajectory path_follow_expert(const World& world, const AgentPose& start, int steps,
                              std::uint64_t seed = 0);

/// Approach the OOI, then visit every reachable ring tile clockwise, facing the OOI at each.
/// Throws UntestableOoi when no ring tile is reachable.
Trajectory orbit_test_expert(const World& world, int ooi_index, const AgentPose& start,
                             std::uint64_t seed = 0);

/// A test starts once an OOI's box covers this fraction of the frame.
inline constexpr double kTriggerAreaFraction = 0.04;
/// Chebyshev distance band of test start poses.
inline constexpr int kMinTriggerDistance = 2;
inline constexpr int kMaxTriggerDistance = 3;

/// Close-range test start: main-component tile in the distance band, facing the OOI, with the
/// OOI box covering at least kTriggerAreaFraction of the frame.
std::optional<AgentPose> orbit_start_pose(const World& world, int ooi_index, Rng& rng);

/// Heading (0..7) that best points from `from` towards `to`.
int heading_towards(TilePos from, TilePos to);

/// Shortest 8-connected walkable route, excluding `from`; empty if unreachable or equal.
std::vector<TilePos> shortest_route(const World& world, TilePos from, TilePos to);

struct DemoCounts {
  int orbit = 150;
  int path = 50;
  int path_length = 160;
};

/// Scripted demonstration corpus over one world; orbit trajectories first.
std::vector<Trajectory> collect_demonstrations(const World& world, const DemoCounts& counts,
                                               std::uint64_t seed);

}  // namespace ppgta
