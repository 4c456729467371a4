#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ppgta/expert.hpp"
#include "ppgta/feature.hpp"

namespace ppgta {

// Trajectory file: "PTRJ", u16 version, u16 width, u16 height, u8 kind, u64 seed, u64 world seed,
// i32 target OOI, i32 x4 start pose, u32 step count, then per step (u8 action, RGB payload).
inline constexpr std::uint16_t kTrajectoryVersion = 1;

std::vector<std::uint8_t> encode_trajectory(const Trajectory& traj);
/// Throws FormatError naming `origin` on bad magic, version or truncation.
Trajectory decode_trajectory(std::span<const std::uint8_t> bytes, const std::string& origin);

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);
/// When `world` is given, poses are rebuilt by replaying the actions from the start pose.
Trajectory load_trajectory(const std::filesystem::path& path, const World* world = nullptr);

/// Recomputes per-frame poses from the start pose and actions.
void replay_poses(const World& world, Trajectory& traj);

struct Corpus {
  std::vector<Trajectory> trajectories;
  CorpusSplit split;
};

/// Directory with one file per trajectory plus `index.txt` lines `<file> <kind> <split>`.
void save_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& dir, const World* world = nullptr);

}  // namespace ppgta
