#include "ppgta/dataset.hpp"

#include <cstdio>
#include <sstream>

#include "ppgta/io.hpp"

namespace ppgta {

std::vector<std::uint8_t> encode_trajectory(const Trajectory& traj) {
  require(traj.frames.size() == traj.actions.size(), "encode_trajectory: frame/action count mismatch");
  const int w = traj.frames.empty() ? 0 : traj.frames.front().width;
  const int h = traj.frames.empty() ? 0 : traj.frames.front().height;
  ByteWriter out;
  out.text("PTRJ");
  out.u16(kTrajectoryVersion);
  out.u16(static_cast<std::uint16_t>(w));
  out.u16(static_cast<std::uint16_t>(h));
  out.u8(static_cast<std::uint8_t>(traj.kind));
  out.u64(traj.seed);
  out.u64(traj.world_seed);
  out.u32(static_cast<std::uint32_t>(traj.target_ooi));
  for (int v : {traj.start.x, traj.start.y, traj.start.heading, traj.start.pitch}) out.u32(static_cast<std::uint32_t>(v));
  out.u32(static_cast<std::uint32_t>(traj.actions.size()));
  for (std::size_t i = 0; i < traj.actions.size(); ++i) {
    const Frame& f = traj.frames[i];
    require(f.width == w && f.height == h, "encode_trajectory: frame extents vary within a trajectory");
    out.u8(static_cast<std::uint8_t>(traj.actions[i]));
    out.bytes(f.pixels);
  }
  return out.buffer();
}

Trajectory decode_trajectory(std::span<const std::uint8_t> bytes, const std::string& origin) {
  ByteReader in(bytes, origin);
  if (in.text(4) != "PTRJ") throw FormatError(origin + ": bad magic (not a trajectory file)");
  const std::uint16_t version = in.u16();
  if (version != kTrajectoryVersion) {
    throw FormatError(origin + ": unsupported trajectory version " + std::to_string(version));
  }
  const int w = in.u16();
  const int h = in.u16();
  Trajectory t;
  const std::uint8_t kind = in.u8();
  if (kind > 1) throw FormatError(origin + ": unknown expert kind " + std::to_string(kind));
  t.kind = static_cast<ExpertKind>(kind);
  t.seed = in.u64();
  t.world_seed = in.u64();
  t.target_ooi = static_cast<std::int32_t>(in.u32());
  t.start.x = static_cast<std::int32_t>(in.u32());
  t.start.y = static_cast<std::int32_t>(in.u32());
  t.start.heading = static_cast<std::int32_t>(in.u32());
  t.start.pitch = static_cast<std::int32_t>(in.u32());
  const std::uint32_t n = in.u32();
  const std::size_t payload = static_cast<std::size_t>(w) * h * 3;
  if (in.remaining() != static_cast<std::size_t>(n) * (payload + 1)) {
    throw FormatError(origin + ": truncated or oversized step records");
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    const int a = in.u8();
    if (a >= kActionCount) throw FormatError(origin + ": invalid action id " + std::to_string(a));
    Frame f(w, h);
    const auto px = in.bytes(payload);
    std::copy(px.begin(), px.end(), f.pixels.begin());
    t.actions.push_back(a);
    t.frames.push_back(std::move(f));
  }
  return t;
}

void replay_poses(const World& world, Trajectory& traj) {
  traj.poses.clear();
  AgentPose p = traj.start;
  for (int a : traj.actions) {
    traj.poses.push_back(p);
    p = transition(world, p, a);
  }
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  write_file_atomic(path, encode_trajectory(traj));
}

Trajectory load_trajectory(const std::filesystem::path& path, const World* world) {
  Trajectory t = decode_trajectory(read_file_bytes(path), path.string());
  if (world) replay_poses(*world, t);
  return t;
}

namespace {

const char* split_name(int s) { return s == 0 ? "train" : s == 1 ? "val" : "test"; }

}  // namespace

void save_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  std::vector<int> split_of(corpus.trajectories.size(), -1);
  for (int i : corpus.split.train) split_of.at(static_cast<std::size_t>(i)) = 0;
  for (int i : corpus.split.val) split_of.at(static_cast<std::size_t>(i)) = 1;
  for (int i : corpus.split.test) split_of.at(static_cast<std::size_t>(i)) = 2;
  std::string index;
  for (std::size_t i = 0; i < corpus.trajectories.size(); ++i) {
    require(split_of[i] >= 0, "save_corpus: trajectory without split assignment");
    char name[32];
    std::snprintf(name, sizeof name, "traj_%04zu.ptrj", i);
    save_trajectory(dir / name, corpus.trajectories[i]);
    index += std::string(name) + " " + expert_kind_name(corpus.trajectories[i].kind) + " " + split_name(split_of[i]) + "\n";
  }
  write_text_atomic(dir / "index.txt", index);
}

Corpus load_corpus(const std::filesystem::path& dir, const World* world) {
  const auto index_path = dir / "index.txt";
  if (!std::filesystem::exists(index_path)) throw FormatError(index_path.string() + ": corpus index missing");
  Corpus c;
  std::istringstream in(read_text_file(index_path));
  std::string file, kind, split;
  while (in >> file >> kind >> split) {
    const int i = static_cast<int>(c.trajectories.size());
    c.trajectories.push_back(load_trajectory(dir / file, world));
    if (kind != expert_kind_name(c.trajectories.back().kind)) {
      throw FormatError(index_path.string() + ": kind of " + file + " disagrees with its header");
    }
    if (split == "train") {
      c.split.train.push_back(i);
    } else if (split == "val") {
      c.split.val.push_back(i);
    } else if (split == "test") {
      c.split.test.push_back(i);
    } else {
      throw FormatError(index_path.string() + ": unknown split '" + split + "'");
    }
  }
  return c;
}

}  // namespace ppgta
