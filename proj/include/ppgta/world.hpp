#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppgta/common.hpp"

namespace ppgta {

/// Row-major 8-bit RGB raster. Used both for observations and for maps.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  friend bool operator==(const Image&, const Image&) = default;
};

using Frame = Image;

enum class TileKind : std::uint8_t { Grass, Path, Tree, Water, Gap, Ooi };

enum class BugKind : std::uint8_t { None, LowResolution, Stretched };

inline constexpr int kOoiTypes = 4;
inline constexpr int kActionCount = 9;

/// Discrete action ids.
enum Action : int {
  kForward = 0,
  kBack = 1,
  kStrafeLeft = 2,
  kStrafeRight = 3,
  kTurnLeft = 4,
  kTurnRight = 5,
  kPitchUp = 6,
  kPitchDown = 7,
  kJump = 8,
};

const char* ooi_type_name(int type);
const char* bug_kind_name(BugKind kind);

struct TilePos {
  int x = 0;
  int y = 0;
  friend bool operator==(const TilePos&, const TilePos&) = default;
  friend auto operator<=>(const TilePos&, const TilePos&) = default;
};

/// Headings are 0..7 clockwise from north; y grows southwards.
inline constexpr std::array<TilePos, 8> kHeadingStep{{
    {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}}};

struct AgentPose {
  int x = 0;
  int y = 0;
  int heading = 0;  // 0..7
  int pitch = 0;    // viewport row shift in [-2, 2]
  friend bool operator==(const AgentPose&, const AgentPose&) = default;
};

inline constexpr int kMaxPitch = 2;

struct WorldSpec {
  std::uint64_t seed = 1;
  int grid_size = 64;
  double path_density = 0.15;
  int n_ooi = 40;
  double bug_ratio = 0.5;
  int n_invisible_walls = 2;
  int n_gaps = 6;
};

/// Which texture a block face shows.
struct FaceTexture {
  std::uint8_t ooi_type = 0;
  std::uint8_t face = 0;  // 0=N 1=E 2=S 3=W
  BugKind bug = BugKind::None;
  friend bool operator==(const FaceTexture&, const FaceTexture&) = default;
};

struct Ooi {
  int id = 0;
  int type = 0;
  TilePos tile;
  std::array<FaceTexture, 4> faces{};
  bool bugged = false;
  BugKind bug_kind = BugKind::None;
  bool reachable = true;
};

/// Chebyshev radius of the square invisible-wall ring that encloses an OOI.
inline constexpr int kEnclosureRadius = 5;

/// Immutable after generation; safe to share across threads.
class World {
 public:
  World() = default;

  const WorldSpec& spec() const { return spec_; }
  int size() const { return size_; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < size_ && y < size_; }
  TileKind kind(int x, int y) const { return tiles_[index(x, y)]; }
  bool invisible_wall(int x, int y) const { return invisible_[index(x, y)] != 0; }
  /// Walkable: grass or path without an invisible wall.
  bool walkable(int x, int y) const;
  bool blocks_ray(int x, int y) const;
  bool is_pathway(int x, int y) const { return in_bounds(x, y) && kind(x, y) == TileKind::Path; }
  /// OOI index at a tile, or -1.
  int ooi_at(int x, int y) const { return ooi_index_[index(x, y)]; }

  const std::vector<Ooi>& oois() const { return oois_; }
  const std::vector<TilePos>& spawn_tiles() const { return spawns_; }
  int pathway_tile_count() const { return pathway_count_; }
  /// Tile in the main walkable component (reachable from spawns).
  bool in_main_component(int x, int y) const { return main_[index(x, y)] != 0; }
  /// Free ring positions of an OOI that lie in the main component.
  std::vector<TilePos> reachable_ring(int ooi_index) const;

  std::string dump() const;

 private:
  friend class WorldGenerator;
  friend World build_world_for_test(int size, const std::vector<std::string>& rows,
                                    const std::vector<Ooi>& oois);

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * size_ + x; }
  void finalize();

  WorldSpec spec_;
  int size_ = 0;
  std::vector<TileKind> tiles_;
  std::vector<std::uint8_t> invisible_;
  std::vector<int> ooi_index_;
  std::vector<std::uint8_t> main_;
  std::vector<Ooi> oois_;
  std::vector<TilePos> spawns_;
  int pathway_count_ = 0;
};

/// Throws InfeasibleSpec naming the violated budget.
World generate_world(const WorldSpec& spec);

/// Builds a world from an ASCII map ('.' grass, '#' path, 'T' tree, '~' water, '_' gap,
/// 'W' invisible wall over path, 'O' OOI). OOIs listed in order of 'O' occurrence.
World build_world_for_test(int size, const std::vector<std::string>& rows,
                           const std::vector<Ooi>& oois);

/// Flood fill over walkable tiles with jump edges across gaps, seeded from `sources`.
std::vector<std::uint8_t> flood_fill(const World& world, const std::vector<TilePos>& sources);

/// Transition only (no rendering). Throws ContractViolation for invalid action ids.
AgentPose transition(const World& world, const AgentPose& pose, int action);

struct VisibleOoi {
  int ooi_index = -1;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open, frame coordinates
  std::uint8_t faces_seen = 0;          // bitmask over N,E,S,W
  int area() const { return (x1 - x0) * (y1 - y0); }
};

struct RenderInfo {
  std::vector<VisibleOoi> visible;
};

struct RenderConfig {
  int width = 32;
  int height = 32;
  double max_distance = 14.0;
};

/// Pure function of (world, pose): first-person raycast view.
Frame render(const World& world, const AgentPose& pose, RenderInfo* info = nullptr,
             const RenderConfig& config = {});

struct StepResult {
  AgentPose pose;
  Frame frame;
};

StepResult step(const World& world, const AgentPose& pose, int action,
                const RenderConfig& config = {});

enum class TestStatus : std::uint8_t { Missed, Success, Failed };

/// One pixel per tile: pathways white, other tiles dark, traces red, OOIs by status.
Image render_birdseye(const World& world, const std::vector<std::vector<TilePos>>& traces,
                      const std::map<int, TestStatus>& ooi_status);

namespace birdseye_colors {
inline constexpr std::array<std::uint8_t, 3> kPath{255, 255, 255};
inline constexpr std::array<std::uint8_t, 3> kOther{40, 40, 40};
inline constexpr std::array<std::uint8_t, 3> kTrace{255, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kSuccess{0, 200, 0};
inline constexpr std::array<std::uint8_t, 3> kFailed{150, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kMissed{128, 128, 128};
}  // namespace birdseye_colors

std::vector<std::uint8_t> encode_ppm(const Image& image);
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// 8x8 RGB texel block for a face texture (bugs applied).
std::array<std::array<std::array<std::uint8_t, 3>, 8>, 8> face_texels(const FaceTexture& tex);

}  // namespace ppgta
