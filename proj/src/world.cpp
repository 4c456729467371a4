#include "ppgta/world.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "ppgta/io.hpp"

namespace ppgta {

const char* ooi_type_name(int type) {
  static constexpr const char* kNames[kOoiTypes] = {"rock-pillar", "barrel", "tire", "chair"};
  require(type >= 0 && type < kOoiTypes, "ooi_type_name: type out of range");
  return kNames[type];
}

const char* bug_kind_name(BugKind kind) {
  switch (kind) {
    case BugKind::None: return "none";
    case BugKind::LowResolution: return "lowres";
    case BugKind::Stretched: return "stretched";
  }
  return "none";
}

// ------------------------------------------------------------------ World queries

bool World::walkable(int x, int y) const {
  if (!in_bounds(x, y)) return false;
  const TileKind k = kind(x, y);
  return (k == TileKind::Grass || k == TileKind::Path) && !invisible_wall(x, y);
}

bool World::blocks_ray(int x, int y) const {
  if (!in_bounds(x, y)) return true;
  const TileKind k = kind(x, y);
  return k == TileKind::Tree || k == TileKind::Ooi;
}

std::vector<TilePos> World::reachable_ring(int ooi_index) const {
  const TilePos c = oois_.at(static_cast<std::size_t>(ooi_index)).tile;
  std::vector<TilePos> ring;
  // Clockwise from the north-west corner.
  static constexpr std::array<TilePos, 8> kRing{{
      {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}}};
  for (const TilePos& d : kRing) {
    const int x = c.x + d.x, y = c.y + d.y;
    if (in_bounds(x, y) && walkable(x, y) && in_main_component(x, y)) ring.push_back({x, y});
  }
  return ring;
}

std::vector<std::uint8_t> flood_fill(const World& world, const std::vector<TilePos>& sources) {
  const int n = world.size();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(n) * n, 0);
  std::deque<TilePos> queue;
  for (const TilePos& s : sources) {
    if (!world.walkable(s.x, s.y)) continue;
    auto& cell = seen[static_cast<std::size_t>(s.y) * n + s.x];
    if (!cell) {
      cell = 1;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const TilePos p = queue.front();
    queue.pop_front();
    for (int h = 0; h < 8; ++h) {
      const TilePos d = kHeadingStep[h];
      TilePos q{p.x + d.x, p.y + d.y};
      if (world.in_bounds(q.x, q.y) && world.kind(q.x, q.y) == TileKind::Gap) {
        q = {p.x + 2 * d.x, p.y + 2 * d.y};
      }
      if (!world.walkable(q.x, q.y)) continue;
      auto& cell = seen[static_cast<std::size_t>(q.y) * n + q.x];
      if (!cell) {
        cell = 1;
        queue.push_back(q);
      }
    }
  }
  return seen;
}

void World::finalize() {
  ooi_index_.assign(tiles_.size(), -1);
  for (std::size_t i = 0; i < oois_.size(); ++i) {
    ooi_index_[index(oois_[i].tile.x, oois_[i].tile.y)] = static_cast<int>(i);
  }
  pathway_count_ = static_cast<int>(std::count(tiles_.begin(), tiles_.end(), TileKind::Path));

  // The main component is the walkable component holding the most pathway tiles.
  std::vector<int> label(tiles_.size(), -1);
  std::vector<int> path_in_label;
  for (int y = 0; y < size_; ++y) {
    for (int x = 0; x < size_; ++x) {
      if (!walkable(x, y) || label[index(x, y)] >= 0) continue;
      const auto comp = flood_fill(*this, {{x, y}});
      const int id = static_cast<int>(path_in_label.size());
      int paths = 0;
      for (std::size_t i = 0; i < comp.size(); ++i) {
        if (comp[i]) {
          label[i] = id;
          if (tiles_[i] == TileKind::Path) ++paths;
        }
      }
      path_in_label.push_back(paths);
    }
  }
  main_.assign(tiles_.size(), 0);
  spawns_.clear();
  if (!path_in_label.empty()) {
    const int best = static_cast<int>(std::max_element(path_in_label.begin(), path_in_label.end()) -
                                      path_in_label.begin());
    for (std::size_t i = 0; i < tiles_.size(); ++i) main_[i] = label[i] == best ? 1 : 0;
    for (int y = 0; y < size_; ++y) {
      for (int x = 0; x < size_; ++x) {
        if (main_[index(x, y)] && kind(x, y) == TileKind::Path) spawns_.push_back({x, y});
      }
    }
  }
  for (std::size_t i = 0; i < oois_.size(); ++i) {
    oois_[i].reachable = !reachable_ring(static_cast<int>(i)).empty();
  }
}

std::string World::dump() const {
  std::ostringstream out;
  for (int y = 0; y < size_; ++y) {
    for (int x = 0; x < size_; ++x) {
      const char* k = "grass";
      switch (kind(x, y)) {
        case TileKind::Grass: k = "grass"; break;
        case TileKind::Path: k = "path"; break;
        case TileKind::Tree: k = "tree"; break;
        case TileKind::Water: k = "water"; break;
        case TileKind::Gap: k = "gap"; break;
        case TileKind::Ooi: k = "ooi"; break;
      }
      out << x << ' ' << y << ' ' << k << (invisible_wall(x, y) ? "+wall" : "") << '\n';
    }
  }
  for (const Ooi& o : oois_) {
    out << o.id << ' ' << ooi_type_name(o.type) << ' ' << o.tile.x << ' ' << o.tile.y << ' '
        << (o.bugged ? 1 : 0) << ' ' << bug_kind_name(o.bug_kind) << '\n';
  }
  return out.str();
}

// ------------------------------------------------------------------ generation

namespace {

int chebyshev(TilePos a, TilePos b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

struct Grid {
  int n;
  std::vector<TileKind> tiles;
  TileKind& at(int x, int y) { return tiles[static_cast<std::size_t>(y) * n + x]; }
  TileKind at(int x, int y) const { return tiles[static_cast<std::size_t>(y) * n + x]; }
  bool interior(int x, int y) const { return x >= 1 && y >= 1 && x < n - 1 && y < n - 1; }
  bool is(int x, int y, TileKind k) const { return x >= 0 && y >= 0 && x < n && y < n && at(x, y) == k; }
};

void scatter_blobs(Grid& g, Rng& rng, TileKind kind, int count) {
  for (int b = 0; b < count; ++b) {
    const int cx = uniform_int(rng, 2, g.n - 3);
    const int cy = uniform_int(rng, 2, g.n - 3);
    const int r = uniform_int(rng, 1, 3);
    for (int y = cy - r; y <= cy + r; ++y) {
      for (int x = cx - r; x <= cx + r; ++x) {
        if (!g.interior(x, y)) continue;
        const double d = std::hypot(x - cx, y - cy);
        if (d <= r && uniform01(rng) < 0.85) g.at(x, y) = kind;
      }
    }
  }
}

void carve_pathways(Grid& g, Rng& rng, int target) {
  auto count = [&] { return static_cast<int>(std::count(g.tiles.begin(), g.tiles.end(), TileKind::Path)); };
  std::vector<TilePos> path_tiles;
  auto set_path = [&](int x, int y) {
    if (!g.interior(x, y) || g.at(x, y) == TileKind::Path) return;
    g.at(x, y) = TileKind::Path;
    path_tiles.push_back({x, y});
  };
  TilePos cur{uniform_int(rng, 3, g.n - 4), uniform_int(rng, 3, g.n - 4)};
  set_path(cur.x, cur.y);
  int guard = 0;
  while (count() < target && guard++ < 10000) {
    const TilePos from = path_tiles[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(path_tiles.size()) - 1))];
    const TilePos to{uniform_int(rng, 3, g.n - 4), uniform_int(rng, 3, g.n - 4)};
    const bool horizontal_first = uniform01(rng) < 0.5;
    int x = from.x, y = from.y;
    auto walk_x = [&] {
      while (x != to.x && count() < target) {
        x += to.x > x ? 1 : -1;
        set_path(x, y);
      }
    };
    auto walk_y = [&] {
      while (y != to.y && count() < target) {
        y += to.y > y ? 1 : -1;
        set_path(x, y);
      }
    };
    if (horizontal_first) {
      walk_x();
      walk_y();
    } else {
      walk_y();
      walk_x();
    }
  }
}

bool straight_path_segment(const Grid& g, int x, int y) {
  if (!g.is(x, y, TileKind::Path)) return false;
  const bool horiz = g.is(x - 1, y, TileKind::Path) && g.is(x + 1, y, TileKind::Path) &&
                     g.is(x - 2, y, TileKind::Path) && g.is(x + 2, y, TileKind::Path) &&
                     !g.is(x, y - 1, TileKind::Path) && !g.is(x, y + 1, TileKind::Path);
  const bool vert = g.is(x, y - 1, TileKind::Path) && g.is(x, y + 1, TileKind::Path) &&
                    g.is(x, y - 2, TileKind::Path) && g.is(x, y + 2, TileKind::Path) &&
                    !g.is(x - 1, y, TileKind::Path) && !g.is(x + 1, y, TileKind::Path);
  return horiz || vert;
}

bool adjacent4(const Grid& g, int x, int y, TileKind k) {
  return g.is(x - 1, y, k) || g.is(x + 1, y, k) || g.is(x, y - 1, k) || g.is(x, y + 1, k);
}

template <class T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

class WorldGenerator {
 public:
  static std::optional<World> run(const WorldSpec& spec, int attempt);
};

World generate_world(const WorldSpec& spec) {
  require(spec.grid_size >= 16, "generate_world: grid_size must be >= 16");
  require(spec.path_density >= 0.0 && spec.path_density <= 1.0, "generate_world: path_density outside [0,1]");
  require(spec.bug_ratio >= 0.0 && spec.bug_ratio <= 1.0, "generate_world: bug_ratio outside [0,1]");
  require(spec.n_ooi >= 0 && spec.n_invisible_walls >= 0 && spec.n_gaps >= 0,
          "generate_world: counts must be non-negative");
  const int interior = (spec.grid_size - 2) * (spec.grid_size - 2);
  const int path_target = static_cast<int>(std::lround(spec.path_density * interior));
  if (spec.n_ooi > path_target) {
    throw InfeasibleSpec("n_ooi budget: " + std::to_string(spec.n_ooi) +
                         " OOIs exceed pathway tile count " + std::to_string(path_target));
  }
  if (spec.n_invisible_walls > spec.n_ooi) {
    throw InfeasibleSpec("n_invisible_walls budget: each invisible-wall enclosure needs an OOI");
  }
  std::string last_error = "unknown";
  for (int attempt = 0; attempt < 24; ++attempt) {
    try {
      if (auto w = WorldGenerator::run(spec, attempt)) return std::move(*w);
      last_error = "n_invisible_walls budget: enclosures leave unreachable OOIs near reachable tiles";
    } catch (const InfeasibleSpec& e) {
      last_error = e.what();
    }
  }
  throw InfeasibleSpec(last_error);
}

std::optional<World> WorldGenerator::run(const WorldSpec& spec, int attempt) {
  const int n = spec.grid_size;
  const std::string tag = "world." + std::to_string(attempt) + ".";
  Grid g{n, std::vector<TileKind>(static_cast<std::size_t>(n) * n, TileKind::Grass)};
  for (int i = 0; i < n; ++i) {
    g.at(i, 0) = g.at(i, n - 1) = g.at(0, i) = g.at(n - 1, i) = TileKind::Tree;
  }
  Rng terrain = make_stream(spec.seed, tag + "terrain");
  scatter_blobs(g, terrain, TileKind::Water, n * n / 220);
  scatter_blobs(g, terrain, TileKind::Tree, n * n / 160);

  const int interior = (n - 2) * (n - 2);
  const int path_target = static_cast<int>(std::lround(spec.path_density * interior));
  Rng paths = make_stream(spec.seed, tag + "paths");
  if (path_target > 0) carve_pathways(g, paths, path_target);

  // Gaps sit in straight pathway runs and are crossed by jumping.
  Rng gap_rng = make_stream(spec.seed, tag + "gaps");
  std::vector<TilePos> gap_candidates;
  for (int y = 2; y < n - 2; ++y) {
    for (int x = 2; x < n - 2; ++x) {
      if (straight_path_segment(g, x, y)) gap_candidates.push_back({x, y});
    }
  }
  shuffle_in_place(gap_candidates, gap_rng);
  std::vector<TilePos> gaps;
  for (const TilePos& c : gap_candidates) {
    if (static_cast<int>(gaps.size()) == spec.n_gaps) break;
    bool clear = true;
    for (const TilePos& other : gaps) clear = clear && chebyshev(c, other) > 3;
    if (!clear || !straight_path_segment(g, c.x, c.y)) continue;
    g.at(c.x, c.y) = TileKind::Gap;
    gaps.push_back(c);
  }
  if (static_cast<int>(gaps.size()) < spec.n_gaps) {
    throw InfeasibleSpec("n_gaps budget: only " + std::to_string(gaps.size()) +
                         " straight pathway runs available for " + std::to_string(spec.n_gaps) + " gaps");
  }

  World w;
  w.spec_ = spec;
  w.size_ = n;
  w.invisible_.assign(g.tiles.size(), 0);

  // Candidate OOI tiles: off-path, touching a pathway, away from gaps.
  auto ooi_candidate = [&](int x, int y) {
    if (!g.interior(x, y)) return false;
    const TileKind k = g.at(x, y);
    if (k != TileKind::Grass && k != TileKind::Tree) return false;
    if (!adjacent4(g, x, y, TileKind::Path)) return false;
    for (const TilePos& gp : gaps) {
      if (chebyshev({x, y}, gp) <= 1) return false;
    }
    return true;
  };

  Rng wall_rng = make_stream(spec.seed, tag + "walls");
  std::vector<TilePos> centers;
  {
    std::vector<TilePos> cands;
    for (int y = 3; y < n - 3; ++y) {
      for (int x = 3; x < n - 3; ++x) {
        if (!ooi_candidate(x, y)) continue;
        bool far_from_gaps = true;
        for (const TilePos& gp : gaps) far_from_gaps = far_from_gaps && chebyshev({x, y}, gp) > kEnclosureRadius + 1;
        if (far_from_gaps) cands.push_back({x, y});
      }
    }
    shuffle_in_place(cands, wall_rng);
    for (const TilePos& c : cands) {
      if (static_cast<int>(centers.size()) == spec.n_invisible_walls) break;
      bool clear = true;
      for (const TilePos& o : centers) clear = clear && chebyshev(c, o) > 2 * kEnclosureRadius + 2;
      if (clear) centers.push_back(c);
    }
    if (static_cast<int>(centers.size()) < spec.n_invisible_walls) {
      throw InfeasibleSpec("n_invisible_walls budget: room for only " + std::to_string(centers.size()) +
                           " enclosures");
    }
  }
  for (const TilePos& c : centers) {
    for (int y = c.y - kEnclosureRadius; y <= c.y + kEnclosureRadius; ++y) {
      for (int x = c.x - kEnclosureRadius; x <= c.x + kEnclosureRadius; ++x) {
        if (x < 0 || y < 0 || x >= n || y >= n) continue;
        if (chebyshev({x, y}, c) != kEnclosureRadius) continue;
        const TileKind k = g.at(x, y);
        if (k == TileKind::Grass || k == TileKind::Path) w.invisible_[static_cast<std::size_t>(y) * n + x] = 1;
      }
    }
  }

  std::vector<TilePos> placed = centers;
  for (const TilePos& c : centers) g.at(c.x, c.y) = TileKind::Ooi;
  w.tiles_ = g.tiles;

  // Remaining OOIs go next to pathway tiles of the provisional main component.
  w.finalize();
  Rng place_rng = make_stream(spec.seed, tag + "oois");
  std::vector<TilePos> cands;
  for (int y = 1; y < n - 1; ++y) {
    for (int x = 1; x < n - 1; ++x) {
      if (!ooi_candidate(x, y)) continue;
      bool outside = true;
      for (const TilePos& c : centers) outside = outside && chebyshev({x, y}, c) > kEnclosureRadius + 1;
      if (!outside) continue;
      bool touches_main = false;
      for (int h = 0; h < 8; h += 2) {
        const int nx = x + kHeadingStep[h].x, ny = y + kHeadingStep[h].y;
        touches_main = touches_main || (g.is(nx, ny, TileKind::Path) && w.in_main_component(nx, ny));
      }
      // Open ring: every neighbour walkable so the object can be circled.
      bool open_ring = true;
      for (int h = 0; h < 8; ++h) {
        const TileKind k = g.at(x + kHeadingStep[h].x, y + kHeadingStep[h].y);
        open_ring = open_ring && (k == TileKind::Grass || k == TileKind::Path);
      }
      if (touches_main && open_ring) cands.push_back({x, y});
    }
  }
  shuffle_in_place(cands, place_rng);
  for (const TilePos& c : cands) {
    if (static_cast<int>(placed.size()) == spec.n_ooi) break;
    bool clear = true;
    for (const TilePos& o : placed) clear = clear && chebyshev(c, o) > 2;
    if (!clear) continue;
    placed.push_back(c);
    g.at(c.x, c.y) = TileKind::Ooi;
  }
  if (static_cast<int>(placed.size()) < spec.n_ooi) {
    throw InfeasibleSpec("n_ooi budget: only " + std::to_string(placed.size()) +
                         " path-adjacent tiles available for " + std::to_string(spec.n_ooi) + " OOIs");
  }
  w.tiles_ = g.tiles;

  // Types round-robin over a shuffled order; bugs interleaved across types.
  Rng tex_rng = make_stream(spec.seed, tag + "textures");
  std::vector<int> order(placed.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  shuffle_in_place(order, tex_rng);
  w.oois_.resize(placed.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const int i = order[rank];
    Ooi& o = w.oois_[static_cast<std::size_t>(i)];
    o.id = i;
    o.tile = placed[static_cast<std::size_t>(i)];
    o.type = static_cast<int>(rank % kOoiTypes);
    for (int f = 0; f < 4; ++f) {
      o.faces[static_cast<std::size_t>(f)] = {static_cast<std::uint8_t>(o.type), static_cast<std::uint8_t>(f), BugKind::None};
    }
  }
  const int n_bugged = static_cast<int>(std::lround(spec.bug_ratio * static_cast<double>(placed.size())));
  // `order` ranks are type-interleaved, so a prefix is balanced across types.
  for (int rank = 0; rank < n_bugged; ++rank) {
    Ooi& o = w.oois_[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])];
    o.bugged = true;
    o.bug_kind = uniform01(tex_rng) < 0.5 ? BugKind::LowResolution : BugKind::Stretched;
    const int first = uniform_int(tex_rng, 0, 3);
    o.faces[static_cast<std::size_t>(first)].bug = o.bug_kind;
    if (uniform01(tex_rng) < 0.5) o.faces[static_cast<std::size_t>((first + 2) % 4)].bug = o.bug_kind;
  }

  w.finalize();
  // Unreachable OOIs must stay far from every reachable tile so they never trigger a test.
  for (std::size_t i = 0; i < w.oois_.size(); ++i) {
    if (w.oois_[i].reachable) continue;
    const TilePos c = w.oois_[i].tile;
    for (int y = c.y - kEnclosureRadius; y <= c.y + kEnclosureRadius; ++y) {
      for (int x = c.x - kEnclosureRadius; x <= c.x + kEnclosureRadius; ++x) {
        if (w.in_bounds(x, y) && w.in_main_component(x, y)) return std::nullopt;
      }
    }
  }
  for (std::size_t i = 0; i < w.oois_.size(); ++i) {
    const bool enclosed = std::find(centers.begin(), centers.end(), w.oois_[i].tile) != centers.end();
    if (!enclosed && !w.oois_[i].reachable) return std::nullopt;
  }
  if (w.spawns_.empty()) return std::nullopt;
  return w;
}

World build_world_for_test(int size, const std::vector<std::string>& rows, const std::vector<Ooi>& oois) {
  require(static_cast<int>(rows.size()) == size, "build_world_for_test: row count mismatch");
  World w;
  w.size_ = size;
  w.spec_.grid_size = size;
  w.tiles_.assign(static_cast<std::size_t>(size) * size, TileKind::Grass);
  w.invisible_.assign(w.tiles_.size(), 0);
  std::vector<TilePos> ooi_tiles;
  for (int y = 0; y < size; ++y) {
    require(static_cast<int>(rows[static_cast<std::size_t>(y)].size()) == size, "build_world_for_test: row width mismatch");
    for (int x = 0; x < size; ++x) {
      const char c = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
      TileKind k = TileKind::Grass;
      switch (c) {
        case '#': k = TileKind::Path; break;
        case 'T': k = TileKind::Tree; break;
        case '~': k = TileKind::Water; break;
        case '_': k = TileKind::Gap; break;
        case 'W': k = TileKind::Path; w.invisible_[w.index(x, y)] = 1; break;
        case 'O': k = TileKind::Ooi; ooi_tiles.push_back({x, y}); break;
        default: break;
      }
      w.tiles_[w.index(x, y)] = k;
    }
  }
  require(ooi_tiles.size() == oois.size(), "build_world_for_test: OOI count mismatch");
  w.oois_ = oois;
  for (std::size_t i = 0; i < oois.size(); ++i) {
    w.oois_[i].id = static_cast<int>(i);
    w.oois_[i].tile = ooi_tiles[i];
  }
  w.spec_.n_ooi = static_cast<int>(oois.size());
  w.finalize();
  return w;
}

// ------------------------------------------------------------------ transition

AgentPose transition(const World& world, const AgentPose& pose, int action) {
  require(action >= 0 && action < kActionCount, "step: invalid action id " + std::to_string(action));
  AgentPose next = pose;
  auto try_move = [&](int heading) {
    const TilePos d = kHeadingStep[static_cast<std::size_t>(heading & 7)];
    if (world.walkable(pose.x + d.x, pose.y + d.y)) {
      next.x = pose.x + d.x;
      next.y = pose.y + d.y;
    }
  };
  switch (action) {
    case kForward: try_move(pose.heading); break;
    case kBack: try_move(pose.heading + 4); break;
    case kStrafeLeft: try_move(pose.heading + 6); break;
    case kStrafeRight: try_move(pose.heading + 2); break;
    case kTurnLeft: next.heading = (pose.heading + 7) % 8; break;
    case kTurnRight: next.heading = (pose.heading + 1) % 8; break;
    case kPitchUp: next.pitch = std::min(pose.pitch + 1, kMaxPitch); break;
    case kPitchDown: next.pitch = std::max(pose.pitch - 1, -kMaxPitch); break;
    case kJump: {
      const TilePos d = kHeadingStep[static_cast<std::size_t>(pose.heading)];
      const int gx = pose.x + d.x, gy = pose.y + d.y;
      if (world.in_bounds(gx, gy) && world.kind(gx, gy) == TileKind::Gap &&
          world.walkable(pose.x + 2 * d.x, pose.y + 2 * d.y)) {
        next.x = pose.x + 2 * d.x;
        next.y = pose.y + 2 * d.y;
      }
      break;
    }
    default: break;
  }
  return next;
}

StepResult step(const World& world, const AgentPose& pose, int action, const RenderConfig& config) {
  StepResult r;
  r.pose = transition(world, pose, action);
  r.frame = render(world, r.pose, nullptr, config);
  return r;
}

// ------------------------------------------------------------------ textures

namespace {

using Rgb = std::array<std::uint8_t, 3>;
using Texels = std::array<std::array<Rgb, 8>, 8>;

Rgb scale(Rgb c, double f) {
  return {static_cast<std::uint8_t>(std::clamp(c[0] * f, 0.0, 255.0)),
          static_cast<std::uint8_t>(std::clamp(c[1] * f, 0.0, 255.0)),
          static_cast<std::uint8_t>(std::clamp(c[2] * f, 0.0, 255.0))};
}

Texels base_texels(int type, int face) {
  Texels t{};
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      Rgb c{};
      switch (type) {
        case 0:  // rock pillar: blue-grey slate with speckles
          c = ((u * 5 + v * 3) % 7 == 0) ? Rgb{92, 96, 118} : Rgb{150, 154, 178};
          break;
        case 1:  // barrel: red with dark hoops
          c = (v == 1 || v == 6) ? Rgb{110, 25, 20} : Rgb{185, 45, 35};
          break;
        case 2:  // tire: purple rubber with tread checker
          c = ((u + v) % 2 == 0 && (v == 0 || v == 7 || u == 0 || u == 7)) ? Rgb{40, 25, 60} : Rgb{80, 50, 115};
          break;
        default:  // chair: yellow with brown slats
          c = (u == 2 || u == 5) ? Rgb{140, 95, 35} : Rgb{225, 180, 50};
          break;
      }
      t[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = c;
    }
  }
  // Face marker: face k lights k+1 texels of the top row.
  for (int u = 0; u <= face; ++u) {
    t[0][static_cast<std::size_t>(u + 3)] = scale(t[0][static_cast<std::size_t>(u + 3)], 1.3);
  }
  return t;
}

Texels apply_bug(const Texels& in, BugKind bug) {
  Texels out = in;
  if (bug == BugKind::LowResolution) {
    for (int by = 0; by < 2; ++by) {
      for (int bx = 0; bx < 2; ++bx) {
        int sum[3] = {0, 0, 0};
        for (int v = 0; v < 4; ++v) {
          for (int u = 0; u < 4; ++u) {
            for (int ch = 0; ch < 3; ++ch) sum[ch] += in[static_cast<std::size_t>(by * 4 + v)][static_cast<std::size_t>(bx * 4 + u)][static_cast<std::size_t>(ch)];
          }
        }
        Rgb avg{static_cast<std::uint8_t>(sum[0] / 16), static_cast<std::uint8_t>(sum[1] / 16),
                static_cast<std::uint8_t>(sum[2] / 16)};
        for (int v = 0; v < 4; ++v) {
          for (int u = 0; u < 4; ++u) out[static_cast<std::size_t>(by * 4 + v)][static_cast<std::size_t>(bx * 4 + u)] = avg;
        }
      }
    }
  } else if (bug == BugKind::Stretched) {
    for (int v = 0; v < 8; ++v) {
      for (int u = 0; u < 8; ++u) out[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = in[static_cast<std::size_t>(v)][static_cast<std::size_t>(u / 2)];
    }
  }
  return out;
}

}  // namespace

std::array<std::array<std::array<std::uint8_t, 3>, 8>, 8> face_texels(const FaceTexture& tex) {
  return apply_bug(base_texels(tex.ooi_type, tex.face), tex.bug);
}

// ------------------------------------------------------------------ rendering

namespace {

constexpr Rgb kTreeLight{35, 95, 45};
constexpr Rgb kTreeDark{22, 68, 30};

Rgb floor_color(const World& world, int tx, int ty, double fx, double fy) {
  Rgb base{70, 140, 65};
  if (world.in_bounds(tx, ty)) {
    switch (world.kind(tx, ty)) {
      case TileKind::Grass: base = {70, 140, 65}; break;
      case TileKind::Path: base = {205, 190, 155}; break;
      case TileKind::Water: base = {45, 95, 190}; break;
      case TileKind::Gap: base = {12, 10, 10}; break;
      case TileKind::Tree: base = {30, 80, 35}; break;
      case TileKind::Ooi: base = {90, 90, 90}; break;
    }
  }
  const std::uint64_t h = splitmix64(static_cast<std::uint64_t>(tx) * 7919ULL + static_cast<std::uint64_t>(ty) * 104729ULL);
  double f = 0.9 + 0.2 * static_cast<double>(h % 256) / 255.0;
  const bool edge = fx < 0.08 || fx > 0.92 || fy < 0.08 || fy > 0.92;
  if (edge) f *= 0.78;
  return scale(base, f);
}

}  // namespace

Frame render(const World& world, const AgentPose& pose, RenderInfo* info, const RenderConfig& cfg) {
  const int W = cfg.width, H = cfg.height;
  const int margin = kMaxPitch;
  const int HV = H + 2 * margin;
  const double horizon = HV / 2.0;
  std::vector<Rgb> canvas(static_cast<std::size_t>(W) * HV);
  struct ColumnHit {
    int ooi = -1;
    int face = 0;
    int top = 0, bottom = 0;
  };
  std::vector<ColumnHit> hits(static_cast<std::size_t>(W));

  const TilePos hd = kHeadingStep[static_cast<std::size_t>(pose.heading & 7)];
  const double norm = std::hypot(hd.x, hd.y);
  const double dir_x = hd.x / norm, dir_y = hd.y / norm;
  const double plane_x = -dir_y, plane_y = dir_x;
  const double pos_x = pose.x + 0.5, pos_y = pose.y + 0.5;

  for (int col = 0; col < W; ++col) {
    const double cam = 2.0 * (col + 0.5) / W - 1.0;
    const double rx = dir_x + plane_x * cam;
    const double ry = dir_y + plane_y * cam;
    int mx = pose.x, my = pose.y;
    const double ddx = rx == 0.0 ? 1e30 : std::abs(1.0 / rx);
    const double ddy = ry == 0.0 ? 1e30 : std::abs(1.0 / ry);
    const int sx = rx < 0 ? -1 : 1;
    const int sy = ry < 0 ? -1 : 1;
    double side_x = rx < 0 ? (pos_x - mx) * ddx : (mx + 1.0 - pos_x) * ddx;
    double side_y = ry < 0 ? (pos_y - my) * ddy : (my + 1.0 - pos_y) * ddy;
    int side = 0;
    bool hit = false;
    double perp = 0.0;
    while (true) {
      if (side_x < side_y) {
        perp = side_x;
        side_x += ddx;
        mx += sx;
        side = 0;
      } else {
        perp = side_y;
        side_y += ddy;
        my += sy;
        side = 1;
      }
      if (perp > cfg.max_distance) break;
      if (world.blocks_ray(mx, my)) {
        hit = true;
        break;
      }
    }
    int top = static_cast<int>(std::lround(horizon));
    int bottom = top;
    if (hit) {
      perp = std::max(perp, 1e-3);
      const double line = H / perp;
      top = static_cast<int>(std::floor(horizon - line / 2.0));
      bottom = static_cast<int>(std::ceil(horizon + line / 2.0));
      int face = 0;
      if (side == 0) face = sx > 0 ? 3 : 1;
      else face = sy > 0 ? 0 : 2;
      double wall = side == 0 ? pos_y + perp * ry : pos_x + perp * rx;
      wall -= std::floor(wall);
      if ((side == 0 && rx < 0) || (side == 1 && ry > 0)) wall = 1.0 - wall;
      const int u = std::clamp(static_cast<int>(wall * 8.0), 0, 7);
      const double shade = side == 1 ? 0.8 : 1.0;
      const int ooi = world.in_bounds(mx, my) ? world.ooi_at(mx, my) : -1;
      std::optional<Texels> tex;
      if (ooi >= 0) tex = face_texels(world.oois()[static_cast<std::size_t>(ooi)].faces[static_cast<std::size_t>(face)]);
      for (int row = std::max(top, 0); row < std::min(bottom, HV); ++row) {
        const double tv = (row + 0.5 - (horizon - line / 2.0)) / line;
        const int v = std::clamp(static_cast<int>(tv * 8.0), 0, 7);
        Rgb c;
        if (tex) c = (*tex)[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)];
        else c = ((u + v) % 3 == 0) ? kTreeDark : kTreeLight;
        canvas[static_cast<std::size_t>(row) * W + col] = scale(c, shade);
      }
      hits[static_cast<std::size_t>(col)] = {ooi, face, top, bottom};
    }
    for (int row = 0; row < std::min(top, HV); ++row) {
      canvas[static_cast<std::size_t>(row) * W + col] = {static_cast<std::uint8_t>(120 + row * 2),
                                                        static_cast<std::uint8_t>(170 + row * 2),
                                                        static_cast<std::uint8_t>(235)};
    }
    for (int row = std::max(bottom, static_cast<int>(std::ceil(horizon))); row < HV; ++row) {
      const double p = row + 0.5 - horizon;
      const double dist = (0.5 * H) / p;
      const double wx = pos_x + dist * rx;
      const double wy = pos_y + dist * ry;
      const int tx = static_cast<int>(std::floor(wx)), ty = static_cast<int>(std::floor(wy));
      canvas[static_cast<std::size_t>(row) * W + col] = floor_color(world, tx, ty, wx - tx, wy - ty);
    }
  }

  const int window_top = margin - pose.pitch;
  Frame frame(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const Rgb& c = canvas[static_cast<std::size_t>(y + window_top) * W + x];
      std::uint8_t* p = frame.at(x, y);
      p[0] = c[0];
      p[1] = c[1];
      p[2] = c[2];
    }
  }

  if (info) {
    info->visible.clear();
    for (int col = 0; col < W; ++col) {
      const ColumnHit& h = hits[static_cast<std::size_t>(col)];
      if (h.ooi < 0) continue;
      const int y0 = std::max(h.top - window_top, 0);
      const int y1 = std::min(h.bottom - window_top, H);
      if (y1 <= y0) continue;
      auto it = std::find_if(info->visible.begin(), info->visible.end(),
                             [&](const VisibleOoi& v) { return v.ooi_index == h.ooi; });
      if (it == info->visible.end()) {
        info->visible.push_back({h.ooi, col, y0, col + 1, y1, static_cast<std::uint8_t>(1u << h.face)});
      } else {
        it->x0 = std::min(it->x0, col);
        it->x1 = std::max(it->x1, col + 1);
        it->y0 = std::min(it->y0, y0);
        it->y1 = std::max(it->y1, y1);
        it->faces_seen = static_cast<std::uint8_t>(it->faces_seen | (1u << h.face));
      }
    }
  }
  return frame;
}

// ------------------------------------------------------------------ birds-eye map

Image render_birdseye(const World& world, const std::vector<std::vector<TilePos>>& traces,
                      const std::map<int, TestStatus>& ooi_status) {
  const int n = world.size();
  Image img(n, n);
  auto paint = [&](int x, int y, const std::array<std::uint8_t, 3>& c) {
    std::uint8_t* p = img.at(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  };
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      paint(x, y, world.kind(x, y) == TileKind::Path ? birdseye_colors::kPath : birdseye_colors::kOther);
    }
  }
  for (const auto& trace : traces) {
    for (const TilePos& t : trace) {
      if (world.in_bounds(t.x, t.y)) paint(t.x, t.y, birdseye_colors::kTrace);
    }
  }
  for (std::size_t i = 0; i < world.oois().size(); ++i) {
    const Ooi& o = world.oois()[i];
    TestStatus s = TestStatus::Missed;
    if (auto it = ooi_status.find(o.id); it != ooi_status.end()) s = it->second;
    const auto& c = s == TestStatus::Success ? birdseye_colors::kSuccess
                    : s == TestStatus::Failed ? birdseye_colors::kFailed
                                              : birdseye_colors::kMissed;
    paint(o.tile.x, o.tile.y, c);
  }
  return img;
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  ByteWriter w;
  w.text("P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n");
  w.bytes(image.pixels);
  return w.buffer();
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  write_file_atomic(path, encode_ppm(image));
}

Image read_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::string header;
  std::size_t pos = 0;
  int fields = 0;
  std::string tokens[4];
  while (fields < 4 && pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos++]);
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tokens[fields].empty()) ++fields;
      continue;
    }
    tokens[fields] += c;
  }
  if (fields < 4 || tokens[0] != "P6") throw FormatError(path.string() + ": not a binary PPM");
  Image img(std::stoi(tokens[1]), std::stoi(tokens[2]));
  if (bytes.size() - pos < img.pixels.size()) throw FormatError(path.string() + ": truncated file");
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
            bytes.begin() + static_cast<std::ptrdiff_t>(pos + img.pixels.size()), img.pixels.begin());
  return img;
}

}  // namespace ppgta
