#include "ppgta/vision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ppgta/io.hpp"

namespace ppgta {

BoundingBox clip_box(const BoundingBox& box, int width, int height) {
  BoundingBox b = box;
  b.x0 = std::clamp(b.x0, 0, width);
  b.x1 = std::clamp(b.x1, 0, width);
  b.y0 = std::clamp(b.y0, 0, height);
  b.y1 = std::clamp(b.y1, 0, height);
  return b;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const int ix = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const int iy = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = static_cast<double>(ix) * iy;
  const double uni = static_cast<double>(a.area()) + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

const BoundingBox* largest_box(const DetectionSet& set) {
  const BoundingBox* best = nullptr;
  for (const BoundingBox& b : set.boxes) {
    if (!best || b.area() > best->area()) best = &b;
  }
  return best;
}

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  // Integer form of round(0.299R + 0.587G + 0.114B); exact for 8-bit inputs.
  const int v = 299 * r + 587 * g + 114 * b;
  return static_cast<std::uint8_t>((v + 500) / 1000);
}

Frame grayscale(const Frame& frame) {
  Frame out = frame;
  for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
    const std::uint8_t g = luma(out.pixels[i], out.pixels[i + 1], out.pixels[i + 2]);
    out.pixels[i] = out.pixels[i + 1] = out.pixels[i + 2] = g;
  }
  return out;
}

Frame od_mask(const Frame& frame, const BoundingBox& box) {
  const BoundingBox b = clip_box(box, frame.width, frame.height);
  Frame out = grayscale(frame);
  for (int y = b.y0; y < b.y1; ++y) {
    for (int x = b.x0; x < b.x1; ++x) {
      std::copy_n(frame.at(x, y), 3, out.at(x, y));
    }
  }
  return out;
}

Frame downsample(const Frame& frame, int width, int height) {
  require(width > 0 && height > 0 && width <= frame.width && height <= frame.height,
          "downsample: target extents must lie in [1, source extents]");
  Frame out(width, height);
  for (int oy = 0; oy < height; ++oy) {
    const int y0 = oy * frame.height / height, y1 = (oy + 1) * frame.height / height;
    for (int ox = 0; ox < width; ++ox) {
      const int x0 = ox * frame.width / width, x1 = (ox + 1) * frame.width / width;
      const int count = (x1 - x0) * (y1 - y0);
      for (int c = 0; c < 3; ++c) {
        int sum = 0;
        for (int y = y0; y < y1; ++y) {
          for (int x = x0; x < x1; ++x) sum += frame.at(x, y)[c];
        }
        out.at(ox, oy)[c] = static_cast<std::uint8_t>((2 * sum + count) / (2 * count));
      }
    }
  }
  return out;
}

DetectionSet oracle_detect(const World& world, const RenderInfo& info, int frame_id, int min_area) {
  DetectionSet set;
  set.frame_id = frame_id;
  for (const VisibleOoi& v : info.visible) {
    if (v.area() < min_area) continue;
    set.boxes.push_back({v.x0, v.y0, v.x1, v.y1, world.oois()[static_cast<std::size_t>(v.ooi_index)].type, 1.0});
  }
  return set;
}

// ------------------------------------------------------------------ few-shot detector

int FewShotDetector::bin_of(const std::uint8_t* rgb) {
  constexpr int shift = 8 - 3;  // 8 levels
  return ((rgb[0] >> shift) * kLevels + (rgb[1] >> shift)) * kLevels + (rgb[2] >> shift);
}

namespace {

using Histogram = FewShotDetector::Histogram;

void normalize(Histogram& h) {
  const double total = std::accumulate(h.begin(), h.end(), 0.0);
  if (total <= 0.0) return;
  for (double& v : h) v /= total;
}

double intersection(const Histogram& a, const Histogram& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::min(a[i], b[i]);
  return s;
}

bool inside_any(const std::vector<BoundingBox>& boxes, int x, int y) {
  for (const BoundingBox& b : boxes) {
    if (x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1) return true;
  }
  return false;
}

}  // namespace

void FewShotDetector::train(const std::vector<LabeledFrame>& examples, int shots_per_type) {
  require(shots_per_type > 0, "FewShotDetector::train: shots_per_type must be positive");
  type_hist_ = {};
  background_ = {};
  std::array<int, kOoiTypes> shots{};
  for (const LabeledFrame& ex : examples) {
    for (const BoundingBox& box : ex.boxes) {
      require(box.ooi_type >= 0 && box.ooi_type < kOoiTypes, "FewShotDetector::train: bad type label");
      if (shots[static_cast<std::size_t>(box.ooi_type)] >= shots_per_type) continue;
      ++shots[static_cast<std::size_t>(box.ooi_type)];
      const BoundingBox b = clip_box(box, ex.frame.width, ex.frame.height);
      for (int y = b.y0; y < b.y1; ++y) {
        for (int x = b.x0; x < b.x1; ++x) type_hist_[static_cast<std::size_t>(box.ooi_type)][static_cast<std::size_t>(bin_of(ex.frame.at(x, y)))] += 1.0;
      }
    }
    for (int y = 0; y < ex.frame.height; ++y) {
      for (int x = 0; x < ex.frame.width; ++x) {
        if (!inside_any(ex.boxes, x, y)) background_[static_cast<std::size_t>(bin_of(ex.frame.at(x, y)))] += 1.0;
      }
    }
  }
  for (int t = 0; t < kOoiTypes; ++t) {
    require(shots[static_cast<std::size_t>(t)] > 0,
            std::string("FewShotDetector::train: no labeled examples for type ") + ooi_type_name(t));
    normalize(type_hist_[static_cast<std::size_t>(t)]);
  }
  normalize(background_);
  trained_ = true;
}

DetectionSet FewShotDetector::detect(const Frame& frame, int frame_id) const {
  require(trained_, "FewShotDetector::detect: detector is untrained");
  const int W = frame.width, H = frame.height;
  // Per-pixel label: type with the highest likelihood, if it beats the background.
  constexpr double kFloor = 1e-4;
  std::vector<int> label(static_cast<std::size_t>(W) * H, -1);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const auto bin = static_cast<std::size_t>(bin_of(frame.at(x, y)));
      double best = background_[bin] + kFloor;
      for (int t = 0; t < kOoiTypes; ++t) {
        if (type_hist_[static_cast<std::size_t>(t)][bin] > best) {
          best = type_hist_[static_cast<std::size_t>(t)][bin];
          label[static_cast<std::size_t>(y) * W + x] = t;
        }
      }
    }
  }
  // 8-connected components per label.
  std::vector<BoundingBox> comps;
  std::vector<std::uint8_t> seen(label.size(), 0);
  std::vector<int> stack;
  for (std::size_t start = 0; start < label.size(); ++start) {
    if (label[start] < 0 || seen[start]) continue;
    const int t = label[start];
    BoundingBox box{W, H, 0, 0, t, 0.0};
    stack.assign(1, static_cast<int>(start));
    seen[start] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int px = p % W, py = p / W;
      box.x0 = std::min(box.x0, px);
      box.y0 = std::min(box.y0, py);
      box.x1 = std::max(box.x1, px + 1);
      box.y1 = std::max(box.y1, py + 1);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int qx = px + dx, qy = py + dy;
          if (qx < 0 || qy < 0 || qx >= W || qy >= H) continue;
          const auto q = static_cast<std::size_t>(qy) * W + qx;
          if (seen[q] || label[q] != t) continue;
          seen[q] = 1;
          stack.push_back(static_cast<int>(q));
        }
      }
    }
    comps.push_back(box);
  }
  // Merge same-type boxes that touch.
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t i = 0; i < comps.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < comps.size(); ++j) {
        const BoundingBox& a = comps[i];
        const BoundingBox& b = comps[j];
        if (a.ooi_type != b.ooi_type) continue;
        if (a.x0 > b.x1 || b.x0 > a.x1 || a.y0 > b.y1 || b.y0 > a.y1) continue;
        comps[i] = {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1),
                    a.ooi_type, 0.0};
        comps.erase(comps.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
        break;
      }
    }
  }
  DetectionSet set;
  set.frame_id = frame_id;
  for (BoundingBox& box : comps) {
    if (box.area() < kMinBoxArea) continue;
    Histogram h{};
    for (int y = box.y0; y < box.y1; ++y) {
      for (int x = box.x0; x < box.x1; ++x) h[static_cast<std::size_t>(bin_of(frame.at(x, y)))] += 1.0;
    }
    normalize(h);
    box.score = intersection(h, type_hist_[static_cast<std::size_t>(box.ooi_type)]);
    set.boxes.push_back(box);
  }
  std::stable_sort(set.boxes.begin(), set.boxes.end(),
                   [](const BoundingBox& a, const BoundingBox& b) { return a.score > b.score; });
  return set;
}

void FewShotDetector::save(const std::filesystem::path& path) const {
  require(trained_, "FewShotDetector::save: detector is untrained");
  ByteWriter w;
  w.text("PFSD");
  w.u16(2);
  w.u16(kBins);
  // Doubles stored bit-exact so a reloaded detector scores identically.
  auto put = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    w.u64(bits);
  };
  for (const Histogram& h : type_hist_) {
    for (double v : h) put(v);
  }
  for (double v : background_) put(v);
  write_file_atomic(path, w.buffer());
}

FewShotDetector FewShotDetector::load(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, path.string());
  if (r.text(4) != "PFSD") throw FormatError(path.string() + ": bad detector magic");
  if (r.u16() != 2) throw FormatError(path.string() + ": unsupported detector version");
  if (r.u16() != kBins) throw FormatError(path.string() + ": histogram size mismatch");
  FewShotDetector d;
  auto get = [&] {
    const std::uint64_t bits = r.u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  };
  for (Histogram& h : d.type_hist_) {
    for (double& v : h) v = get();
  }
  for (double& v : d.background_) v = get();
  d.trained_ = true;
  return d;
}

Detector Detector::oracle(const World& world) {
  Detector d;
  d.kind_ = Kind::Oracle;
  d.world_ = &world;
  return d;
}

Detector Detector::fewshot(FewShotDetector model) {
  require(model.trained(), "Detector::fewshot: detector is untrained");
  Detector d;
  d.kind_ = Kind::FewShot;
  d.model_ = std::move(model);
  return d;
}

DetectionSet Detector::detect(const Frame& frame, const AgentPose& pose, int frame_id) const {
  if (kind_ == Kind::FewShot) return model_.detect(frame, frame_id);
  require(world_ != nullptr, "Detector: oracle has no world attached");
  RenderInfo info;
  RenderConfig cfg;
  cfg.width = frame.width;
  cfg.height = frame.height;
  render(*world_, pose, &info, cfg);
  return oracle_detect(*world_, info, frame_id);
}

Frame mask_with(const Frame& frame, const DetectionSet& detections) {
  const BoundingBox* box = largest_box(detections);
  return box ? od_mask(frame, *box) : frame;
}

std::vector<LabeledFrame> sample_labeled_frames(const World& world, int count, std::uint64_t seed, bool require_ooi) {
  const auto& spawns = world.spawn_tiles();
  require(!spawns.empty(), "sample_labeled_frames: world has no spawn tiles");
  // Poses anywhere in the main component, biased towards OOI neighbourhoods.
  std::vector<TilePos> tiles;
  for (int y = 0; y < world.size(); ++y) {
    for (int x = 0; x < world.size(); ++x) {
      if (world.in_main_component(x, y) && world.walkable(x, y)) tiles.push_back({x, y});
    }
  }
  Rng rng = make_stream(seed, "vision.sample");
  std::vector<LabeledFrame> out;
  int guard = 0;
  while (static_cast<int>(out.size()) < count && guard++ < count * 200) {
    const TilePos t = tiles[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(tiles.size()) - 1))];
    const AgentPose pose{t.x, t.y, uniform_int(rng, 0, 7), uniform_int(rng, -kMaxPitch, kMaxPitch)};
    RenderInfo info;
    LabeledFrame lf;
    lf.pose = pose;
    lf.frame = render(world, pose, &info);
    lf.boxes = oracle_detect(world, info).boxes;
    if (require_ooi && lf.boxes.empty()) continue;
    out.push_back(std::move(lf));
  }
  return out;
}

// ------------------------------------------------------------------ average precision

double ApResult::mean() const {
  if (per_type.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [type, ap] : per_type) s += ap;
  return s / static_cast<double>(per_type.size());
}

ApResult average_precision(const std::vector<DetectionSet>& detections,
                           const std::vector<DetectionSet>& ground_truth, double iou_threshold) {
  std::map<int, std::vector<const BoundingBox*>> gt_by_frame;
  std::map<int, int> gt_count;
  for (const DetectionSet& s : ground_truth) {
    for (const BoundingBox& b : s.boxes) {
      gt_by_frame[s.frame_id].push_back(&b);
      ++gt_count[b.ooi_type];
    }
  }
  for (const DetectionSet& s : detections) {
    require(gt_by_frame.count(s.frame_id) || std::any_of(ground_truth.begin(), ground_truth.end(),
                                                         [&](const DetectionSet& g) { return g.frame_id == s.frame_id; }),
            "average_precision: detection frame id " + std::to_string(s.frame_id) + " has no ground-truth entry");
  }

  ApResult result;
  for (const auto& [type, n_gt] : gt_count) {
    struct Det {
      double score;
      int frame;
      const BoundingBox* box;
    };
    std::vector<Det> dets;
    for (const DetectionSet& s : detections) {
      for (const BoundingBox& b : s.boxes) {
        if (b.ooi_type == type) dets.push_back({b.score, s.frame_id, &b});
      }
    }
    std::stable_sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) { return a.score > b.score; });

    std::map<const BoundingBox*, bool> used;
    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (const Det& d : dets) {
      const BoundingBox* match = nullptr;
      double best = iou_threshold;
      auto it = gt_by_frame.find(d.frame);
      if (it != gt_by_frame.end()) {
        for (const BoundingBox* g : it->second) {
          if (g->ooi_type != type || used[g]) continue;
          const double o = iou(*d.box, *g);
          if (o >= best) {
            best = o;
            match = g;
          }
        }
      }
      if (match) {
        used[match] = true;
        ++tp;
      } else {
        ++fp;
      }
      precision.push_back(static_cast<double>(tp) / (tp + fp));
      recall.push_back(static_cast<double>(tp) / n_gt);
    }
    // Interpolated precision envelope, integrated over recall steps.
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
      if (recall[i] <= prev_recall) continue;
      double pmax = 0.0;
      for (std::size_t j = i; j < precision.size(); ++j) pmax = std::max(pmax, precision[j]);
      ap += (recall[i] - prev_recall) * pmax;
      prev_recall = recall[i];
    }
    result.per_type[type] = ap;
  }
  return result;
}

void write_labels(const std::filesystem::path& path, const std::vector<DetectionSet>& sets) {
  std::ostringstream out;
  out.precision(17);
  for (const DetectionSet& s : sets) {
    std::vector<BoundingBox> boxes = s.boxes;
    std::stable_sort(boxes.begin(), boxes.end(), [](const BoundingBox& a, const BoundingBox& b) { return a.score > b.score; });
    for (const BoundingBox& b : boxes) {
      out << s.frame_id << ' ' << b.ooi_type << ' ' << b.x0 << ' ' << b.y0 << ' ' << b.x1 << ' ' << b.y1 << ' '
          << b.score << '\n';
    }
  }
  write_text_atomic(path, out.str());
}

std::vector<DetectionSet> read_labels(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<DetectionSet> sets;
  std::map<int, std::size_t> where;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int frame = 0;
    BoundingBox b;
    if (!(ls >> frame >> b.ooi_type >> b.x0 >> b.y0 >> b.x1 >> b.y1 >> b.score)) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed label line");
    }
    auto [it, inserted] = where.emplace(frame, sets.size());
    if (inserted) sets.push_back({frame, {}});
    sets[it->second].boxes.push_back(b);
  }
  return sets;
}

}  // namespace ppgta
