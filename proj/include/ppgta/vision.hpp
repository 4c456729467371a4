#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <vector>

#include "ppgta/world.hpp"

namespace ppgta {

struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
  int ooi_type = 0;
  double score = 1.0;

  int area() const { return std::max(0, x1 - x0) * std::max(0, y1 - y0); }
  bool valid() const { return x0 < x1 && y0 < y1; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

BoundingBox clip_box(const BoundingBox& box, int width, int height);
double iou(const BoundingBox& a, const BoundingBox& b);

struct DetectionSet {
  int frame_id = 0;
  std::vector<BoundingBox> boxes;
};

/// Largest-area box, the "OOI under test" for masking.
const BoundingBox* largest_box(const DetectionSet& set);

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);
Frame grayscale(const Frame& frame);
/// Gray everywhere except inside `box`.
Frame od_mask(const Frame& frame, const BoundingBox& box);
/// Box-filter pooling; bins are [floor(i*W/w), floor((i+1)*W/w)), means rounded half up.
Frame downsample(const Frame& frame, int width, int height);

/// Boxes smaller than this are neither labeled nor reported.
inline constexpr int kMinBoxArea = 12;

/// Ground-truth projection from renderer geometry; score 1.0.
DetectionSet oracle_detect(const World& world, const RenderInfo& info, int frame_id = 0,
                           int min_area = kMinBoxArea);

struct LabeledFrame {
  Frame frame;
  AgentPose pose;
  std::vector<BoundingBox> boxes;
};

/// Naive few-shot detector: quantized color histograms per OOI type against a background
/// histogram, per-pixel classification, connected components, histogram-intersection scores.
class FewShotDetector {
 public:
  static constexpr int kLevels = 8;
  static constexpr int kBins = kLevels * kLevels * kLevels;
  using Histogram = std::array<double, kBins>;

  FewShotDetector() = default;

  /// Uses up to `shots_per_type` boxes per type.
  void train(const std::vector<LabeledFrame>& examples, int shots_per_type = 20);
  bool trained() const { return trained_; }
  DetectionSet detect(const Frame& frame, int frame_id = 0) const;

  void save(const std::filesystem::path& path) const;
  static FewShotDetector load(const std::filesystem::path& path);

  static int bin_of(const std::uint8_t* rgb);

 private:
  bool trained_ = false;
  std::array<Histogram, kOoiTypes> type_hist_{};
  Histogram background_{};
};

/// Detector handle used by the pipelines. The oracle re-renders the pose to recover geometry;
/// the few-shot detector looks only at pixels.
class Detector {
 public:
  enum class Kind { Oracle, FewShot };

  static Detector oracle(const World& world);
  static Detector fewshot(FewShotDetector model);

  Kind kind() const { return kind_; }
  DetectionSet detect(const Frame& frame, const AgentPose& pose, int frame_id = 0) const;

 private:
  Kind kind_ = Kind::Oracle;
  const World* world_ = nullptr;
  FewShotDetector model_;
};

/// OD mask with the largest detected box; identity when nothing is detected.
Frame mask_with(const Frame& frame, const DetectionSet& detections);

/// Labeled frames sampled from random main-component poses of a world.
std::vector<LabeledFrame> sample_labeled_frames(const World& world, int count, std::uint64_t seed,
                                                bool require_ooi = false);

struct ApResult {
  std::map<int, double> per_type;  // types without ground truth are absent
  double mean() const;
};

/// All-point interpolated AP with greedy IoU matching, one class at a time.
ApResult average_precision(const std::vector<DetectionSet>& detections,
                           const std::vector<DetectionSet>& ground_truth,
                           double iou_threshold = 0.5);

/// Label file: one line per box `frame_id type x0 y0 x1 y1 score`, scores descending per frame.
void write_labels(const std::filesystem::path& path, const std::vector<DetectionSet>& sets);
std::vector<DetectionSet> read_labels(const std::filesystem::path& path);

}  // namespace ppgta
