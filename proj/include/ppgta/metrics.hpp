#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ppgta/explore.hpp"

namespace ppgta {

struct MetricsSummary {
  int episodes = 0;
  int pathway_tiles = 0;
  int covered_tiles = 0;
  double coverage = 0.0;  // fraction of pathway tiles visited in any episode
  int total_oois = 0;
  int unreachable_oois = 0;
  int tested = 0;
  int successes = 0;
  double success_rate = 0.0;  // successes / all OOIs, unreachable included
  std::map<int, double> ap;   // per OOI type
  std::vector<int> cumulative_tested;
  friend bool operator==(const MetricsSummary&, const MetricsSummary&) = default;
};

/// First verdict per OOI across the reports, in episode order.
std::map<int, OoiVerdict> first_verdicts(const std::vector<EpisodeReport>& reports);

/// Reports must all come from `world`; zero reports give an all-zero summary.
MetricsSummary aggregate_metrics(const std::vector<EpisodeReport>& reports, const World& world,
                                 const std::map<int, double>& ap = {});

std::string format_summary(const MetricsSummary& m);
/// `episode,tested` rows of the cumulative tested-OOI series.
std::string tested_curve_csv(const MetricsSummary& m);

/// One pixel per tile with every visited tile marked.
Image coverage_map(const World& world, const std::vector<EpisodeReport>& reports);
/// One pixel per tile with OOIs coloured by verdict.
Image test_status_map(const World& world, const std::vector<EpisodeReport>& reports);

/// Episode records; each names `trace_file` as its reward-trace reference.
void write_episode_reports(const std::filesystem::path& path, const std::vector<EpisodeReport>& reports,
                           const std::string& trace_file);
/// Traces are not loaded; see read_trace_csv.
std::vector<EpisodeReport> read_episode_reports(const std::filesystem::path& path);

/// Columns `episode t r_e r_p alpha r_c r_e_raw`, values printed round-trip exact.
void write_trace_csv(const std::filesystem::path& path, const std::vector<EpisodeReport>& reports);
std::map<int, std::vector<TraceRow>> read_trace_csv(const std::filesystem::path& path);

}  // namespace ppgta
