#include "ppgta/metrics.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "ppgta/io.hpp"

namespace ppgta {

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& origin) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw FormatError(origin + ": '" + s + "' is not a number");
  return v;
}

}  // namespace

std::map<int, OoiVerdict> first_verdicts(const std::vector<EpisodeReport>& reports) {
  std::map<int, OoiVerdict> out;
  for (const auto& r : reports) {
    for (const auto& v : r.tests) out.emplace(v.ooi, v);
  }
  return out;
}

MetricsSummary aggregate_metrics(const std::vector<EpisodeReport>& reports, const World& world,
                                 const std::map<int, double>& ap) {
  MetricsSummary m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    require(r.world_seed == world.spec().seed, "aggregate_metrics: reports come from different worlds");
  }
  m.episodes = static_cast<int>(reports.size());
  m.pathway_tiles = world.pathway_tile_count();
  std::set<TilePos> covered;
  std::set<int> tested;
  for (const auto& r : reports) {
    for (const auto& run : r.visited) {
      if (world.is_pathway(run.tile.x, run.tile.y)) covered.insert(run.tile);
    }
    for (const auto& v : r.tests) tested.insert(v.ooi);
    m.cumulative_tested.push_back(static_cast<int>(tested.size()));
  }
  m.covered_tiles = static_cast<int>(covered.size());
  m.coverage = m.pathway_tiles ? static_cast<double>(m.covered_tiles) / m.pathway_tiles : 0.0;
  m.total_oois = static_cast<int>(world.oois().size());
  for (const auto& o : world.oois()) m.unreachable_oois += o.reachable ? 0 : 1;
  for (const auto& [id, v] : first_verdicts(reports)) {
    ++m.tested;
    m.successes += v.success ? 1 : 0;
  }
  m.success_rate = m.total_oois ? static_cast<double>(m.successes) / m.total_oois : 0.0;
  m.ap = ap;
  return m;
}

std::string format_summary(const MetricsSummary& m) {
  std::ostringstream out;
  out << "episodes=" << m.episodes << "\n"
      << "pathway_tiles=" << m.pathway_tiles << "\n"
      << "covered_tiles=" << m.covered_tiles << "\n"
      << "coverage=" << exact(m.coverage) << "\n"
      << "total_oois=" << m.total_oois << "\n"
      << "unreachable_oois=" << m.unreachable_oois << "\n"
      << "tested=" << m.tested << "\n"
      << "successes=" << m.successes << "\n"
      << "success_rate=" << exact(m.success_rate) << "\n";
  for (const auto& [type, v] : m.ap) out << "ap." << ooi_type_name(type) << "=" << exact(v) << "\n";
  return out.str();
}

std::string tested_curve_csv(const MetricsSummary& m) {
  std::string out = "episode,tested\n";
  for (std::size_t i = 0; i < m.cumulative_tested.size(); ++i) {
    out += std::to_string(i + 1) + "," + std::to_string(m.cumulative_tested[i]) + "\n";
  }
  return out;
}

Image coverage_map(const World& world, const std::vector<EpisodeReport>& reports) {
  std::vector<std::vector<TilePos>> traces;
  for (const auto& r : reports) traces.push_back(run_length_decode(r.visited));
  return render_birdseye(world, traces, {});
}

Image test_status_map(const World& world, const std::vector<EpisodeReport>& reports) {
  std::map<int, TestStatus> status;
  for (const auto& [id, v] : first_verdicts(reports)) status[id] = v.success ? TestStatus::Success : TestStatus::Failed;
  return render_birdseye(world, {}, status);
}

// Line format:
//   episode <id> world <seed> spawn <x> <y> trace <file>
//   visited <runs> (<x> <y> <count>)*
//   test <ooi> <success 0|1> <js>
//   end
void write_episode_reports(const std::filesystem::path& path, const std::vector<EpisodeReport>& reports,
                           const std::string& trace_file) {
  std::ostringstream out;
  for (const auto& r : reports) {
    out << "episode " << r.episode << " world " << r.world_seed << " spawn " << r.spawn.x << " " << r.spawn.y
        << " trace " << trace_file << "\n";
    out << "visited " << r.visited.size();
    for (const auto& run : r.visited) out << " " << run.tile.x << " " << run.tile.y << " " << run.count;
    out << "\n";
    for (const auto& v : r.tests) out << "test " << v.ooi << " " << (v.success ? 1 : 0) << " " << exact(v.js) << "\n";
    out << "end\n";
  }
  write_text_atomic(path, out.str());
}

std::vector<EpisodeReport> read_episode_reports(const std::filesystem::path& path) {
  const std::string origin = path.string();
  std::istringstream in(read_text_file(path));
  std::vector<EpisodeReport> out;
  std::string word;
  auto expect = [&](const char* w) {
    if (!(in >> word) || word != w) throw FormatError(origin + ": expected '" + w + "'");
  };
  while (in >> word) {
    if (word != "episode") throw FormatError(origin + ": expected 'episode', got '" + word + "'");
    EpisodeReport r;
    std::string trace;
    in >> r.episode;
    expect("world");
    in >> r.world_seed;
    expect("spawn");
    in >> r.spawn.x >> r.spawn.y;
    expect("trace");
    in >> trace;
    expect("visited");
    std::size_t runs = 0;
    in >> runs;
    for (std::size_t i = 0; i < runs && in; ++i) {
      TileRun run;
      in >> run.tile.x >> run.tile.y >> run.count;
      r.visited.push_back(run);
    }
    if (!in) throw FormatError(origin + ": truncated episode record");
    while (in >> word && word == "test") {
      OoiVerdict v;
      int success = 0;
      std::string js;
      in >> v.ooi >> success >> js;
      v.success = success != 0;
      v.js = parse_double(js, origin);
      v.episode = r.episode;
      r.tests.push_back(v);
    }
    if (word != "end") throw FormatError(origin + ": episode record not terminated");
    out.push_back(std::move(r));
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<EpisodeReport>& reports) {
  std::string out = "episode,t,r_e,r_p,alpha,r_c,r_e_raw\n";
  for (const auto& r : reports) {
    for (const auto& row : r.trace) {
      out += std::to_string(r.episode) + "," + std::to_string(row.t) + "," + exact(row.r_e) + "," + exact(row.r_p) +
             "," + exact(row.alpha) + "," + exact(row.r_c) + "," + exact(row.r_e_raw) + "\n";
    }
  }
  write_text_atomic(path, out);
}

std::map<int, std::vector<TraceRow>> read_trace_csv(const std::filesystem::path& path) {
  const std::string origin = path.string();
  std::istringstream in(read_text_file(path));
  std::string line;
  std::getline(in, line);
  if (line != "episode,t,r_e,r_p,alpha,r_c,r_e_raw") throw FormatError(origin + ": unexpected trace header");
  std::map<int, std::vector<TraceRow>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw FormatError(origin + ": trace row needs 7 columns");
    TraceRow row;
    row.t = static_cast<int>(parse_double(cells[1], origin));
    row.r_e = parse_double(cells[2], origin);
    row.r_p = parse_double(cells[3], origin);
    row.alpha = parse_double(cells[4], origin);
    row.r_c = parse_double(cells[5], origin);
    row.r_e_raw = parse_double(cells[6], origin);
    out[static_cast<int>(parse_double(cells[0], origin))].push_back(row);
  }
  return out;
}

}  // namespace ppgta
