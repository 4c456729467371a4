#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ppgta/io.hpp"
#include "ppgta/pipeline.hpp"

using namespace ppgta;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test, removed on destruction.
struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& name) : path(fs::temp_directory_path() / ("ppgta_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
};

const World& small_world() {
  static const World w = [] {
    WorldSpec s{5};
    s.grid_size = 32;
    s.n_ooi = 10;
    return generate_world(s);
  }();
  return w;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

EpisodeReport report_on(const World& w, int episode, std::vector<TilePos> tiles, std::vector<OoiVerdict> tests) {
  EpisodeReport r;
  r.episode = episode;
  r.world_seed = w.spec().seed;
  r.spawn = tiles.front();
  r.visited = run_length_encode(tiles);
  r.tests = std::move(tests);
  return r;
}

std::vector<TilePos> pathway_tiles(const World& w) {
  std::vector<TilePos> out;
  for (int y = 0; y < w.size(); ++y) {
    for (int x = 0; x < w.size(); ++x) {
      if (w.is_pathway(x, y)) out.push_back({x, y});
    }
  }
  return out;
}

}  // namespace

TEST(Config, UnknownKeyIsNamed) {
  RunConfig c;
  const std::string msg = error_of([&] { c.assign("fe.epochz=3"); });
  EXPECT_NE(msg.find("fe.epochz"), std::string::npos);
  EXPECT_THROW(c.assign("fe.epochz=3"), ConfigError);
}

TEST(Config, BadValueIsNamedAndRejected) {
  RunConfig c;
  EXPECT_THROW(c.set("ppo.gamma", "high"), ConfigError);
  EXPECT_NE(error_of([&] { c.set("il.finetune_encoder", "maybe"); }).find("il.finetune_encoder"), std::string::npos);
  EXPECT_EQ(c.get("ppo.gamma"), "0.99");
  EXPECT_EQ(c, RunConfig{});
}

TEST(Config, DumpLoadRoundTrip) {
  ScratchDir dir("config");
  RunConfig c;
  c.set("world.seed", "42");
  c.set("fe.channels", "8,16");
  write_text_atomic(dir.path / "c.txt", "# comment\n\n" + c.dump());
  RunConfig back;
  back.load(dir.path / "c.txt");
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.get_int_list("fe.channels"), (std::vector<int>{8, 16}));
  EXPECT_THROW(back.load(dir.path / "missing.txt"), ConfigError);
}

TEST(Config, OutputDirectoryHonoursEnvironment) {
  RunConfig c;
  c.set("run.out", "from_config");
  unsetenv("PPGTA_OUT");
  EXPECT_EQ(output_dir(c), fs::path("from_config"));
  setenv("PPGTA_OUT", "/tmp/from_env", 1);
  EXPECT_EQ(output_dir(c), fs::path("/tmp/from_env"));
  unsetenv("PPGTA_OUT");
}

TEST(Config, AgentVariants) {
  const RunConfig c;
  EXPECT_EQ(explore_config(c, AgentKind::Novelty).alpha_mode, AlphaMode::Fixed);
  EXPECT_EQ(explore_config(c, AgentKind::Novelty).fixed_alpha, 0.0);
  EXPECT_TRUE(explore_config(c, AgentKind::Random).random_actions);
  EXPECT_EQ(explore_config(c, AgentKind::Preference).alpha_mode, AlphaMode::Adaptive);
  EXPECT_EQ(agent_kind(agent_name(AgentKind::Novelty)), AgentKind::Novelty);
  EXPECT_THROW(agent_kind("greedy"), ConfigError);
}

TEST(TrajectoryFile, RoundTripIsByteIdentical) {
  const World& w = small_world();
  const auto demos = collect_demonstrations(w, {2, 1, 10}, 4);
  for (const Trajectory& t : demos) {
    const auto bytes = encode_trajectory(t);
    const Trajectory back = decode_trajectory(bytes, "mem");
    EXPECT_EQ(encode_trajectory(back), bytes);
    EXPECT_EQ(back.actions, t.actions);
    EXPECT_EQ(back.frames, t.frames);
    EXPECT_EQ(back.start, t.start);
  }
  ScratchDir dir("ptrj");
  save_trajectory(dir.path / "t.ptrj", demos[0]);
  EXPECT_EQ(read_bytes(dir.path / "t.ptrj"), encode_trajectory(demos[0]));
  EXPECT_EQ(load_trajectory(dir.path / "t.ptrj", &w).poses, demos[0].poses);
}

TEST(TrajectoryFile, RejectsDamagedFiles) {
  const World& w = small_world();
  const auto demos = collect_demonstrations(w, {1, 1, 6}, 4);
  const auto bytes = encode_trajectory(demos[0]);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 5);
  const std::string msg = error_of([&] { decode_trajectory(truncated, "cut.ptrj"); });
  EXPECT_NE(msg.find("cut.ptrj"), std::string::npos);
  EXPECT_THROW(decode_trajectory(truncated, "cut"), FormatError);
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(decode_trajectory(longer, "long"), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_trajectory(magic, "magic"), FormatError);
  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(decode_trajectory(version, "version"), FormatError);
  EXPECT_THROW(decode_trajectory(std::span<const std::uint8_t>(bytes.data(), 3), "tiny"), FormatError);
}

TEST(Corpus, SaveLoadKeepsSplit) {
  const World& w = small_world();
  Corpus c;
  c.trajectories = collect_demonstrations(w, {6, 4, 8}, 4);
  c.split = split_corpus(c.trajectories, 3);
  ScratchDir dir("corpus");
  save_corpus(dir.path, c);
  const Corpus back = load_corpus(dir.path, &w);
  ASSERT_EQ(back.trajectories.size(), c.trajectories.size());
  auto sorted = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  EXPECT_EQ(sorted(back.split.train), sorted(c.split.train));
  EXPECT_EQ(sorted(back.split.val), sorted(c.split.val));
  EXPECT_EQ(sorted(back.split.test), sorted(c.split.test));
  for (std::size_t i = 0; i < c.trajectories.size(); ++i) {
    EXPECT_EQ(back.trajectories[i].actions, c.trajectories[i].actions);
    EXPECT_EQ(back.trajectories[i].kind, c.trajectories[i].kind);
  }
}

TEST(Metrics, NoReportsGiveZeros) {
  EXPECT_EQ(aggregate_metrics({}, small_world()), MetricsSummary{});
}

TEST(Metrics, EightOfTenTestedFiveSucceeded) {
  const World& w = small_world();
  ASSERT_EQ(w.oois().size(), 10u);
  const auto path = pathway_tiles(w);
  std::vector<OoiVerdict> first, second;
  for (int i = 0; i < 5; ++i) first.push_back({i, i % 2 == 0, 0.01, 0});
  for (int i = 5; i < 8; ++i) second.push_back({i, i != 7, 0.02, 1});
  second.push_back({0, false, 0.5, 1});  // retest of OOI 0: the first verdict stands
  const std::vector<EpisodeReport> reports{report_on(w, 0, {path[0], path[1], path[1]}, first),
                                           report_on(w, 1, {path[1], path[2]}, second)};
  const MetricsSummary m = aggregate_metrics(reports, w, {{0, 0.5}});
  EXPECT_EQ(m.episodes, 2);
  EXPECT_EQ(m.tested, 8);
  EXPECT_EQ(m.successes, 3 + 2);
  EXPECT_DOUBLE_EQ(m.success_rate, 5.0 / 10.0);
  EXPECT_EQ(m.covered_tiles, 3);
  EXPECT_EQ(m.pathway_tiles, static_cast<int>(path.size()));
  EXPECT_DOUBLE_EQ(m.coverage, 3.0 / static_cast<double>(path.size()));
  EXPECT_EQ(m.cumulative_tested, (std::vector<int>{5, 8}));
  EXPECT_EQ(m.ap.at(0), 0.5);
}

TEST(Metrics, RejectsMixedWorlds) {
  const World& w = small_world();
  const auto path = pathway_tiles(w);
  EpisodeReport other = report_on(w, 1, {path[0]}, {});
  other.world_seed = w.spec().seed + 1;
  EXPECT_THROW(aggregate_metrics({report_on(w, 0, {path[0]}, {}), other}, w), ContractViolation);
}

TEST(Metrics, RecountFromFilesMatches) {
  const World& w = small_world();
  const auto path = pathway_tiles(w);
  std::vector<EpisodeReport> reports;
  for (int e = 0; e < 3; ++e) {
    std::vector<TilePos> tiles(path.begin() + e, path.begin() + e + 5);
    tiles.push_back({0, 0});
    reports.push_back(report_on(w, e, tiles, {{e, e != 1, 0.1 * e, e}}));
    for (int t = 0; t < 4; ++t) reports.back().trace.push_back({t, 0.1 * t, -0.01, 0.8, 0.3 / (t + 1), 1.0 / 3.0});
  }
  ScratchDir dir("metrics");
  write_episode_reports(dir.path / "episodes.txt", reports, "trace.csv");
  write_trace_csv(dir.path / "trace.csv", reports);
  const auto back = read_episode_reports(dir.path / "episodes.txt");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].visited, reports[i].visited);
    EXPECT_EQ(back[i].spawn, reports[i].spawn);
    ASSERT_EQ(back[i].tests.size(), 1u);
    EXPECT_EQ(back[i].tests[0].js, reports[i].tests[0].js);
  }
  EXPECT_EQ(aggregate_metrics(back, w), aggregate_metrics(reports, w));
  const auto traces = read_trace_csv(dir.path / "trace.csv");
  ASSERT_EQ(traces.size(), 3u);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(traces.at(2)[t].r_c, reports[2].trace[t].r_c);
    EXPECT_EQ(traces.at(2)[t].r_e_raw, reports[2].trace[t].r_e_raw);
  }
  EXPECT_EQ(tested_curve_csv(aggregate_metrics(reports, w)), "episode,tested\n1,1\n2,2\n3,3\n");
}

TEST(Pipeline, MissingArtifactNamesFileAndProducer) {
  ScratchDir dir("missing");
  RunConfig c;
  c.set("run.out", dir.path.string());
  unsetenv("PPGTA_OUT");
  std::ostringstream log;
  const std::string msg = error_of([&] { run_command("collect-demos", c, log); });
  EXPECT_NE(msg.find("world.txt"), std::string::npos);
  EXPECT_NE(msg.find("gen-world"), std::string::npos);
  EXPECT_THROW(run_command("train-il", c, log), ConfigError);
  EXPECT_THROW(run_command("fly", c, log), ConfigError);
}

TEST(Pipeline, GenWorldIsReproducible) {
  ScratchDir a("genworld_a"), b("genworld_b");
  unsetenv("PPGTA_OUT");
  std::ostringstream log;
  for (const auto* d : {&a, &b}) {
    RunConfig c;
    c.set("run.out", d->path.string());
    c.set("world.grid_size", "32");
    c.set("world.n_ooi", "10");
    run_command("gen-world", c, log);
  }
  EXPECT_EQ(read_bytes(a.path / "world.txt"), read_bytes(b.path / "world.txt"));
  EXPECT_EQ(read_bytes(a.path / "world.ppm"), read_bytes(b.path / "world.ppm"));
}

TEST(Pipeline, ExitCodesFollowErrorKind) {
  auto code = [](const std::function<void()>& f) {
    std::ostringstream err;
    try {
      f();
    } catch (...) {
      return exit_code_for_current_exception(err);
    }
    return 0;
  };
  EXPECT_EQ(code([] { throw ConfigError("x"); }), 2);
  EXPECT_EQ(code([] { throw FormatError("x"); }), 2);
  EXPECT_EQ(code([] { throw InfeasibleSpec("x"); }), 2);
  EXPECT_EQ(code([] { throw TrainingDivergence("x"); }), 3);
  EXPECT_EQ(code([] { throw std::runtime_error("x"); }), 1);
}
