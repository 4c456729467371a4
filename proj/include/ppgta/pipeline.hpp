#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ppgta/config.hpp"
#include "ppgta/dataset.hpp"
#include "ppgta/metrics.hpp"

namespace ppgta {

/// Artifact layout under the output directory.
struct Artifacts {
  explicit Artifacts(std::filesystem::path dir) : root(std::move(dir)) {}
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.txt"; }
  std::filesystem::path world() const { return root / "world.txt"; }
  std::filesystem::path world_map() const { return root / "world.ppm"; }
  std::filesystem::path demos() const { return root / "demos"; }
  std::filesystem::path detector() const { return root / "detector.bin"; }
  std::filesystem::path detector_ap() const { return root / "detector_ap.csv"; }
  std::filesystem::path encoder() const { return root / "encoder.ckpt"; }
  std::filesystem::path encoder_log() const { return root / "fe_log.csv"; }
  std::filesystem::path orbit_policy() const { return root / "orbit_policy.ckpt"; }
  std::filesystem::path path_policy() const { return root / "path_policy.ckpt"; }
  std::filesystem::path imitation_info() const { return root / "il.txt"; }
  std::filesystem::path imitation_log() const { return root / "il_log.csv"; }
  std::filesystem::path explorer(const std::string& agent) const { return root / ("explorer_" + agent + ".ckpt"); }
  std::filesystem::path explorer_log(const std::string& agent) const { return root / ("explore_train_" + agent + ".csv"); }
  std::filesystem::path episodes(const std::string& agent) const { return root / ("episodes_" + agent + ".txt"); }
  std::filesystem::path trace(const std::string& agent) const { return root / ("trace_" + agent + ".csv"); }
  std::filesystem::path metrics(const std::string& agent) const { return root / ("metrics_" + agent + ".txt"); }
  std::filesystem::path tested_curve(const std::string& agent) const { return root / ("tested_curve_" + agent + ".csv"); }
  std::filesystem::path verdicts(const std::string& agent) const { return root / ("verdicts_" + agent + ".csv"); }
  std::filesystem::path coverage_map(const std::string& agent) const { return root / ("coverage_" + agent + ".ppm"); }
  std::filesystem::path status_map(const std::string& agent) const { return root / ("status_" + agent + ".ppm"); }
  std::filesystem::path report() const { return root / "report.txt"; }
  std::filesystem::path tested_curves() const { return root / "tested_curves.csv"; }
};

/// Throws ConfigError naming the missing file and the subcommand that produces it.
void need_artifact(const std::filesystem::path& path, const char* producer);

/// Regenerates the world from the config and checks it against the stored dump.
World load_world(const RunConfig& c, const Artifacts& a);
Corpus load_demos(const Artifacts& a, const World& world);
/// Oracle on `world`, or the trained few-shot detector when vision.detector=fewshot.
Detector load_detector(const RunConfig& c, const Artifacts& a, const World& world);
Encoder load_encoder(const RunConfig& c, const Artifacts& a);

/// Orbit and path policies plus everything needed to run an OOI test.
struct ImitationModels {
  PolicyNet orbit;
  PolicyNet path;
  double orbit_threshold = 0.0;
  double path_threshold = 0.0;
  int budget = 0;
  ActionHistogram orbit_expert{};

  OrbitTester tester() const { return {&orbit, orbit_expert, orbit_threshold, budget}; }
};
ImitationModels load_imitation(const RunConfig& c, const Artifacts& a, const Corpus& demos);

/// Initial explorer for an agent variant: the path policy, or (novelty without warm start) a
/// freshly initialized trunk on the path policy's encoder.
PolicyNet explorer_init(const RunConfig& c, AgentKind agent, const PolicyNet& path_policy);

/// Detector AP on frames from vision.eval_worlds fresh worlds; oracle when `model` is null.
ApResult evaluate_detector(const RunConfig& c, const FewShotDetector* model);

struct ImitationQuality {
  int heldout_success = 0;
  int heldout_starts = 0;
  int test_success = 0;
  int test_starts = 0;
  double mean_heldout_js = 0.0;
  double path_on_pathway = 0.0;  // fraction of path-policy rollout steps on pathway tiles
};

/// Orbit success on `heldout` fresh expert starts and on the corpus test split; path policy
/// on-pathway fraction over `path_steps`-step rollouts from the test-split path starts.
ImitationQuality imitation_quality(const World& world, const Detector& detector, const Corpus& demos,
                                   const ImitationModels& models, int heldout, std::uint64_t seed, int path_steps);

// Subcommands; artifacts go under output_dir(c), progress lines to `log`.
void cmd_gen_world(const RunConfig& c, std::ostream& log);
void cmd_collect_demos(const RunConfig& c, std::ostream& log);
void cmd_train_detector(const RunConfig& c, std::ostream& log);
void cmd_train_fe(const RunConfig& c, std::ostream& log);
void cmd_train_il(const RunConfig& c, std::ostream& log);
void cmd_train_explore(const RunConfig& c, std::ostream& log);
void cmd_evaluate(const RunConfig& c, std::ostream& log);
void cmd_render_map(const RunConfig& c, std::ostream& log);
void cmd_report(const RunConfig& c, std::ostream& log);

const std::vector<std::string>& command_names();
/// Dispatches by subcommand name; unknown names raise ConfigError.
void run_command(const std::string& name, const RunConfig& c, std::ostream& log);

/// Maps an in-flight exception to the CLI exit status (2 config/format/contract, 3 divergence).
int exit_code_for_current_exception(std::ostream& err);

}  // namespace ppgta
