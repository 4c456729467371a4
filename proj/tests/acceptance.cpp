// Runs the acceptance criteria end to end and prints one PASS/FAIL line per criterion.
// Exit status is 0 when every criterion passes or is listed in --known-red.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "ap_bruteforce.hpp"
#include "grad_suite.hpp"
#include "ppgta/feature.hpp"
#include "ppgta/imitation.hpp"
#include "ppgta/io.hpp"
#include "ppgta/novelty.hpp"
#include "ppgta/pipeline.hpp"
#include "ppgta/preference.hpp"

using namespace ppgta;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int id;
  bool pass;
  std::string detail;
};

std::string num(double v, int precision = 4) {
  std::ostringstream o;
  o.precision(precision);
  o << v;
  return o.str();
}

double clock_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::map<std::string, std::string> read_key_values(const fs::path& p) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_text_file(p));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

std::string file_bytes(const fs::path& p) { return read_text_file(p); }

// The shared pipeline configuration: desk defaults with the shortened training schedules.
RunConfig base_config(const fs::path& out) {
  RunConfig c;
  c.set("run.out", out.string());
  for (const char* kv : {"fe.epochs=6", "fe.lr_warmup_epochs=1", "il.epochs=30", "il.lr_peak=3e-3",
                         "il.lr_warmup_start=1e-3", "il.lr_warmup_epochs=2", "novelty.batch=16",
                         "novelty.train_every=4"}) {
    c.assign(kv);
  }
  return c;
}

void run(const char* cmd, const RunConfig& c, std::ostream& log) {
  const double t0 = clock_s();
  run_command(cmd, c, log);
  log << "[" << cmd << " " << num(clock_s() - t0, 3) << "s]\n" << std::flush;
}

struct AgentRun {
  MetricsSummary metrics;
  std::vector<EpisodeReport> reports;
  std::map<int, std::vector<TraceRow>> trace;
  std::map<std::string, std::string> summary_file;
};

AgentRun explore_agent(const RunConfig& base, AgentKind agent, std::uint64_t seed, const World& world,
                       std::ostream& log) {
  RunConfig c = base;
  c.set("explore.agent", agent_name(agent));
  c.set("explore.seed", std::to_string(seed));
  run("train-explore", c, log);
  run("evaluate", c, log);
  const Artifacts a(output_dir(c));
  AgentRun r;
  r.reports = read_episode_reports(a.episodes(agent_name(agent)));
  r.trace = read_trace_csv(a.trace(agent_name(agent)));
  r.metrics = aggregate_metrics(r.reports, world);
  r.summary_file = read_key_values(a.metrics(agent_name(agent)));
  return r;
}

// ---------------------------------------------------------------- individual criteria

Outcome alpha_script() {
  const std::vector<double> r_e{1.0, 0.8, 0.85, 1.1, 0.9, 0.7, 0.5, 0.4};
  const std::vector<double> expected{0.8, 0.75, 0.75, 0.8, 0.75, 0.7, 0.65, 0.6};
  const auto got = replay_alpha(r_e);
  bool ok = got.size() == expected.size();
  for (std::size_t i = 0; ok && i < got.size(); ++i) ok = std::abs(got[i] - expected[i]) < 1e-12;
  return {4, ok, "scripted trace"};
}

Outcome novelty_properties(const World& world) {
  const Detector det = Detector::oracle(world);
  int held_ok = 0, drop_ok = 0;
  double worst_drop = 1e300, worst_held = 1e300;
  for (int s = 1; s <= 10; ++s) {
    const auto frames = sample_labeled_frames(world, 2, 100 + static_cast<std::uint64_t>(s));
    auto input = [&](int k) {
      const auto& f = frames[static_cast<std::size_t>(k)];
      return frame_to_input(preprocess(f.frame, det.detect(f.frame, f.pose)));
    };
    const auto seen = input(0), held = input(1);
    NoveltyConfig c;
    c.seed = static_cast<std::uint64_t>(s);
    c.batch = 16;
    EnsembleRnd rnd(c);
    const double before = rnd.reward(seen);
    rnd.observe(seen);
    Rng rng = make_stream(static_cast<std::uint64_t>(s), "acceptance.novelty");
    rnd.train(500, rng);
    const double after = rnd.reward(seen), held_r = rnd.reward(held);
    drop_ok += after * 10.0 <= before ? 1 : 0;
    held_ok += held_r >= 2.0 * after ? 1 : 0;
    worst_drop = std::min(worst_drop, before / after);
    worst_held = std::min(worst_held, held_r / after);
  }
  const bool degenerate = ensemble_variance({{0.0f}, {2.0f}}) == 1.0 &&
                          ensemble_variance({{0.5f, -1.0f}, {0.5f, -1.0f}, {0.5f, -1.0f}}) == 0.0;
  const bool ok = drop_ok == 10 && held_ok >= 9 && degenerate;
  return {5, ok,
          "drop>=10x on " + std::to_string(drop_ok) + "/10 (min " + num(worst_drop) + "x), held-out>=2x on " +
              std::to_string(held_ok) + "/10 (min " + num(worst_held) + "x), degenerate cases " +
              (degenerate ? "exact" : "WRONG")};
}

Outcome loss_identities() {
  const std::vector<double> p{0.2, 0.3, 0.5}, a{1.0, 0.0}, b{0.0, 1.0};
  bool ok = std::abs(kl_divergence(p, p)) <= 1e-9 && std::abs(js_divergence(p, p)) <= 1e-9 &&
            std::abs(js_divergence(a, b) - std::log(2.0)) <= 1e-9;
  Rng rng = make_stream(3, "acceptance.loss");
  const auto logits = testing::random_vector(kActionCount, rng, 2.0);
  const auto hc = testing::random_vector(10, rng), teacher = testing::random_vector(10, rng);
  ImitationLossConfig c;
  c.lambda = 0.0;
  for (int act = 0; act < kActionCount; ++act) {
    const ImitationLoss l = imitation_loss(logits, hc, teacher, act, c);
    const XentResult x = softmax_xent(logits, act);
    ok = ok && l.loss == x.loss && l.g_logits == x.grad;
  }
  const std::vector<float> uniform(kActionCount, 0.37f);
  ok = ok && std::abs(softmax_xent(uniform, 0).loss - std::log(9.0)) <= 1e-6;
  return {6, ok, "KL/JS closed forms, lambda=0 bit-exact, uniform CE = ln 9"};
}

Outcome gradient_suite() {
  const std::vector<std::pair<const char*, testing::FdReport>> checks{
      {"linear", testing::linear_gradients()},     {"conv", testing::conv_gradients()},
      {"gru", testing::gru_gradients()},           {"layernorm", testing::layernorm_gradients()},
      {"encoder", testing::encoder_gradients()},   {"student", testing::student_gradients()},
      {"rnd", testing::rnd_gradients()},           {"ppo", testing::ppo_gradients()},
      {"imitation-loss", testing::imitation_loss_gradients()}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, r] : checks) {
    ok = ok && testing::fd_passes(r);
    detail += std::string(detail.empty() ? "" : ", ") + name + " " + num(r.worst_resolved, 2);
    if (r.resolved != r.total) detail += " (" + std::to_string(r.total - r.resolved) + "/" + std::to_string(r.total) + " on kinks)";
  }
  return {7, ok, "max rel err: " + detail};
}

Outcome imitation(const RunConfig& c) {
  const Artifacts a(output_dir(c));
  const World world = load_world(c, a);
  const Corpus demos = load_demos(a, world);
  const Detector detector = load_detector(c, a, world);
  const ImitationModels models = load_imitation(c, a, demos);
  const ImitationQuality q = imitation_quality(world, detector, demos, models, 100, 2024, 200);
  const double heldout = static_cast<double>(q.heldout_success) / q.heldout_starts;
  const bool ok = heldout >= 0.8 && q.path_on_pathway >= 0.9;
  return {8, ok,
          "orbit success " + std::to_string(q.heldout_success) + "/" + std::to_string(q.heldout_starts) +
              " fresh starts (test split " + std::to_string(q.test_success) + "/" + std::to_string(q.test_starts) +
              "), path policy on pathway " + num(100.0 * q.path_on_pathway, 4) + "% of steps"};
}

Outcome detection(const RunConfig& c) {
  const ApResult oracle = evaluate_detector(c, nullptr);
  const FewShotDetector model = FewShotDetector::load(Artifacts(output_dir(c)).detector());
  const ApResult fewshot = evaluate_detector(c, &model);
  bool ok = !oracle.per_type.empty();
  std::string detail = "few-shot AP";
  for (const auto& [type, ap] : oracle.per_type) ok = ok && ap == 1.0;
  for (const auto& [type, ap] : fewshot.per_type) {
    ok = ok && ap >= 0.7;
    detail += std::string(" ") + ooi_type_name(type) + "=" + num(ap, 3);
  }
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto [dets, gts] = testing::random_ap_case(seed);
    for (const auto& [type, ap] : average_precision(dets, gts).per_type) {
      worst = std::max(worst, std::abs(ap - testing::brute_force_ap(dets, gts, type)));
    }
  }
  ok = ok && worst <= 1e-9;
  return {9, ok, detail + "; oracle AP 1.0 on every type; brute-force AP gap " + num(worst, 2)};
}

Outcome determinism(const fs::path& root, std::ostream& log) {
  std::vector<std::string> summaries, maps;
  std::vector<MetricsSummary> recomputed;
  for (const char* tag : {"det_a", "det_b"}) {
    RunConfig c;
    c.set("run.out", (root / tag).string());
    for (const char* kv : {"world.grid_size=32", "world.n_ooi=10", "demos.orbit=12", "demos.path=6",
                           "demos.path_length=40", "vision.train_frames=60", "vision.eval_frames=20",
                           "vision.eval_worlds=1", "fe.channels=8,16", "fe.embedding=32", "fe.epochs=2",
                           "fe.lr_warmup_epochs=1", "il.local_hidden=8", "il.global_hidden=8", "il.mlp1=16",
                           "il.mlp2=8", "il.epochs=2", "il.lr_warmup_epochs=1", "novelty.ensemble=2",
                           "novelty.batch=8", "explore.horizon=40", "explore.train_episodes=2",
                           "explore.eval_episodes=3"}) {
      c.assign(kv);
    }
    fs::remove_all(root / tag);
    for (const char* cmd : {"gen-world", "collect-demos", "train-detector", "train-fe", "train-il", "train-explore",
                            "evaluate", "render-map"}) {
      run(cmd, c, log);
    }
    const Artifacts a(output_dir(c));
    summaries.push_back(file_bytes(a.metrics("preference")));
    maps.push_back(file_bytes(a.coverage_map("preference")) + file_bytes(a.status_map("preference")));
    recomputed.push_back(aggregate_metrics(read_episode_reports(a.episodes("preference")), load_world(c, a)));
  }
  const bool ok = summaries[0] == summaries[1] && maps[0] == maps[1] && recomputed[0] == recomputed[1];
  return {10, ok, std::string("two runs of one config: metrics ") + (summaries[0] == summaries[1] ? "identical" : "DIFFER") +
                      ", map bytes " + (maps[0] == maps[1] ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance run"};
  std::string out = (fs::temp_directory_path() / "ppgta_acceptance").string();
  std::string known_red_list;
  int seeds = 5;
  app.add_option("--out", out, "scratch directory for all artifacts");
  app.add_option("--known-red", known_red_list, "comma-separated criteria allowed to fail");
  app.add_option("--seeds", seeds, "exploration seeds for criteria 1-3")->check(CLI::Range(1, 50));
  CLI11_PARSE(app, argc, argv);
  std::set<int> known_red;
  {
    std::istringstream in(known_red_list);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      if (!tok.empty()) known_red.insert(std::stoi(tok));
    }
  }
  unsetenv("PPGTA_OUT");  // every run below names its own directory

  const fs::path root(out);
  fs::create_directories(root);
  std::ofstream log(root / "acceptance.log");
  const double t_start = clock_s();
  std::vector<Outcome> outcomes;

  try {
    const RunConfig shared = base_config(root / "shared");
    fs::remove_all(root / "shared");
    for (const char* cmd : {"gen-world", "collect-demos", "train-detector", "train-fe", "train-il"}) run(cmd, shared, log);
    const double t_models = clock_s();
    const World world = load_world(shared, Artifacts(output_dir(shared)));

    // Criteria 1-4 from the exploration runs.
    std::vector<double> cov_pref, cov_nov, cov_rand;
    int ordered = 0;
    std::string tested_detail;
    bool recount_ok = true, unreachable_ok = true, replay_ok = true;
    std::size_t replayed = 0;
    for (int s = 1; s <= seeds; ++s) {
      std::map<AgentKind, AgentRun> runs;
      for (AgentKind k : {AgentKind::Preference, AgentKind::Novelty, AgentKind::Random}) {
        runs[k] = explore_agent(shared, k, static_cast<std::uint64_t>(s), world, log);
        const AgentRun& r = runs[k];
        // Brute-force recount of the success rate from the verdict lists.
        std::set<int> seen;
        int successes = 0;
        for (const auto& rep : r.reports) {
          for (const auto& v : rep.tests) {
            unreachable_ok = unreachable_ok && world.oois()[static_cast<std::size_t>(v.ooi)].reachable;
            if (seen.insert(v.ooi).second) successes += v.success ? 1 : 0;
          }
        }
        const double recount = static_cast<double>(successes) / static_cast<double>(world.oois().size());
        recount_ok = recount_ok && r.metrics.success_rate == recount &&
                     std::strtod(r.summary_file.at("success_rate").c_str(), nullptr) == recount;
        if (k == AgentKind::Preference) {
          for (const auto& [episode, rows] : r.trace) {
            std::vector<double> r_e;
            for (const auto& row : rows) r_e.push_back(row.r_e);
            const auto alpha = replay_alpha(r_e);
            for (std::size_t t = 0; t < rows.size(); ++t) replay_ok = replay_ok && rows[t].alpha == alpha[t];
            replayed += rows.size();
          }
        }
      }
      const auto& p = runs[AgentKind::Preference].metrics;
      const auto& n = runs[AgentKind::Novelty].metrics;
      const auto& r = runs[AgentKind::Random].metrics;
      cov_pref.push_back(p.coverage);
      cov_nov.push_back(n.coverage);
      cov_rand.push_back(r.coverage);
      ordered += p.tested > n.tested && n.tested > r.tested ? 1 : 0;
      tested_detail += (tested_detail.empty() ? "" : "; ") + std::to_string(p.tested) + "/" + std::to_string(n.tested) +
                       "/" + std::to_string(r.tested);
      std::cout << "seed " << s << ": coverage pref " << num(p.coverage) << " novelty " << num(n.coverage) << " random "
                << num(r.coverage) << ", tested " << p.tested << "/" << n.tested << "/" << r.tested << std::endl;
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    const double ratio = mean(cov_pref) / mean(cov_nov);
    outcomes.push_back({1, ratio >= 1.5,
                        "mean coverage pref " + num(mean(cov_pref)) + " / novelty " + num(mean(cov_nov)) + " = " +
                            num(ratio, 3) + "x (random " + num(mean(cov_rand)) + "), need >= 1.5x; explore time " +
                            num((clock_s() - t_models) / 60.0, 3) + " min"});
    outcomes.push_back({2, ordered >= 4 || (seeds < 5 && ordered == seeds),
                        "pref > novelty > random on " + std::to_string(ordered) + "/" + std::to_string(seeds) +
                            " seeds (tested pref/novelty/random: " + tested_detail + ")"});
    const int unreachable = [&] {
      int u = 0;
      for (const auto& o : world.oois()) u += o.reachable ? 0 : 1;
      return u;
    }();
    outcomes.push_back({3, recount_ok && unreachable_ok,
                        std::string("success rate recount ") + (recount_ok ? "exact" : "MISMATCH") + ", " +
                            std::to_string(unreachable) + " unreachable OOIs " +
                            (unreachable_ok ? "never tested" : "TESTED")});
    Outcome a4 = alpha_script();
    a4.pass = a4.pass && replay_ok && replayed > 0;
    a4.detail += std::string(" exact; ") + std::to_string(replayed) + " logged steps replayed " +
                 (replay_ok ? "bit-exactly" : "WITH MISMATCHES");
    outcomes.push_back(a4);

    outcomes.push_back(novelty_properties(world));
    outcomes.push_back(loss_identities());
    outcomes.push_back(gradient_suite());
    outcomes.push_back(imitation(shared));
    outcomes.push_back(detection(shared));
    outcomes.push_back(determinism(root, log));
  } catch (...) {
    const int code = exit_code_for_current_exception(std::cerr);
    std::cerr << "acceptance run aborted (see " << (root / "acceptance.log").string() << ")\n";
    return code == 0 ? 1 : code;
  }

  std::sort(outcomes.begin(), outcomes.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
  bool gate = true;
  for (const Outcome& o : outcomes) {
    const bool allowed = !o.pass && known_red.count(o.id);
    std::cout << "criterion " << o.id << ": " << (o.pass ? "PASS" : "FAIL") << (allowed ? " (known red)" : "") << " - "
              << o.detail << "\n";
    gate = gate && (o.pass || allowed);
  }
  std::cout << "total time " << num((clock_s() - t_start) / 60.0, 3) << " min\n";
  return gate ? 0 : 1;
}
