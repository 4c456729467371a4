#include "ppgta/pipeline.hpp"

#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

#include "ppgta/io.hpp"

namespace ppgta {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::map<std::string, std::string> read_kv(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

const std::string& kv_at(const std::map<std::string, std::string>& kv, const std::string& key,
                         const std::filesystem::path& origin) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError(origin.string() + ": missing entry '" + key + "'");
  return it->second;
}

std::vector<int> members_of(const Corpus& corpus, const std::vector<int>& split, ExpertKind kind) {
  std::vector<int> out;
  for (int i : split) {
    if (corpus.trajectories[static_cast<std::size_t>(i)].kind == kind) out.push_back(i);
  }
  return out;
}

std::string agent_of(const RunConfig& c) { return agent_name(agent_kind(c.get("explore.agent"))); }

Artifacts prepare(const RunConfig& c) {
  Artifacts a(output_dir(c));
  std::filesystem::create_directories(a.root);
  return a;
}

std::string ap_line(const ApResult& ap) {
  std::string out;
  for (const auto& [type, v] : ap.per_type) out += std::string(" ") + ooi_type_name(type) + "=" + fmt(v);
  return out;
}

}  // namespace

void need_artifact(const std::filesystem::path& path, const char* producer) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("missing artifact '" + path.string() + "' (produced by " + producer + ")");
  }
}

World load_world(const RunConfig& c, const Artifacts& a) {
  need_artifact(a.world(), "gen-world");
  World world = generate_world(world_spec(c));
  if (read_text_file(a.world()) != world.dump()) {
    throw ConfigError("artifact '" + a.world().string() + "' does not match the world.* settings; rerun gen-world");
  }
  return world;
}

Corpus load_demos(const Artifacts& a, const World& world) {
  need_artifact(a.demos() / "index.txt", "collect-demos");
  return load_corpus(a.demos(), &world);
}

Detector load_detector(const RunConfig& c, const Artifacts& a, const World& world) {
  const std::string kind = c.get("vision.detector");
  if (kind == "oracle") return Detector::oracle(world);
  if (kind == "fewshot") {
    need_artifact(a.detector(), "train-detector");
    return Detector::fewshot(FewShotDetector::load(a.detector()));
  }
  throw ConfigError("config key 'vision.detector': '" + kind + "' is not one of oracle|fewshot");
}

Encoder load_encoder(const RunConfig& c, const Artifacts& a) {
  need_artifact(a.encoder(), "train-fe");
  Encoder enc("enc", encoder_config(c));
  load_checkpoint(a.encoder(), params_of(enc));
  return enc;
}

ImitationModels load_imitation(const RunConfig& c, const Artifacts& a, const Corpus& demos) {
  need_artifact(a.orbit_policy(), "train-il");
  need_artifact(a.path_policy(), "train-il");
  need_artifact(a.imitation_info(), "train-il");
  const PolicyConfig pc = policy_config(c);
  ImitationModels m{PolicyNet("policy", pc), PolicyNet("policy", pc)};
  load_checkpoint(a.orbit_policy(), params_of(m.orbit));
  load_checkpoint(a.path_policy(), params_of(m.path));
  const auto kv = read_kv(a.imitation_info());
  m.orbit_threshold = std::stod(kv_at(kv, "orbit.threshold", a.imitation_info()));
  m.path_threshold = std::stod(kv_at(kv, "path.threshold", a.imitation_info()));
  m.budget = orbit_budget(demos.trajectories);
  m.orbit_expert = corpus_histogram(demos.trajectories, ExpertKind::OrbitTest);
  return m;
}

PolicyNet explorer_init(const RunConfig& c, AgentKind agent, const PolicyNet& path_policy) {
  if (agent != AgentKind::Novelty || c.get_bool("explore.novelty_warm_start")) return path_policy;
  PolicyNet fresh("policy", path_policy.config());
  Rng rng = make_stream(c.get_u64("explore.seed"), "explore.fresh");
  fresh.init(rng);
  copy_values(params_of(path_policy.encoder()), params_of(fresh.encoder()));
  return fresh;
}

ApResult evaluate_detector(const RunConfig& c, const FewShotDetector* model) {
  const int worlds = static_cast<int>(c.get_int("vision.eval_worlds"));
  const int frames = static_cast<int>(c.get_int("vision.eval_frames"));
  std::vector<DetectionSet> detections, truth;
  for (int w = 0; w < worlds; ++w) {
    WorldSpec spec = world_spec(c);
    spec.seed = spec.seed + 1000 + static_cast<std::uint64_t>(w);
    const World world = generate_world(spec);
    const Detector det = model ? Detector::fewshot(*model) : Detector::oracle(world);
    Rng rng = make_stream(c.get_u64("vision.seed"), "vision.eval" + std::to_string(w));
    for (const auto& lf : sample_labeled_frames(world, frames, rng())) {
      const int id = static_cast<int>(truth.size());
      truth.push_back({id, lf.boxes});
      detections.push_back(det.detect(lf.frame, lf.pose, id));
    }
  }
  return average_precision(detections, truth);
}

ImitationQuality imitation_quality(const World& world, const Detector& detector, const Corpus& demos,
                                   const ImitationModels& models, int heldout, std::uint64_t seed, int path_steps) {
  ImitationQuality q;
  const RolloutContext ctx{&world, &detector};
  std::vector<int> reachable;
  for (std::size_t i = 0; i < world.oois().size(); ++i) {
    if (world.oois()[i].reachable) reachable.push_back(static_cast<int>(i));
  }
  require(!reachable.empty(), "imitation_quality: world has no reachable OOI");
  Rng rng = make_stream(seed, "heldout");
  double js = 0.0;
  for (int k = 0; k < heldout; ++k) {
    const int o = reachable[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(reachable.size()) - 1))];
    const auto start = orbit_start_pose(world, o, rng);
    if (!start) continue;
    const Trajectory roll = rollout_policy(models.orbit, ctx, *start, models.budget);
    const TestVerdict v = evaluate_test_execution(roll.actions, models.orbit_expert, models.orbit_threshold);
    q.heldout_success += v.success ? 1 : 0;
    ++q.heldout_starts;
    js += v.js;
  }
  q.mean_heldout_js = q.heldout_starts ? js / q.heldout_starts : 0.0;
  for (int m : members_of(demos, demos.split.test, ExpertKind::OrbitTest)) {
    const Trajectory roll = rollout_policy(models.orbit, ctx, demos.trajectories[static_cast<std::size_t>(m)].start,
                                           models.budget);
    q.test_success += evaluate_test_execution(roll.actions, models.orbit_expert, models.orbit_threshold).success ? 1 : 0;
    ++q.test_starts;
  }
  long on = 0, total = 0;
  for (int m : members_of(demos, demos.split.test, ExpertKind::PathFollow)) {
    const Trajectory roll =
        rollout_policy(models.path, ctx, demos.trajectories[static_cast<std::size_t>(m)].start, path_steps);
    for (const auto& p : roll.poses) on += world.is_pathway(p.x, p.y) ? 1 : 0;
    total += static_cast<long>(roll.poses.size());
  }
  q.path_on_pathway = total ? static_cast<double>(on) / static_cast<double>(total) : 0.0;
  return q;
}

// ------------------------------------------------------------------ subcommands

void cmd_gen_world(const RunConfig& c, std::ostream& log) {
  const Artifacts a = prepare(c);
  const World world = generate_world(world_spec(c));
  write_text_atomic(a.world(), world.dump());
  write_ppm(a.world_map(), render_birdseye(world, {}, {}));
  write_text_atomic(a.config(), c.dump());
  int unreachable = 0;
  for (const auto& o : world.oois()) unreachable += o.reachable ? 0 : 1;
  log << "world " << world.size() << "x" << world.size() << ": " << world.pathway_tile_count() << " pathway tiles, "
      << world.oois().size() << " OOIs (" << unreachable << " unreachable) -> " << a.world().string() << "\n";
}

void cmd_collect_demos(const RunConfig& c, std::ostream& log) {
  const Artifacts a = prepare(c);
  const World world = load_world(c, a);
  Corpus corpus;
  corpus.trajectories = collect_demonstrations(world, demo_counts(c), c.get_u64("demos.seed"));
  corpus.split = split_corpus(corpus.trajectories, c.get_u64("demos.split_seed"));
  save_corpus(a.demos(), corpus);
  log << corpus.trajectories.size() << " demonstrations (train " << corpus.split.train.size() << ", val "
      << corpus.split.val.size() << ", test " << corpus.split.test.size() << ") -> " << a.demos().string() << "\n";
}

void cmd_train_detector(const RunConfig& c, std::ostream& log) {
  const Artifacts a = prepare(c);
  const World world = load_world(c, a);
  FewShotDetector model;
  model.train(sample_labeled_frames(world, static_cast<int>(c.get_int("vision.train_frames")), c.get_u64("vision.seed"),
                                    true),
              static_cast<int>(c.get_int("vision.shots")));
  model.save(a.detector());
  const ApResult oracle = evaluate_detector(c, nullptr);
  const ApResult fewshot = evaluate_detector(c, &model);
  std::string csv = "type,oracle_ap,fewshot_ap\n";
  for (const auto& [type, v] : fewshot.per_type) {
    const auto it = oracle.per_type.find(type);
    csv += std::string(ooi_type_name(type)) + "," + fmt(it == oracle.per_type.end() ? 0.0 : it->second) + "," + fmt(v) +
           "\n";
  }
  write_text_atomic(a.detector_ap(), csv);
  log << "few-shot AP" << ap_line(fewshot) << " (oracle" << ap_line(oracle) << ") -> " << a.detector().string() << "\n";
}

void cmd_train_fe(const RunConfig& c, std::ostream& log) {
  const Artifacts a = prepare(c);
  const World world = load_world(c, a);
  const Corpus demos = load_demos(a, world);
  const Detector detector = load_detector(c, a, world);
  Encoder enc("enc", encoder_config(c));
  Rng rng = make_stream(c.get_u64("fe.seed"), "fe.init");
  enc.init(rng);
  const InvDynDataset data = build_invdyn_dataset(demos.trajectories, demos.split);
  const EncoderTrainResult r = train_encoder(enc, demos.trajectories, data, detector, encoder_train_config(c));
  save_checkpoint(a.encoder(), params_of(std::as_const(enc)));
  std::string csv = "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
    csv += std::to_string(e + 1) + "," + fmt(r.train_loss[e]) + "," + fmt(e < r.val_loss.size() ? r.val_loss[e] : 0.0) + "\n";
  }
  write_text_atomic(a.encoder_log(), csv);
  log << "encoder: best epoch " << r.best_epoch + 1 << ", val loss " << r.best_val_loss << ", val accuracy "
      << r.best_val_accuracy << ", masked " << r.masked_samples << "/" << r.total_samples << " -> "
      << a.encoder().string() << "\n";
}

void cmd_train_il(const RunConfig& c, std::ostream& log) {
  const Artifacts a = prepare(c);
  const World world = load_world(c, a);
  const Corpus demos = load_demos(a, world);
  const Detector detector = load_detector(c, a, world);
  const Encoder enc = load_encoder(c, a);
  const RolloutContext ctx{&world, &detector};
  std::string info, csv = "policy,epoch,train_loss,val_xent\n";
  for (ExpertKind kind : {ExpertKind::OrbitTest, ExpertKind::PathFollow}) {
    const char* tag = kind == ExpertKind::OrbitTest ? "orbit" : "path";
    const ImitationResult r = train_imitation(demos.trajectories, members_of(demos, demos.split.train, kind),
                                              members_of(demos, demos.split.val, kind), enc, ctx, policy_config(c),
                                              imitation_config(c));
    save_checkpoint(kind == ExpertKind::OrbitTest ? a.orbit_policy() : a.path_policy(),
                    params_of(std::as_const(r.student)));
    info += std::string(tag) + ".threshold=" + fmt(r.success_threshold) + "\n";
    info += std::string(tag) + ".best_epoch=" + std::to_string(r.best_epoch + 1) + "\n";
    info += std::string(tag) + ".best_val_xent=" + fmt(r.best_val_xent) + "\n";
    for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
      csv += std::string(tag) + "," + std::to_string(e + 1) + "," + fmt(r.train_loss[e]) + "," +
             fmt(e < r.val_xent.size() ? r.val_xent[e] : 0.0) + "\n";
    }
    log << tag << " policy: best epoch " << r.best_epoch + 1 << ", val xent " << r.best_val_xent
        << ", success threshold " << r.success_threshold << "\n";
  }
  write_text_atomic(a.imitation_info(), info);
  write_text_atomic(a.imitation_log(), csv);
}

void cmd_train_explore(const RunConfig& c, std::ostream& log) {
  const Artifacts a = prepare(c);
  const AgentKind agent = agent_kind(c.get("explore.agent"));
  const std::string name = agent_name(agent);
  const World world = load_world(c, a);
  const Corpus demos = load_demos(a, world);
  const Detector detector = load_detector(c, a, world);
  const ImitationModels models = load_imitation(c, a, demos);
  const PolicyNet init = explorer_init(c, agent, models.path);
  ExploreSession session(world, detector, init, models.path, models.tester(), explore_config(c, agent));
  const int episodes = agent == AgentKind::Random ? 0 : static_cast<int>(c.get_int("explore.train_episodes"));
  const std::vector<PpoStats> stats = train_explorer(session, episodes);
  save_checkpoint(a.explorer(name), params_of(session.actor()));
  std::string csv = "iteration,policy_loss,value_loss,entropy,clip_fraction\n";
  for (std::size_t i = 0; i < stats.size(); ++i) {
    csv += std::to_string(i + 1) + "," + fmt(stats[i].policy_loss) + "," + fmt(stats[i].value_loss) + "," +
           fmt(stats[i].entropy) + "," + fmt(stats[i].clip_fraction) + "\n";
  }
  write_text_atomic(a.explorer_log(name), csv);
  log << name << " explorer: " << stats.size() << " PPO iterations -> " << a.explorer(name).string() << "\n";
}

void cmd_evaluate(const RunConfig& c, std::ostream& log) {
  const Artifacts a = prepare(c);
  const AgentKind agent = agent_kind(c.get("explore.agent"));
  const std::string name = agent_name(agent);
  const World world = load_world(c, a);
  const Corpus demos = load_demos(a, world);
  const Detector detector = load_detector(c, a, world);
  const ImitationModels models = load_imitation(c, a, demos);
  need_artifact(a.explorer(name), "train-explore");
  PolicyNet actor("policy", policy_config(c));
  load_checkpoint(a.explorer(name), params_of(actor));
  ExploreSession session(world, detector, actor, models.path, models.tester(), explore_config(c, agent));
  const std::vector<EpisodeReport> reports =
      explore_and_test(session, static_cast<int>(c.get_int("explore.eval_episodes")));

  std::map<int, double> ap;
  if (c.get("vision.detector") == "fewshot") {
    const FewShotDetector model = FewShotDetector::load(a.detector());
    ap = evaluate_detector(c, &model).per_type;
  } else {
    ap = evaluate_detector(c, nullptr).per_type;
  }
  const MetricsSummary m = aggregate_metrics(reports, world, ap);
  write_episode_reports(a.episodes(name), reports, a.trace(name).filename().string());
  write_trace_csv(a.trace(name), reports);
  write_text_atomic(a.metrics(name), format_summary(m));
  write_text_atomic(a.tested_curve(name), tested_curve_csv(m));
  std::string verdicts = "ooi,type,bugged,reachable,status,js\n";
  const auto first = first_verdicts(reports);
  for (const auto& o : world.oois()) {
    auto it = first.find(o.id);
    const char* status = it == first.end() ? "missed" : it->second.success ? "success" : "failed";
    verdicts += std::to_string(o.id) + "," + ooi_type_name(o.type) + "," + (o.bugged ? "1" : "0") + "," +
                (o.reachable ? "1" : "0") + "," + status + "," + (it == first.end() ? "" : fmt(it->second.js)) + "\n";
  }
  write_text_atomic(a.verdicts(name), verdicts);
  log << name << ": coverage " << m.coverage << ", tested " << m.tested << "/" << m.total_oois << ", success rate "
      << m.success_rate << " -> " << a.metrics(name).string() << "\n";
}

void cmd_render_map(const RunConfig& c, std::ostream& log) {
  const Artifacts a = prepare(c);
  const std::string name = agent_of(c);
  const World world = load_world(c, a);
  need_artifact(a.episodes(name), "evaluate");
  const auto reports = read_episode_reports(a.episodes(name));
  write_ppm(a.coverage_map(name), coverage_map(world, reports));
  write_ppm(a.status_map(name), test_status_map(world, reports));
  log << "maps -> " << a.coverage_map(name).string() << ", " << a.status_map(name).string() << "\n";
}

void cmd_report(const RunConfig& c, std::ostream& log) {
  const Artifacts a = prepare(c);
  const World world = load_world(c, a);
  std::vector<std::pair<std::string, MetricsSummary>> rows;
  for (AgentKind k : {AgentKind::Preference, AgentKind::Novelty, AgentKind::Random}) {
    const std::string name = agent_name(k);
    if (!std::filesystem::exists(a.episodes(name))) continue;
    rows.emplace_back(name, aggregate_metrics(read_episode_reports(a.episodes(name)), world));
  }
  if (rows.empty()) need_artifact(a.episodes(agent_of(c)), "evaluate");

  std::ostringstream out;
  out << "agent       coverage  tested  success_rate\n";
  for (const auto& [name, m] : rows) {
    char line[96];
    std::snprintf(line, sizeof line, "%-10s  %7.3f  %3d/%-3d  %7.3f\n", name.c_str(), m.coverage, m.tested,
                  m.total_oois, m.success_rate);
    out << line;
  }
  out << "unreachable OOIs: " << rows.front().second.unreachable_oois << "\n";
  if (std::filesystem::exists(a.detector_ap())) out << "\ndetector AP\n" << read_text_file(a.detector_ap());
  if (std::filesystem::exists(a.imitation_info())) out << "\nimitation\n" << read_text_file(a.imitation_info());

  std::string curves = "episode";
  std::size_t longest = 0;
  for (const auto& [name, m] : rows) {
    curves += "," + name;
    longest = std::max(longest, m.cumulative_tested.size());
  }
  curves += "\n";
  for (std::size_t e = 0; e < longest; ++e) {
    curves += std::to_string(e + 1);
    for (const auto& [name, m] : rows) {
      curves += "," + (e < m.cumulative_tested.size() ? std::to_string(m.cumulative_tested[e]) : std::string());
    }
    curves += "\n";
  }
  write_text_atomic(a.report(), out.str());
  write_text_atomic(a.tested_curves(), curves);
  log << out.str();
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"gen-world",     "collect-demos", "train-fe",
                                                 "train-detector", "train-il",      "train-explore",
                                                 "evaluate",      "render-map",    "report"};
  return names;
}

void run_command(const std::string& name, const RunConfig& c, std::ostream& log) {
  static const std::map<std::string, void (*)(const RunConfig&, std::ostream&)> table = {
      {"gen-world", cmd_gen_world},   {"collect-demos", cmd_collect_demos}, {"train-fe", cmd_train_fe},
      {"train-detector", cmd_train_detector}, {"train-il", cmd_train_il}, {"train-explore", cmd_train_explore},
      {"evaluate", cmd_evaluate},     {"render-map", cmd_render_map},       {"report", cmd_report}};
  auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown subcommand '" + name + "'");
  it->second(c, log);
}

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const TrainingDivergence& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const InfeasibleSpec& e) {
    err << "error: infeasible world spec: " << e.what() << "\n";
    return 2;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ppgta
