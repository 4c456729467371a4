#include "ppgta/config.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>

#include "ppgta/io.hpp"

namespace ppgta {

namespace {

const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> d = {
      {"run.out", "ppgta_out"},

      {"world.seed", "7"},
      {"world.grid_size", "64"},
      {"world.path_density", "0.15"},
      {"world.n_ooi", "40"},
      {"world.bug_ratio", "0.5"},
      {"world.n_invisible_walls", "2"},
      {"world.n_gaps", "6"},

      {"demos.seed", "11"},
      {"demos.orbit", "150"},
      {"demos.path", "50"},
      {"demos.path_length", "160"},
      {"demos.split_seed", "3"},

      {"vision.detector", "oracle"},
      {"vision.shots", "20"},
      {"vision.train_frames", "400"},
      {"vision.eval_frames", "200"},
      {"vision.eval_worlds", "3"},
      {"vision.seed", "5"},

      {"fe.channels", "16,32,64"},
      {"fe.embedding", "128"},
      {"fe.epochs", "40"},
      {"fe.batch", "64"},
      {"fe.mask_probability", "0.5"},
      {"fe.max_pairs_per_epoch", "0"},
      {"fe.seed", "1"},
      {"fe.lr_warmup_start", "2e-3"},
      {"fe.lr_peak", "1e-2"},
      {"fe.lr_warmup_epochs", "10"},
      {"fe.lr_final", "1e-4"},

      {"il.window", "4"},
      {"il.local_hidden", "32"},
      {"il.global_hidden", "64"},
      {"il.mlp1", "64"},
      {"il.mlp2", "32"},
      {"il.dropout", "0.2"},
      {"il.epochs", "40"},
      {"il.batch", "64"},
      {"il.patience", "5"},
      {"il.lambda", "0.5"},
      {"il.tau_teacher", "0.04"},
      {"il.tau_student", "0.1"},
      {"il.ema", "0.996"},
      {"il.finetune_encoder", "true"},
      {"il.seed", "1"},
      {"il.lr_warmup_start", "2e-3"},
      {"il.lr_peak", "1e-2"},
      {"il.lr_warmup_epochs", "10"},
      {"il.lr_final", "1e-4"},

      {"novelty.ensemble", "5"},
      {"novelty.buffer", "1024"},
      {"novelty.batch", "64"},
      {"novelty.train_every", "1"},
      {"novelty.lr", "1e-3"},
      {"novelty.normalize", "true"},

      {"alpha.init", "0.8"},
      {"alpha.min", "0.5"},
      {"alpha.max", "0.8"},
      {"alpha.down_rate", "0.05"},
      {"alpha.up_rate", "0.1"},
      {"alpha.epsilon", "-0.1"},

      {"ppo.clip", "0.2"},
      {"ppo.epochs", "4"},
      {"ppo.minibatch", "64"},
      {"ppo.gamma", "0.99"},
      {"ppo.gae_lambda", "0.95"},
      {"ppo.value_coef", "0.5"},
      {"ppo.entropy_coef", "0.01"},
      {"ppo.lr", "3e-5"},
      {"ppo.max_grad_norm", "0.5"},

      {"explore.agent", "preference"},
      {"explore.horizon", "300"},
      {"explore.train_episodes", "20"},
      {"explore.eval_episodes", "45"},
      {"explore.trigger_area", "0.04"},
      {"explore.resume_at_trigger", "true"},
      {"explore.novelty_warm_start", "false"},
      {"explore.seed", "1"},
  };
  return d;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("config key '" + key + "': '" + value + "' is not " + what);
}

LrSchedule schedule(const RunConfig& c, const std::string& section, int epochs) {
  LrSchedule s;
  s.warmup_start = c.get_double(section + ".lr_warmup_start");
  s.peak = c.get_double(section + ".lr_peak");
  s.warmup_epochs = c.get_double(section + ".lr_warmup_epochs");
  s.final_lr = c.get_double(section + ".lr_final");
  s.total_epochs = epochs;
  return s;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  const std::string previous = it->second;
  it->second = value;
  // Validate eagerly so errors name the offending key at assignment time.
  const std::string& def = [&]() -> const std::string& {
    for (const auto& [k, v] : defaults()) {
      if (k == key) return v;
    }
    return value;
  }();
  try {
    if (def == "true" || def == "false") {
      get_bool(key);
    } else if (key == "fe.channels") {
      get_int_list(key);
    } else if (!def.empty() && (std::isdigit(static_cast<unsigned char>(def[0])) || def[0] == '-')) {
      get_double(key);
    }
  } catch (...) {
    it->second = previous;  // a rejected value leaves the config untouched
    throw;
  }
}

void RunConfig::assign(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("config assignment '" + assignment + "' lacks '='");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (!line.empty()) assign(line);
  }
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0') bad_value(key, v, "an integer");
  return x;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || *end != '\0') bad_value(key, v, "an unsigned integer");
  return x;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') bad_value(key, v, "a number");
  return x;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean");
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  const std::string& v = get(key);
  std::vector<int> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    char* end = nullptr;
    const long x = std::strtol(item.c_str(), &end, 10);
    if (item.empty() || *end != '\0' || x <= 0) bad_value(key, v, "a comma-separated list of positive integers");
    out.push_back(static_cast<int>(x));
  }
  if (out.empty()) bad_value(key, v, "a comma-separated list of positive integers");
  return out;
}

WorldSpec world_spec(const RunConfig& c) {
  WorldSpec s;
  s.seed = c.get_u64("world.seed");
  s.grid_size = static_cast<int>(c.get_int("world.grid_size"));
  s.path_density = c.get_double("world.path_density");
  s.n_ooi = static_cast<int>(c.get_int("world.n_ooi"));
  s.bug_ratio = c.get_double("world.bug_ratio");
  s.n_invisible_walls = static_cast<int>(c.get_int("world.n_invisible_walls"));
  s.n_gaps = static_cast<int>(c.get_int("world.n_gaps"));
  return s;
}

DemoCounts demo_counts(const RunConfig& c) {
  DemoCounts d;
  d.orbit = static_cast<int>(c.get_int("demos.orbit"));
  d.path = static_cast<int>(c.get_int("demos.path"));
  d.path_length = static_cast<int>(c.get_int("demos.path_length"));
  return d;
}

EncoderConfig encoder_config(const RunConfig& c) {
  EncoderConfig e;
  e.channels = c.get_int_list("fe.channels");
  e.embedding = static_cast<int>(c.get_int("fe.embedding"));
  return e;
}

EncoderTrainConfig encoder_train_config(const RunConfig& c) {
  EncoderTrainConfig t;
  t.epochs = static_cast<int>(c.get_int("fe.epochs"));
  t.batch = static_cast<int>(c.get_int("fe.batch"));
  t.mask_probability = c.get_double("fe.mask_probability");
  t.max_pairs_per_epoch = static_cast<int>(c.get_int("fe.max_pairs_per_epoch"));
  t.seed = c.get_u64("fe.seed");
  t.schedule = schedule(c, "fe", t.epochs);
  return t;
}

PolicyConfig policy_config(const RunConfig& c) {
  PolicyConfig p;
  p.encoder = encoder_config(c);
  p.window = static_cast<int>(c.get_int("il.window"));
  p.local_hidden = static_cast<int>(c.get_int("il.local_hidden"));
  p.global_hidden = static_cast<int>(c.get_int("il.global_hidden"));
  p.mlp1 = static_cast<int>(c.get_int("il.mlp1"));
  p.mlp2 = static_cast<int>(c.get_int("il.mlp2"));
  p.dropout = static_cast<float>(c.get_double("il.dropout"));
  return p;
}

ImitationConfig imitation_config(const RunConfig& c) {
  ImitationConfig i;
  i.finetune_encoder = c.get_bool("il.finetune_encoder");
  i.epochs = static_cast<int>(c.get_int("il.epochs"));
  i.batch = static_cast<int>(c.get_int("il.batch"));
  i.patience = static_cast<int>(c.get_int("il.patience"));
  i.ema_momentum = c.get_double("il.ema");
  i.loss.lambda = c.get_double("il.lambda");
  i.loss.tau_teacher = c.get_double("il.tau_teacher");
  i.loss.tau_student = c.get_double("il.tau_student");
  i.seed = c.get_u64("il.seed");
  i.schedule = schedule(c, "il", i.epochs);
  return i;
}

AgentKind agent_kind(const std::string& name) {
  if (name == "preference") return AgentKind::Preference;
  if (name == "novelty") return AgentKind::Novelty;
  if (name == "random") return AgentKind::Random;
  throw ConfigError("config key 'explore.agent': '" + name + "' is not one of preference|novelty|random");
}

const char* agent_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::Preference: return "preference";
    case AgentKind::Novelty: return "novelty";
    case AgentKind::Random: return "random";
  }
  return "?";
}

ExploreConfig explore_config(const RunConfig& c, AgentKind agent) {
  ExploreConfig e;
  e.horizon = static_cast<int>(c.get_int("explore.horizon"));
  e.trigger_area = c.get_double("explore.trigger_area");
  e.resume_at_trigger = c.get_bool("explore.resume_at_trigger");
  e.seed = c.get_u64("explore.seed");

  e.novelty.ensemble = static_cast<int>(c.get_int("novelty.ensemble"));
  e.novelty.buffer = static_cast<std::size_t>(c.get_int("novelty.buffer"));
  e.novelty.batch = static_cast<int>(c.get_int("novelty.batch"));
  e.novelty.lr = c.get_double("novelty.lr");
  e.novelty.seed = e.seed;
  e.novelty_train_every = static_cast<int>(c.get_int("novelty.train_every"));
  e.normalize_novelty = c.get_bool("novelty.normalize");

  e.alpha.init = c.get_double("alpha.init");
  e.alpha.min = c.get_double("alpha.min");
  e.alpha.max = c.get_double("alpha.max");
  e.alpha.down_rate = c.get_double("alpha.down_rate");
  e.alpha.up_rate = c.get_double("alpha.up_rate");
  e.alpha.epsilon = c.get_double("alpha.epsilon");

  e.ppo.clip = c.get_double("ppo.clip");
  e.ppo.epochs = static_cast<int>(c.get_int("ppo.epochs"));
  e.ppo.minibatch = static_cast<int>(c.get_int("ppo.minibatch"));
  e.ppo.gamma = c.get_double("ppo.gamma");
  e.ppo.gae_lambda = c.get_double("ppo.gae_lambda");
  e.ppo.value_coef = c.get_double("ppo.value_coef");
  e.ppo.entropy_coef = c.get_double("ppo.entropy_coef");
  e.ppo.lr = c.get_double("ppo.lr");
  e.ppo.max_grad_norm = c.get_double("ppo.max_grad_norm");

  switch (agent) {
    case AgentKind::Preference:
      e.alpha_mode = AlphaMode::Adaptive;
      break;
    case AgentKind::Novelty:
      e.alpha_mode = AlphaMode::Fixed;
      e.fixed_alpha = 0.0;
      break;
    case AgentKind::Random:
      e.random_actions = true;
      break;
  }
  return e;
}

std::filesystem::path output_dir(const RunConfig& c) {
  if (const char* env = std::getenv("PPGTA_OUT"); env && *env) return env;
  return c.get("run.out");
}

}  // namespace ppgta
