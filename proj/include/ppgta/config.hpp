#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ppgta/explore.hpp"

namespace ppgta {

/// Flat key=value configuration with dotted section keys. Every key has a registered default;
/// unknown keys and malformed values raise ConfigError naming the key.
class RunConfig {
 public:
  RunConfig();

  void set(const std::string& key, const std::string& value);
  /// Parses one `key=value` assignment.
  void assign(const std::string& assignment);
  /// Applies a config file: one assignment per line, `#` comments and blank lines ignored.
  void load(const std::filesystem::path& path);
  /// Serialized form that `load` reads back to an identical config.
  std::string dump() const;

  const std::string& get(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  friend bool operator==(const RunConfig&, const RunConfig&) = default;

 private:
  std::map<std::string, std::string> values_;
};

WorldSpec world_spec(const RunConfig& c);
DemoCounts demo_counts(const RunConfig& c);
EncoderConfig encoder_config(const RunConfig& c);
EncoderTrainConfig encoder_train_config(const RunConfig& c);
PolicyConfig policy_config(const RunConfig& c);
ImitationConfig imitation_config(const RunConfig& c);

enum class AgentKind { Preference, Novelty, Random };
AgentKind agent_kind(const std::string& name);
const char* agent_name(AgentKind kind);

/// Exploration settings for one agent variant: novelty fixes alpha at 0, random takes uniform actions.
ExploreConfig explore_config(const RunConfig& c, AgentKind agent);

/// Output directory: PPGTA_OUT when set, else run.out.
std::filesystem::path output_dir(const RunConfig& c);

}  // namespace ppgta
