#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace deskrl {

/// Raised for malformed or inconsistent configuration; carries the
/// offending section.key path when one is known.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& key_path, const std::string& msg)
        : std::runtime_error(key_path.empty() ? msg : key_path + ": " + msg), key(key_path) {}
    std::string key;
};

/// INI-style sectioned text: `[section]` headers, `key = value` lines,
/// `#` comments. Keys are addressed as "section.key".
class ConfigDoc {
  public:
    static ConfigDoc parse(const std::string& text);
    static ConfigDoc parse_file(const std::string& path);

    bool has(const std::string& path) const { return values_.count(path) != 0; }
    /// Throws ConfigError for overrides of keys that were never defined.
    void set(const std::string& path, const std::string& value);

    std::string get_str(const std::string& path, const std::string& fallback) const;
    double get_num(const std::string& path, double fallback) const;
    std::int64_t get_int(const std::string& path, std::int64_t fallback) const;
    bool get_bool(const std::string& path, bool fallback) const;
    std::vector<std::int64_t> get_int_list(const std::string& path,
                                           const std::vector<std::int64_t>& fallback) const;

    std::string render() const;

  private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
};

/// Everything the training loop needs; defaults are the desk-scale values.
struct TrainConfig {
    // env
    std::string env_type = "gridworld"; // gridworld | chain | random | file
    int width = 5, height = 5, goal_x = 4, goal_y = 4;
    double step_reward = -0.01, goal_reward = 1.0, slip = 0.0;
    int chain_length = 8;
    double chain_reward = 1.0;
    int random_states = 10, random_actions = 4;
    double env_gamma = 0.99;
    int episode_cap = 500;
    std::string env_file;

    // agent
    int hidden = 128, latent = 64, proj = 32, spr_horizon = 5;
    double lr = 3e-4, weight_decay = 1e-4, tau = 0.995;
    double spr_weight = 2.0, huber_delta = 1.0;
    int batch = 32;
    std::int64_t buffer_capacity = 100000;
    bool use_baseline = true;
    bool wd_policy = true;
    std::string pg_mode = "sampled"; // sampled | exact

    // schedules
    double rr = 2.0;
    std::int64_t total_env_steps = 30000;
    double beta0 = 0.01;
    std::string beta_mode = "anneal"; // anneal | constant
    std::int64_t anneal_end = -1;     // -1: half the total updates
    std::int64_t freeze_updates = -1; // -1: 10% of total updates
    std::int64_t n_start = 10, n_end = 3;
    double gamma_start = 0.97, gamma_end = 0.997;
    std::int64_t schedule_horizon = 2500;
    std::int64_t reset_period = 2000;
    double keep_encoder = 0.5, keep_heads = 0.0;

    // eval
    std::int64_t eval_episodes = 50;
    std::string eval_mode = "sample"; // sample | greedy

    // run
    std::string run_id = "run";
    std::uint64_t seed = 0;
    std::vector<std::int64_t> seeds;
    std::int64_t diag_every = 1;

    std::int64_t total_updates() const;
    std::int64_t resolved_anneal_end() const;
    std::int64_t resolved_freeze() const;

    static TrainConfig from_doc(const ConfigDoc& doc);
    static TrainConfig from_file(const std::string& path,
                                 const std::vector<std::pair<std::string, std::string>>& overrides = {});

    /// Cross-field checks; throws ConfigError naming the offending key.
    void validate() const;

    /// Canonical text round-trip of every field (the provenance echo).
    std::string echo() const;
};

} // namespace deskrl
