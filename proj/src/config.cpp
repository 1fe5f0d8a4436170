#include "deskrl/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace deskrl {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

ConfigDoc ConfigDoc::parse(const std::string& text) {
    ConfigDoc doc;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("", "line " + std::to_string(line_no) + ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ConfigError("", "line " + std::to_string(line_no) + ": empty section name");
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError("", "line " + std::to_string(line_no) + ": empty key");
        if (section.empty()) throw ConfigError(key, "key outside any [section]");
        const std::string path = section + "." + key;
        if (!doc.values_.count(path)) doc.order_.push_back(path);
        doc.values_[path] = value;
    }
    return doc;
}

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void ConfigDoc::set(const std::string& path, const std::string& value) {
    if (!values_.count(path)) throw ConfigError(path, "unknown config key");
    values_[path] = value;
}

std::string ConfigDoc::get_str(const std::string& path, const std::string& fallback) const {
    auto it = values_.find(path);
    return it == values_.end() ? fallback : it->second;
}

double ConfigDoc::get_num(const std::string& path, double fallback) const {
    auto it = values_.find(path);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(path, "expected a number, found '" + it->second + "'");
    }
}

std::int64_t ConfigDoc::get_int(const std::string& path, std::int64_t fallback) const {
    auto it = values_.find(path);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(path, "expected an integer, found '" + it->second + "'");
    }
}

bool ConfigDoc::get_bool(const std::string& path, bool fallback) const {
    auto it = values_.find(path);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "on") return true;
    if (it->second == "false" || it->second == "0" || it->second == "off") return false;
    throw ConfigError(path, "expected a boolean, found '" + it->second + "'");
}

std::vector<std::int64_t> ConfigDoc::get_int_list(const std::string& path,
                                                  const std::vector<std::int64_t>& fallback) const {
    auto it = values_.find(path);
    if (it == values_.end()) return fallback;
    std::vector<std::int64_t> out;
    std::string item;
    std::istringstream ss(it->second);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stoll(item));
        } catch (...) {
            throw ConfigError(path, "expected a comma-separated integer list");
        }
    }
    return out;
}

std::string ConfigDoc::render() const {
    std::string out, section;
    for (const std::string& path : order_) {
        std::size_t dot = path.find('.');
        const std::string sec = path.substr(0, dot);
        if (sec != section) {
            if (!out.empty()) out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += path.substr(dot + 1) + " = " + values_.at(path) + "\n";
    }
    return out;
}

std::int64_t TrainConfig::total_updates() const {
    double acc = 0.0;
    std::int64_t updates = 0;
    for (std::int64_t s = 0; s < total_env_steps; ++s) {
        acc += rr;
        while (acc >= 1.0) {
            acc -= 1.0;
            ++updates;
        }
    }
    return updates;
}

std::int64_t TrainConfig::resolved_anneal_end() const {
    return anneal_end >= 0 ? anneal_end : total_updates() / 2;
}

std::int64_t TrainConfig::resolved_freeze() const {
    return freeze_updates >= 0 ? freeze_updates : total_updates() / 10;
}

TrainConfig TrainConfig::from_doc(const ConfigDoc& doc) {
    TrainConfig c;
    c.env_type = doc.get_str("env.type", c.env_type);
    c.width = static_cast<int>(doc.get_int("env.width", c.width));
    c.height = static_cast<int>(doc.get_int("env.height", c.height));
    c.goal_x = static_cast<int>(doc.get_int("env.goal_x", c.goal_x));
    c.goal_y = static_cast<int>(doc.get_int("env.goal_y", c.goal_y));
    c.step_reward = doc.get_num("env.step_reward", c.step_reward);
    c.goal_reward = doc.get_num("env.goal_reward", c.goal_reward);
    c.slip = doc.get_num("env.slip", c.slip);
    c.chain_length = static_cast<int>(doc.get_int("env.chain_length", c.chain_length));
    c.chain_reward = doc.get_num("env.chain_reward", c.chain_reward);
    c.random_states = static_cast<int>(doc.get_int("env.random_states", c.random_states));
    c.random_actions = static_cast<int>(doc.get_int("env.random_actions", c.random_actions));
    c.env_gamma = doc.get_num("env.gamma", c.env_gamma);
    c.episode_cap = static_cast<int>(doc.get_int("env.episode_cap", c.episode_cap));
    c.env_file = doc.get_str("env.file", c.env_file);

    c.hidden = static_cast<int>(doc.get_int("agent.hidden", c.hidden));
    c.latent = static_cast<int>(doc.get_int("agent.latent", c.latent));
    c.proj = static_cast<int>(doc.get_int("agent.proj", c.proj));
    c.spr_horizon = static_cast<int>(doc.get_int("agent.spr_horizon", c.spr_horizon));
    c.lr = doc.get_num("agent.lr", c.lr);
    c.weight_decay = doc.get_num("agent.weight_decay", c.weight_decay);
    c.tau = doc.get_num("agent.tau", c.tau);
    c.spr_weight = doc.get_num("agent.spr_weight", c.spr_weight);
    c.huber_delta = doc.get_num("agent.huber_delta", c.huber_delta);
    c.batch = static_cast<int>(doc.get_int("agent.batch", c.batch));
    c.buffer_capacity = doc.get_int("agent.buffer_capacity", c.buffer_capacity);
    c.use_baseline = doc.get_bool("agent.use_baseline", c.use_baseline);
    c.wd_policy = doc.get_bool("agent.wd_policy", c.wd_policy);
    c.pg_mode = doc.get_str("agent.pg_mode", c.pg_mode);

    c.rr = doc.get_num("schedules.rr", c.rr);
    c.total_env_steps = doc.get_int("schedules.total_env_steps", c.total_env_steps);
    c.beta0 = doc.get_num("schedules.beta0", c.beta0);
    c.beta_mode = doc.get_str("schedules.beta_mode", c.beta_mode);
    c.anneal_end = doc.get_int("schedules.anneal_end", c.anneal_end);
    c.freeze_updates = doc.get_int("schedules.freeze_updates", c.freeze_updates);
    c.n_start = doc.get_int("schedules.n_start", c.n_start);
    c.n_end = doc.get_int("schedules.n_end", c.n_end);
    c.gamma_start = doc.get_num("schedules.gamma_start", c.gamma_start);
    c.gamma_end = doc.get_num("schedules.gamma_end", c.gamma_end);
    c.schedule_horizon = doc.get_int("schedules.horizon", c.schedule_horizon);
    c.reset_period = doc.get_int("schedules.reset_period", c.reset_period);
    c.keep_encoder = doc.get_num("schedules.keep_encoder", c.keep_encoder);
    c.keep_heads = doc.get_num("schedules.keep_heads", c.keep_heads);

    c.eval_episodes = doc.get_int("eval.episodes", c.eval_episodes);
    c.eval_mode = doc.get_str("eval.mode", c.eval_mode);

    c.run_id = doc.get_str("run.run_id", c.run_id);
    c.seed = static_cast<std::uint64_t>(doc.get_int("run.seed", static_cast<std::int64_t>(c.seed)));
    c.seeds = doc.get_int_list("run.seeds", c.seeds);
    c.diag_every = doc.get_int("run.diag_every", c.diag_every);

    c.validate();
    return c;
}

TrainConfig TrainConfig::from_file(const std::string& path,
                                   const std::vector<std::pair<std::string, std::string>>& overrides) {
    ConfigDoc doc = ConfigDoc::parse_file(path);
    for (const auto& [k, v] : overrides) doc.set(k, v);
    return from_doc(doc);
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& msg) { throw ConfigError(key, msg); };

    if (env_type != "gridworld" && env_type != "chain" && env_type != "random" && env_type != "file")
        fail("env.type", "must be gridworld, chain, random, or file");
    if (!(env_gamma > 0.0 && env_gamma < 1.0)) fail("env.gamma", "must lie in (0, 1)");
    if (episode_cap < 1) fail("env.episode_cap", "must be positive");
    if (env_type == "gridworld") {
        if (width < 1 || height < 1 || width * height < 2) fail("env.width", "grid needs at least two cells");
        if (!(slip >= 0.0 && slip < 1.0)) fail("env.slip", "must lie in [0, 1)");
        if (goal_x < 0 || goal_x >= width || goal_y < 0 || goal_y >= height)
            fail("env.goal_x", "goal outside grid");
    }
    if (env_type == "chain" && chain_length < 2) fail("env.chain_length", "must be at least 2");
    if (env_type == "file" && env_file.empty()) fail("env.file", "required for env.type = file");

    if (hidden < 1 || latent < 1 || proj < 1) fail("agent.hidden", "layer sizes must be positive");
    if (spr_horizon < 1) fail("agent.spr_horizon", "must be at least 1");
    if (!(lr > 0.0)) fail("agent.lr", "must be positive");
    if (weight_decay < 0.0) fail("agent.weight_decay", "must be nonnegative");
    if (!(tau >= 0.0 && tau <= 1.0)) fail("agent.tau", "must lie in [0, 1]");
    if (batch < 1) fail("agent.batch", "must be positive");
    if (buffer_capacity < 1) fail("agent.buffer_capacity", "must be positive");
    if (pg_mode != "sampled" && pg_mode != "exact") fail("agent.pg_mode", "must be sampled or exact");

    if (!(rr > 0.0)) fail("schedules.rr", "replay ratio must be positive");
    if (total_env_steps < 1) fail("schedules.total_env_steps", "must be positive");
    if (beta0 < 0.0) fail("schedules.beta0", "must be nonnegative");
    if (beta_mode != "anneal" && beta_mode != "constant") fail("schedules.beta_mode", "must be anneal or constant");
    if (n_start < n_end || n_end < 1) fail("schedules.n_start", "need n_start >= n_end >= 1");
    if (!(gamma_start > 0.0 && gamma_start <= gamma_end && gamma_end < 1.0))
        fail("schedules.gamma_start", "need 0 < gamma_start <= gamma_end < 1");
    if (schedule_horizon < 1) fail("schedules.horizon", "must be positive");
    if (reset_period < 0) fail("schedules.reset_period", "must be nonnegative (0 disables resets)");
    if (!(keep_encoder >= 0.0 && keep_encoder <= 1.0)) fail("schedules.keep_encoder", "must lie in [0, 1]");
    if (!(keep_heads >= 0.0 && keep_heads <= 1.0)) fail("schedules.keep_heads", "must lie in [0, 1]");

    const std::int64_t tu = total_updates();
    const std::int64_t fz = resolved_freeze();
    if (fz >= tu && beta_mode == "anneal") fail("schedules.freeze_updates", "freeze must be shorter than the run");
    if (beta_mode == "anneal" && resolved_anneal_end() > tu - fz)
        fail("schedules.anneal_end", "annealing must finish before the freeze window");

    if (eval_episodes < 0) fail("eval.episodes", "must be nonnegative");
    if (eval_mode != "sample" && eval_mode != "greedy") fail("eval.mode", "must be sample or greedy");
    if (diag_every < 1) fail("run.diag_every", "must be positive");
}

std::string TrainConfig::echo() const {
    std::ostringstream o;
    o << "[env]\n";
    o << "type = " << env_type << "\n";
    o << "width = " << width << "\nheight = " << height << "\n";
    o << "goal_x = " << goal_x << "\ngoal_y = " << goal_y << "\n";
    o << "step_reward = " << fmt_num(step_reward) << "\ngoal_reward = " << fmt_num(goal_reward) << "\n";
    o << "slip = " << fmt_num(slip) << "\n";
    o << "chain_length = " << chain_length << "\nchain_reward = " << fmt_num(chain_reward) << "\n";
    o << "random_states = " << random_states << "\nrandom_actions = " << random_actions << "\n";
    o << "gamma = " << fmt_num(env_gamma) << "\nepisode_cap = " << episode_cap << "\n";
    if (!env_file.empty()) o << "file = " << env_file << "\n";
    o << "\n[agent]\n";
    o << "hidden = " << hidden << "\nlatent = " << latent << "\nproj = " << proj << "\n";
    o << "spr_horizon = " << spr_horizon << "\n";
    o << "lr = " << fmt_num(lr) << "\nweight_decay = " << fmt_num(weight_decay) << "\n";
    o << "tau = " << fmt_num(tau) << "\nspr_weight = " << fmt_num(spr_weight) << "\n";
    o << "huber_delta = " << fmt_num(huber_delta) << "\nbatch = " << batch << "\n";
    o << "buffer_capacity = " << buffer_capacity << "\n";
    o << "use_baseline = " << (use_baseline ? "true" : "false") << "\n";
    o << "wd_policy = " << (wd_policy ? "true" : "false") << "\n";
    o << "pg_mode = " << pg_mode << "\n";
    o << "\n[schedules]\n";
    o << "rr = " << fmt_num(rr) << "\ntotal_env_steps = " << total_env_steps << "\n";
    o << "beta0 = " << fmt_num(beta0) << "\nbeta_mode = " << beta_mode << "\n";
    o << "anneal_end = " << anneal_end << "\nfreeze_updates = " << freeze_updates << "\n";
    o << "n_start = " << n_start << "\nn_end = " << n_end << "\n";
    o << "gamma_start = " << fmt_num(gamma_start) << "\ngamma_end = " << fmt_num(gamma_end) << "\n";
    o << "horizon = " << schedule_horizon << "\nreset_period = " << reset_period << "\n";
    o << "keep_encoder = " << fmt_num(keep_encoder) << "\nkeep_heads = " << fmt_num(keep_heads) << "\n";
    o << "\n[eval]\n";
    o << "episodes = " << eval_episodes << "\nmode = " << eval_mode << "\n";
    o << "\n[run]\n";
    o << "run_id = " << run_id << "\nseed = " << seed << "\n";
    if (!seeds.empty()) {
        o << "seeds = ";
        for (std::size_t i = 0; i < seeds.size(); ++i) o << (i ? "," : "") << seeds[i];
        o << "\n";
    }
    o << "diag_every = " << diag_every << "\n";
    return o.str();
}

} // namespace deskrl
