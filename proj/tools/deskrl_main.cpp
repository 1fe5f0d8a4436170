#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "deskrl/metrics.hpp"
#include "deskrl/train.hpp"

namespace fs = std::filesystem;
using namespace deskrl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string default_out_root() {
    const char* env = std::getenv("DESKRL_OUT");
    return env && *env ? env : "out";
}

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& sets) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const std::string& s : sets) {
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(s, "override must look like section.key=value");
        out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return out;
}

TrainConfig load_config(const std::string& path, const std::vector<std::string>& sets,
                        std::int64_t seed_flag) {
    if (!fs::exists(path)) throw ConfigError("config", "config file not found: " + path);
    auto overrides = parse_overrides(sets);
    if (seed_flag >= 0) overrides.emplace_back("run.seed", std::to_string(seed_flag));
    return TrainConfig::from_file(path, overrides);
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets, std::string out_dir,
              std::int64_t seed_flag) {
    TrainConfig cfg = load_config(config_path, sets, seed_flag);
    if (out_dir.empty())
        out_dir = default_out_root() + "/" + cfg.run_id + "-s" + std::to_string(cfg.seed);
    RunArtifacts art = run_training(cfg, out_dir);
    std::cout << "checkpoint: " << art.checkpoint_path << "\n";
    std::cout << "scores: " << art.score_log_path << "\n";
    std::cout << "diagnostics: " << art.diagnostics_path << "\n";
    std::cout << "env_steps: " << art.env_steps << "\nupdates: " << art.updates << "\n";
    std::cout << "eval_mean_return: " << mean_of(art.eval_returns) << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& ckpt, int episodes, const std::string& mode, std::int64_t seed_flag) {
    if (mode != "sample" && mode != "greedy") throw ConfigError("mode", "must be sample or greedy");
    const ActionMode m = mode == "greedy" ? ActionMode::Greedy : ActionMode::Sample;
    const std::uint64_t seed = seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : 0;
    const std::vector<double> returns = evaluate_checkpoint(ckpt, episodes, m, seed);
    std::cout << "episode,return\n";
    for (std::size_t i = 0; i < returns.size(); ++i) std::cout << i << "," << returns[i] << "\n";
    std::cout << "# mean " << mean_of(returns) << " over " << returns.size() << " episodes\n";
    return kExitOk;
}

int cmd_metrics(const std::string& scores, const std::string& anchors, int resamples, double confidence,
                std::int64_t seed_flag, std::string out_dir) {
    ScoreMatrix m = load_scores(scores, anchors);
    const std::uint64_t seed = seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : 0;
    AggregateReport rep = aggregate_report(m, resamples, confidence, seed);
    const std::string text = render_report(rep);
    std::cout << text;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream out(out_dir + "/report.csv");
        out << text;
        std::cout << "# report written to " << out_dir << "/report.csv\n";
    }
    return kExitOk;
}

int cmd_report(const std::string& score_log) {
    std::ifstream in(score_log);
    if (!in) throw std::runtime_error("report: cannot open " + score_log);
    std::string line;
    std::map<std::string, std::vector<double>> by_phase;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("run_id,", 0) == 0) continue;
        }
        std::istringstream ss(line);
        std::string run_id, seed, phase, episode, ret;
        std::getline(ss, run_id, ',');
        std::getline(ss, seed, ',');
        std::getline(ss, phase, ',');
        std::getline(ss, episode, ',');
        std::getline(ss, ret, ',');
        by_phase[phase].push_back(std::stod(ret));
    }
    std::cout << "phase,episodes,mean,min,max\n";
    for (const auto& [phase, vals] : by_phase) {
        double lo = vals[0], hi = vals[0];
        for (double v : vals) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        std::cout << phase << "," << vals.size() << "," << mean_of(vals) << "," << lo << "," << hi << "\n";
    }
    return kExitOk;
}

struct AblationArm {
    std::string name;
    std::vector<std::pair<std::string, std::string>> deltas;
};

std::vector<AblationArm> suite_arms(const std::string& suite, const TrainConfig& base) {
    if (suite == "variance_reduction")
        return {{"baseline", {{"agent.use_baseline", "true"}}},
                {"no_baseline", {{"agent.use_baseline", "false"}}}};
    if (suite == "beta_annealing")
        return {{"annealed", {{"schedules.beta_mode", "anneal"}}},
                {"constant", {{"schedules.beta_mode", "constant"}}}};
    if (suite == "eval_mode")
        return {{"sample", {{"eval.mode", "sample"}}}, {"greedy", {{"eval.mode", "greedy"}}}};
    if (suite == "rr_scaling") {
        char hi[32];
        std::snprintf(hi, sizeof(hi), "%g", base.rr * 2.0);
        char lo[32];
        std::snprintf(lo, sizeof(lo), "%g", base.rr);
        return {{"rr_low", {{"schedules.rr", lo}}}, {"rr_high", {{"schedules.rr", hi}}}};
    }
    throw ConfigError("suite", "unknown suite " + suite +
                                   " (expected variance_reduction|beta_annealing|eval_mode|rr_scaling)");
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& sets,
               const std::string& suite, std::string out_dir, std::int64_t seed_flag) {
    TrainConfig base = load_config(config_path, sets, seed_flag);
    std::vector<std::int64_t> seeds = base.seeds;
    if (seeds.empty()) seeds.push_back(static_cast<std::int64_t>(base.seed));

    if (out_dir.empty()) out_dir = default_out_root() + "/ablate-" + suite;
    fs::create_directories(out_dir);
    std::ofstream table(out_dir + "/comparison.csv");
    table << "suite,arm,seed,episodes,mean_return,status\n";

    const std::vector<AblationArm> arms = suite_arms(suite, base);
    bool any_failed = false;
    std::map<std::string, std::vector<double>> arm_means;

    for (const AblationArm& arm : arms) {
        for (std::int64_t seed : seeds) {
            auto overrides = parse_overrides(sets);
            for (const auto& d : arm.deltas) overrides.push_back(d);
            overrides.emplace_back("run.seed", std::to_string(seed));
            TrainConfig cfg = TrainConfig::from_file(config_path, overrides);
            const std::string run_dir = out_dir + "/" + arm.name + "/s" + std::to_string(seed);
            try {
                RunArtifacts art = run_training(cfg, run_dir);
                const double m = mean_of(art.eval_returns);
                arm_means[arm.name].push_back(m);
                table << suite << "," << arm.name << "," << seed << "," << art.eval_returns.size() << ","
                      << m << ",ok\n";
                table.flush();
            } catch (const std::exception& e) {
                any_failed = true;
                table << suite << "," << arm.name << "," << seed << ",0,nan,failed\n";
                table.flush();
                std::cerr << "arm " << arm.name << " seed " << seed << " failed: " << e.what() << "\n";
            }
        }
    }

    // per-arm aggregates; CIs over seeds only when there is more than one
    std::ofstream agg(out_dir + "/aggregate.csv");
    agg << "suite,arm,seeds,mean_return,ci_low,ci_high\n";
    for (const AblationArm& arm : arms) {
        const std::vector<double>& means = arm_means[arm.name];
        if (means.empty()) {
            agg << suite << "," << arm.name << ",0,nan,,\n";
            continue;
        }
        agg << suite << "," << arm.name << "," << means.size() << "," << mean_of(means);
        if (means.size() > 1) {
            ScoreMatrix sm;
            sm.games = {arm.name};
            sm.scores = {means};
            sm.anchors = {{0.0, 1.0}};
            Rng rng(base.seed);
            auto [lo, hi] = stratified_bootstrap_ci(sm, Metric::Mean, 1000, 0.95, rng);
            agg << "," << lo << "," << hi << "\n";
        } else {
            agg << ",,\n";
        }
    }

    std::cout << "comparison: " << out_dir << "/comparison.csv\n";
    std::cout << "aggregate: " << out_dir << "/aggregate.csv\n";
    return any_failed ? kExitRuntime : kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deskrl: desk-scale discrete actor-critic laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir, ckpt_path, scores_path, anchors_path, mode = "sample";
    std::string suite, score_log;
    std::vector<std::string> sets;
    std::int64_t seed_flag = -1;
    int episodes = 100;
    int resamples = 2000;
    double confidence = 0.95;

    CLI::App* train = app.add_subcommand("train", "run a training job");
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--set", sets, "override: section.key=value")->take_all();
    train->add_option("--out", out_dir, "output directory (default $DESKRL_OUT/<run_id>-s<seed>)");
    train->add_option("--seed", seed_flag, "override run.seed");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("checkpoint", ckpt_path, "checkpoint path")->required();
    eval->add_option("--episodes", episodes, "number of episodes");
    eval->add_option("--mode", mode, "sample | greedy");
    eval->add_option("--seed", seed_flag, "evaluation seed");

    CLI::App* metrics = app.add_subcommand("metrics", "aggregate metrics with bootstrap CIs");
    metrics->add_option("scores", scores_path, "csv: game,run_id,score")->required();
    metrics->add_option("anchors", anchors_path, "csv: game,random,human")->required();
    metrics->add_option("--resamples", resamples, "bootstrap resamples");
    metrics->add_option("--confidence", confidence, "confidence level");
    metrics->add_option("--seed", seed_flag, "bootstrap seed");
    metrics->add_option("--out", out_dir, "directory for report.csv");

    CLI::App* ablate = app.add_subcommand("ablate", "matched-pair ablation suite");
    ablate->add_option("--suite", suite, "variance_reduction|beta_annealing|eval_mode|rr_scaling")
        ->required();
    ablate->add_option("--config", config_path, "base config file")->required();
    ablate->add_option("--set", sets, "override: section.key=value")->take_all();
    ablate->add_option("--out", out_dir, "output directory");
    ablate->add_option("--seed", seed_flag, "override run.seed");

    CLI::App* report = app.add_subcommand("report", "summarize a score log");
    report->add_option("scorelog", score_log, "scores.csv from a training run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, sets, out_dir, seed_flag);
        if (eval->parsed()) return cmd_eval(ckpt_path, episodes, mode, seed_flag);
        if (metrics->parsed())
            return cmd_metrics(scores_path, anchors_path, resamples, confidence, seed_flag, out_dir);
        if (ablate->parsed()) return cmd_ablate(config_path, sets, suite, out_dir, seed_flag);
        if (report->parsed()) return cmd_report(score_log);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
