#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "deskrl/train.hpp"

using namespace deskrl;
namespace fs = std::filesystem;

namespace {

// tiny chain setup that trains in well under a second
TrainConfig tiny_config() {
    TrainConfig c;
    c.env_type = "chain";
    c.chain_length = 5;
    c.env_gamma = 0.9;
    c.episode_cap = 50;
    c.hidden = 8;
    c.latent = 6;
    c.proj = 4;
    c.spr_horizon = 2;
    c.batch = 4;
    c.buffer_capacity = 4096;
    c.rr = 2.0;
    c.total_env_steps = 300;
    c.n_start = 5;
    c.n_end = 2;
    c.schedule_horizon = 100;
    c.reset_period = 200;
    c.anneal_end = 200;
    c.freeze_updates = 60;
    c.eval_episodes = 5;
    c.diag_every = 1;
    c.run_id = "tiny";
    c.seed = 0;
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct DiagRow {
    std::int64_t update;
    double beta, n, gamma;
};

std::vector<DiagRow> read_diag(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::string line;
    std::getline(in, line); // header
    std::vector<DiagRow> rows;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string f;
        DiagRow r{};
        std::getline(ss, f, ',');
        r.update = std::stoll(f);
        std::getline(ss, f, ',');
        r.beta = std::stod(f);
        std::getline(ss, f, ',');
        r.n = std::stod(f);
        std::getline(ss, f, ',');
        r.gamma = std::stod(f);
        rows.push_back(r);
    }
    return rows;
}

struct TmpDir {
    fs::path path;
    explicit TmpDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

} // namespace

TEST_CASE("update accounting is exact for integer replay ratios") {
    TrainConfig c = tiny_config();
    c.rr = 2.0;
    TmpDir dir("deskrl_rr2");
    RunArtifacts art = run_training(c, dir.str());
    CHECK(art.env_steps == 300);
    CHECK(art.updates == 600);
}

TEST_CASE("fractional replay ratio uses the accumulator") {
    TrainConfig c = tiny_config();
    c.rr = 0.5;
    c.reset_period = 100;
    c.anneal_end = 100;
    c.freeze_updates = 30;
    TmpDir dir("deskrl_rr05");
    RunArtifacts art = run_training(c, dir.str());
    CHECK(art.updates == 150);
}

TEST_CASE("same config and seed give bitwise-identical score logs") {
    TrainConfig c = tiny_config();
    TmpDir d1("deskrl_det1"), d2("deskrl_det2");
    RunArtifacts a1 = run_training(c, d1.str());
    RunArtifacts a2 = run_training(c, d2.str());
    CHECK(slurp(a1.score_log_path) == slurp(a2.score_log_path));
    CHECK(slurp(a1.diagnostics_path) == slurp(a2.diagnostics_path));
    CHECK(slurp(a1.checkpoint_path) == slurp(a2.checkpoint_path));

    TrainConfig c2 = c;
    c2.seed = 1;
    TmpDir d3("deskrl_det3");
    RunArtifacts a3 = run_training(c2, d3.str());
    CHECK(slurp(a1.score_log_path) != slurp(a3.score_log_path));
}

TEST_CASE("artifacts exist on success") {
    TrainConfig c = tiny_config();
    TmpDir dir("deskrl_artifacts");
    RunArtifacts art = run_training(c, dir.str());
    CHECK(fs::exists(art.checkpoint_path));
    CHECK(fs::exists(art.score_log_path));
    CHECK(fs::exists(art.diagnostics_path));
    CHECK(fs::exists(art.config_echo_path));

    const std::string scores = slurp(art.score_log_path);
    CHECK(scores.rfind("run_id,seed,phase,episode,return", 0) == 0);
    CHECK(scores.find(",eval,") != std::string::npos);
}

TEST_CASE("schedules restart at resets and stay monotone between them") {
    TrainConfig c = tiny_config();
    c.reset_period = 150;
    c.diag_every = 1;
    TmpDir dir("deskrl_sched");
    RunArtifacts art = run_training(c, dir.str());
    auto rows = read_diag(art.diagnostics_path);
    REQUIRE(rows.size() == 600);

    double prev_beta = rows[0].beta;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        // beta is global: nonnegative, non-increasing throughout
        CHECK(rows[i].beta >= 0.0);
        CHECK(rows[i].beta <= prev_beta + 1e-15);
        prev_beta = rows[i].beta;

        // n and gamma are monotone between resets and restart after them
        const bool reset_boundary = (rows[i - 1].update % 150) == 0;
        if (!reset_boundary) {
            CHECK(rows[i].n <= rows[i - 1].n);
            CHECK(rows[i].gamma >= rows[i - 1].gamma - 1e-15);
        } else {
            CHECK(rows[i].n >= rows[i - 1].n);
        }
        // update counter is strictly monotone across resets
        CHECK(rows[i].update == rows[i - 1].update + 1);
    }

    // beta is exactly zero across the final freeze window
    for (const auto& r : rows)
        if (r.update > 600 - 60) CHECK(r.beta == 0.0);
}

TEST_CASE("evaluation contract") {
    TrainConfig c = tiny_config();
    TmpDir dir("deskrl_eval");
    RunArtifacts art = run_training(c, dir.str());
    Checkpoint ck = Checkpoint::load(art.checkpoint_path);

    SUBCASE("zero episodes give an empty list") {
        Rng rng(0);
        CHECK(evaluate(ck, 0, ActionMode::Sample, rng).empty());
    }

    SUBCASE("sample and greedy both complete with finite returns") {
        Rng r1(1), r2(1);
        auto sample = evaluate(ck, 8, ActionMode::Sample, r1);
        auto greedy = evaluate(ck, 8, ActionMode::Greedy, r2);
        CHECK(sample.size() == 8);
        CHECK(greedy.size() == 8);
        for (double v : sample) CHECK(std::isfinite(v));
        for (double v : greedy) CHECK(std::isfinite(v));
    }

    SUBCASE("a one-hot policy returns identical values in both modes") {
        // force the target policy head to always pick "right"
        ck.nets.target.get("policy/w").fill(0.0);
        ck.nets.target.get("policy/b").data = {-100.0, 100.0};
        Rng r1(2), r2(2);
        auto a = evaluate(ck, 4, ActionMode::Sample, r1);
        auto b = evaluate(ck, 4, ActionMode::Greedy, r2);
        CHECK(a == b);
    }
}

TEST_CASE("checkpoint round trip is bit-exact and version-guarded") {
    TrainConfig c = tiny_config();
    c.total_env_steps = 50;
    c.reset_period = 0;
    c.anneal_end = 50;
    c.freeze_updates = 10;
    TmpDir dir("deskrl_ckpt");
    RunArtifacts art = run_training(c, dir.str());

    Checkpoint ck = Checkpoint::load(art.checkpoint_path);
    const std::string copy = dir.str() + "/copy.ckpt";
    ck.save(copy);
    CHECK(slurp(art.checkpoint_path) == slurp(copy));

    // tamper with the version
    std::string text = slurp(art.checkpoint_path);
    text.replace(text.find("deskrl-ckpt 1"), 13, "deskrl-ckpt 9");
    const std::string bad = dir.str() + "/bad.ckpt";
    std::ofstream(bad) << text;
    try {
        Checkpoint::load(bad);
        FAIL("expected version mismatch");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("version mismatch") != std::string::npos);
    }
}

TEST_CASE("exact-mode policy gradient and decay-exempt policy head train end to end") {
    TrainConfig c = tiny_config();
    c.total_env_steps = 120;
    c.reset_period = 0;
    c.anneal_end = 120;
    c.freeze_updates = 40;
    c.pg_mode = "exact";
    c.use_baseline = false;
    c.wd_policy = false;
    TmpDir dir("deskrl_exact");
    RunArtifacts art = run_training(c, dir.str());
    CHECK(art.updates == 240);
    for (double r : art.eval_returns) CHECK(std::isfinite(r));
}

TEST_CASE("config validation failures carry key paths") {
    TrainConfig c = tiny_config();
    c.rr = -1.0;
    try {
        c.validate();
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.key == "schedules.rr");
    }

    TrainConfig c2 = tiny_config();
    c2.anneal_end = 590; // collides with freeze_updates = 60 at 600 updates
    CHECK_THROWS_AS(c2.validate(), ConfigError);
}

TEST_CASE("config document parsing and overrides") {
    const std::string text = "[env]\ntype = chain\nchain_length = 6\n\n[run]\nseed = 3\n";
    ConfigDoc doc = ConfigDoc::parse(text);
    CHECK(doc.get_str("env.type", "") == "chain");
    CHECK(doc.get_int("env.chain_length", 0) == 6);
    doc.set("env.chain_length", "9");
    CHECK(doc.get_int("env.chain_length", 0) == 9);
    CHECK_THROWS_AS(doc.set("env.bogus_key", "1"), ConfigError);
    CHECK_THROWS_AS(ConfigDoc::parse("key_without_section = 1\n"), ConfigError);

    TrainConfig c = TrainConfig::from_doc(doc);
    CHECK(c.chain_length == 9);
    CHECK(c.seed == 3);
}

TEST_CASE("config echo round-trips through the parser") {
    TrainConfig c = tiny_config();
    ConfigDoc doc = ConfigDoc::parse(c.echo());
    TrainConfig c2 = TrainConfig::from_doc(doc);
    CHECK(c2.echo() == c.echo());
}
