#include "deskrl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace deskrl {

namespace {

constexpr double kRowTol = 1e-12;

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

} // namespace

void TabularMDP::refresh_reward_bounds() {
    r_min = reward.empty() ? 0.0 : *std::min_element(reward.begin(), reward.end());
    r_max = reward.empty() ? 0.0 : *std::max_element(reward.begin(), reward.end());
}

void TabularMDP::validate() const {
    if (n_states <= 0 || n_actions <= 0) fail("mdp: state/action counts must be positive");
    if (transition.size() != static_cast<std::size_t>(n_states) * n_actions * n_states)
        fail("mdp: transition tensor has wrong size");
    if (reward.size() != static_cast<std::size_t>(n_states) * n_actions) fail("mdp: reward matrix has wrong size");
    if (initial_dist.size() != static_cast<std::size_t>(n_states)) fail("mdp: initial distribution has wrong size");
    if (terminal.size() != static_cast<std::size_t>(n_states)) fail("mdp: terminal mask has wrong size");
    if (!(gamma > 0.0 && gamma < 1.0)) fail("mdp: gamma must lie in (0, 1)");
    if (!(r_min <= r_max)) fail("mdp: reward bounds inverted");

    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                const double v = p(s, a, s2);
                if (v < 0.0) fail("mdp: negative transition probability at (" + std::to_string(s) + "," +
                                  std::to_string(a) + "," + std::to_string(s2) + ")");
                sum += v;
            }
            if (std::fabs(sum - 1.0) > kRowTol)
                fail("mdp: transition row (" + std::to_string(s) + "," + std::to_string(a) +
                     ") sums to " + std::to_string(sum));
            const double rv = r(s, a);
            if (!(rv >= r_min && rv <= r_max))
                fail("mdp: reward at (" + std::to_string(s) + "," + std::to_string(a) + ") outside bounds");
            if (is_terminal(s)) {
                if (p(s, a, s) != 1.0) fail("mdp: terminal state " + std::to_string(s) + " must self-loop");
                if (rv != 0.0) fail("mdp: terminal state " + std::to_string(s) + " must have zero reward");
            }
        }
    }

    double init_sum = 0.0;
    for (double v : initial_dist) {
        if (v < 0.0) fail("mdp: negative initial probability");
        init_sum += v;
    }
    if (std::fabs(init_sum - 1.0) > kRowTol) fail("mdp: initial distribution sums to " + std::to_string(init_sum));
}

TabularMDP build_gridworld(int width, int height, int goal_x, int goal_y, double step_reward,
                           double goal_reward, double slip_prob, double gamma) {
    if (width <= 0 || height <= 0 || width * height < 2)
        throw std::invalid_argument("build_gridworld: grid must contain at least two cells");
    if (!(slip_prob >= 0.0 && slip_prob < 1.0))
        throw std::invalid_argument("build_gridworld: slip_prob must lie in [0, 1)");
    if (goal_x < 0 || goal_x >= width || goal_y < 0 || goal_y >= height)
        throw std::invalid_argument("build_gridworld: goal outside grid");

    const int n = width * height;
    const int goal = goal_y * width + goal_x;
    TabularMDP m;
    m.n_states = n;
    m.n_actions = 4;
    m.gamma = gamma;
    m.transition.assign(static_cast<std::size_t>(n) * 4 * n, 0.0);
    m.reward.assign(static_cast<std::size_t>(n) * 4, 0.0);
    m.initial_dist.assign(n, 0.0);
    m.terminal.assign(n, 0);
    m.terminal[goal] = 1;

    // up, down, left, right
    const int dx[4] = {0, 0, -1, 1};
    const int dy[4] = {-1, 1, 0, 0};

    auto move = [&](int x, int y, int dir) {
        int nx = x + dx[dir];
        int ny = y + dy[dir];
        if (nx < 0 || nx >= width || ny < 0 || ny >= height) return y * width + x;
        return ny * width + nx;
    };

    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int s = y * width + x;
            if (s == goal) {
                for (int a = 0; a < 4; ++a) m.p_ref(s, a, s) = 1.0;
                continue;
            }
            for (int a = 0; a < 4; ++a) {
                // executed action = intended w.p. 1-slip, else uniform over all four
                for (int e = 0; e < 4; ++e) {
                    double pe = slip_prob / 4.0;
                    if (e == a) pe += 1.0 - slip_prob;
                    if (pe == 0.0) continue;
                    const int s2 = move(x, y, e);
                    m.p_ref(s, a, s2) += pe;
                    m.reward[static_cast<std::size_t>(s) * 4 + a] +=
                        pe * (s2 == goal ? goal_reward : step_reward);
                }
            }
        }
    }

    // start anywhere but the goal
    const double w = 1.0 / (n - 1);
    for (int s = 0; s < n; ++s) m.initial_dist[s] = (s == goal) ? 0.0 : w;

    m.refresh_reward_bounds();
    m.validate();
    return m;
}

TabularMDP build_chain(int length, double right_reward, double gamma) {
    if (length < 2) throw std::invalid_argument("build_chain: length must be at least 2");
    TabularMDP m;
    m.n_states = length;
    m.n_actions = 2;
    m.gamma = gamma;
    m.transition.assign(static_cast<std::size_t>(length) * 2 * length, 0.0);
    m.reward.assign(static_cast<std::size_t>(length) * 2, 0.0);
    m.initial_dist.assign(length, 0.0);
    m.initial_dist[0] = 1.0;
    m.terminal.assign(length, 0);
    m.terminal[length - 1] = 1;

    for (int s = 0; s < length; ++s) {
        if (m.terminal[s]) {
            m.p_ref(s, 0, s) = 1.0;
            m.p_ref(s, 1, s) = 1.0;
            continue;
        }
        const int left = std::max(0, s - 1);
        const int right = s + 1;
        m.p_ref(s, 0, left) = 1.0;
        m.p_ref(s, 1, right) = 1.0;
        if (right == length - 1) m.reward[static_cast<std::size_t>(s) * 2 + 1] = right_reward;
    }

    m.refresh_reward_bounds();
    m.validate();
    return m;
}

TabularMDP build_random_mdp(int n_states, int n_actions, double gamma, Rng& rng) {
    if (n_states <= 0 || n_actions <= 0)
        throw std::invalid_argument("build_random_mdp: counts must be positive");
    TabularMDP m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.gamma = gamma;
    m.transition.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
    m.reward.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
    m.initial_dist.assign(n_states, 1.0 / n_states);
    m.terminal.assign(n_states, 0);

    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            std::vector<double> row(n_states);
            for (int s2 = 0; s2 < n_states; ++s2) {
                row[s2] = -std::log(1.0 - rng.uniform());
                sum += row[s2];
            }
            for (int s2 = 0; s2 < n_states; ++s2) m.p_ref(s, a, s2) = row[s2] / sum;
            m.reward[static_cast<std::size_t>(s) * n_actions + a] = rng.uniform(-1.0, 1.0);
        }
    }

    m.refresh_reward_bounds();
    m.validate();
    return m;
}

EnvState env_reset(const TabularMDP& mdp, Rng& rng) {
    EnvState st;
    st.state_id = rng.categorical(mdp.initial_dist);
    st.step_count = 0;
    st.done = mdp.is_terminal(st.state_id);
    return st;
}

StepResult env_step(const TabularMDP& mdp, EnvState& st, int action, Rng& rng) {
    if (st.done) throw std::logic_error("env_step: episode already done");
    if (action < 0 || action >= mdp.n_actions) throw std::invalid_argument("env_step: action out of range");

    const double* row = &mdp.transition[(static_cast<std::size_t>(st.state_id) * mdp.n_actions + action) *
                                        mdp.n_states];
    StepResult res;
    res.next_state = rng.categorical(row, mdp.n_states);
    res.reward = mdp.r(st.state_id, action);

    st.state_id = res.next_state;
    st.step_count += 1;
    st.done = mdp.is_terminal(res.next_state) || st.step_count >= mdp.episode_cap;
    res.done = st.done;
    return res;
}

namespace {

// Line-oriented reader that reports 1-based line numbers in error messages.
class LineReader {
  public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line[0] != '#') return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw std::runtime_error("mdp load: line " + std::to_string(line_no_) + ": " + msg);
    }

    std::string expect(const std::string& what) {
        std::string line;
        if (!next(line)) fail("unexpected end of file, expected " + what);
        return line;
    }

  private:
    std::istream& in_;
    int line_no_ = 0;
};

std::vector<double> parse_doubles(LineReader& rd, const std::string& line, std::size_t count) {
    std::istringstream ss(line);
    std::vector<double> out;
    double v;
    while (ss >> v) out.push_back(v);
    if (out.size() != count)
        rd.fail("expected " + std::to_string(count) + " numbers, found " + std::to_string(out.size()));
    return out;
}

} // namespace

void save_mdp(const TabularMDP& mdp, std::ostream& out) {
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    out << "deskrl-mdp 1\n";
    out << "states " << mdp.n_states << "\n";
    out << "actions " << mdp.n_actions << "\n";
    out << "gamma ";
    put(mdp.gamma);
    out << "\nepisode_cap " << mdp.episode_cap << "\n";
    out << "r_min ";
    put(mdp.r_min);
    out << "\nr_max ";
    put(mdp.r_max);
    out << "\nterminal\n";
    for (int s = 0; s < mdp.n_states; ++s) out << (s ? " " : "") << int(mdp.terminal[s]);
    out << "\ntransition\n";
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                if (s2) out << " ";
                put(mdp.p(s, a, s2));
            }
            out << "\n";
        }
    }
    out << "reward\n";
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            if (a) out << " ";
            put(mdp.r(s, a));
        }
        out << "\n";
    }
    out << "initial\n";
    for (int s = 0; s < mdp.n_states; ++s) {
        if (s) out << " ";
        put(mdp.initial_dist[s]);
    }
    out << "\n";
}

TabularMDP load_mdp(std::istream& in) {
    LineReader rd(in);
    std::string line = rd.expect("header");
    if (line != "deskrl-mdp 1") rd.fail("bad header, expected 'deskrl-mdp 1'");

    TabularMDP m;
    auto read_kv = [&](const std::string& key) -> std::string {
        std::string l = rd.expect(key);
        std::istringstream ss(l);
        std::string k;
        ss >> k;
        if (k != key) rd.fail("expected '" + key + "', found '" + k + "'");
        std::string rest;
        std::getline(ss, rest);
        return rest;
    };

    try {
        m.n_states = std::stoi(read_kv("states"));
        m.n_actions = std::stoi(read_kv("actions"));
        m.gamma = std::stod(read_kv("gamma"));
        m.episode_cap = std::stoi(read_kv("episode_cap"));
        m.r_min = std::stod(read_kv("r_min"));
        m.r_max = std::stod(read_kv("r_max"));
    } catch (const std::invalid_argument&) {
        rd.fail("malformed numeric value");
    }
    if (m.n_states <= 0 || m.n_actions <= 0) rd.fail("state/action counts must be positive");

    if (rd.expect("terminal") != "terminal") rd.fail("expected 'terminal'");
    {
        auto vals = parse_doubles(rd, rd.expect("terminal mask"), m.n_states);
        m.terminal.assign(m.n_states, 0);
        for (int s = 0; s < m.n_states; ++s) {
            if (vals[s] != 0.0 && vals[s] != 1.0) rd.fail("terminal mask entries must be 0 or 1");
            m.terminal[s] = static_cast<std::uint8_t>(vals[s]);
        }
    }

    if (rd.expect("transition") != "transition") rd.fail("expected 'transition'");
    m.transition.reserve(static_cast<std::size_t>(m.n_states) * m.n_actions * m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        for (int a = 0; a < m.n_actions; ++a) {
            auto row = parse_doubles(rd, rd.expect("transition row"), m.n_states);
            double sum = 0.0;
            for (double v : row) {
                if (v < 0.0) rd.fail("negative transition probability");
                sum += v;
            }
            if (std::fabs(sum - 1.0) > 1e-12) rd.fail("transition row does not sum to 1");
            m.transition.insert(m.transition.end(), row.begin(), row.end());
        }
    }

    if (rd.expect("reward") != "reward") rd.fail("expected 'reward'");
    for (int s = 0; s < m.n_states; ++s) {
        auto row = parse_doubles(rd, rd.expect("reward row"), m.n_actions);
        for (double v : row)
            if (!(v >= m.r_min && v <= m.r_max)) rd.fail("reward outside declared bounds");
        m.reward.insert(m.reward.end(), row.begin(), row.end());
    }

    if (rd.expect("initial") != "initial") rd.fail("expected 'initial'");
    m.initial_dist = parse_doubles(rd, rd.expect("initial distribution"), m.n_states);

    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        rd.fail(e.what());
    }
    return m;
}

TabularMDP load_mdp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("mdp load: cannot open " + path);
    return load_mdp(in);
}

void save_mdp_file(const TabularMDP& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("mdp save: cannot open " + path);
    save_mdp(mdp, out);
}

} // namespace deskrl
