#include "deskrl/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace deskrl {

namespace {

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    out << name << " " << t.rows << " " << t.cols << "\n";
    char buf[40];
    for (int i = 0; i < t.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%a", t.data[i]);
        out << buf << (i + 1 == t.size() ? "" : " ");
    }
    out << "\n";
}

Tensor read_tensor(std::istream& in, std::string& name) {
    int rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) throw std::runtime_error("checkpoint: truncated tensor header");
    Tensor t(rows, cols);
    for (int i = 0; i < t.size(); ++i) {
        std::string tok;
        if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated tensor " + name);
        t.data[i] = std::strtod(tok.c_str(), nullptr);
    }
    return t;
}

void write_param_set(std::ostream& out, const char* tag, const ParamSet& ps) {
    out << tag << " " << ps.names().size() << "\n";
    for (const std::string& name : ps.names()) {
        const TensorInit& init = ps.init_of(name);
        out << (init.kind == TensorInit::Kind::FanInUniform ? "fanin" : "zeros") << " " << init.fan_in << "\n";
        write_tensor(out, name, ps.get(name));
    }
}

ParamSet read_param_set(std::istream& in, const char* tag) {
    std::string t;
    std::size_t count = 0;
    if (!(in >> t >> count) || t != tag) throw std::runtime_error("checkpoint: expected section " + std::string(tag));
    ParamSet ps;
    Rng dummy(0);
    for (std::size_t i = 0; i < count; ++i) {
        std::string kind;
        int fan_in = 1;
        if (!(in >> kind >> fan_in)) throw std::runtime_error("checkpoint: truncated init record");
        TensorInit init{kind == "fanin" ? TensorInit::Kind::FanInUniform : TensorInit::Kind::Zeros, fan_in};
        std::string name;
        Tensor tensor = read_tensor(in, name);
        ps.define(name, tensor.rows, tensor.cols, init, dummy);
        ps.get(name) = std::move(tensor);
    }
    return ps;
}

} // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");

    out << "deskrl-ckpt " << kVersion << "\n";
    out << "config_begin\n" << config_echo;
    if (!config_echo.empty() && config_echo.back() != '\n') out << "\n";
    out << "config_end\n";
    out << "spec " << nets.spec.obs_dim << " " << nets.spec.n_actions << " " << nets.spec.hidden << " "
        << nets.spec.latent << " " << nets.spec.proj << "\n";
    write_param_set(out, "online", nets.online);
    write_param_set(out, "target", nets.target);

    char buf[40];
    auto hex = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%a", v);
        return std::string(buf);
    };
    out << "optim " << hex(optim.learning_rate) << " " << hex(optim.weight_decay) << " " << hex(optim.beta1)
        << " " << hex(optim.beta2) << " " << hex(optim.epsilon) << " " << optim.step_count << "\n";
    out << "moments " << optim.first_moment.size() << "\n";
    for (const auto& [name, t] : optim.first_moment) write_tensor(out, name, t);
    for (const auto& [name, t] : optim.second_moment) write_tensor(out, name, t);
    out << "counters " << env_steps << " " << updates << " " << updates_since_reset << "\n";
    out << "end\n";
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

    std::string tag;
    int version = -1;
    if (!(in >> tag >> version) || tag != "deskrl-ckpt")
        throw std::runtime_error("checkpoint: not a deskrl checkpoint: " + path);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: version mismatch (found " + std::to_string(version) +
                                 ", expected " + std::to_string(kVersion) + ")");

    std::string line;
    std::getline(in, line);
    if (!std::getline(in, line) || line != "config_begin")
        throw std::runtime_error("checkpoint: missing config section");

    Checkpoint ck;
    std::ostringstream cfg;
    while (std::getline(in, line) && line != "config_end") cfg << line << "\n";
    if (line != "config_end") throw std::runtime_error("checkpoint: unterminated config section");
    ck.config_echo = cfg.str();

    if (!(in >> tag) || tag != "spec") throw std::runtime_error("checkpoint: missing spec record");
    in >> ck.nets.spec.obs_dim >> ck.nets.spec.n_actions >> ck.nets.spec.hidden >> ck.nets.spec.latent >>
        ck.nets.spec.proj;

    ck.nets.online = read_param_set(in, "online");
    ck.nets.target = read_param_set(in, "target");

    if (!(in >> tag) || tag != "optim") throw std::runtime_error("checkpoint: missing optim record");
    std::string lr, wd, b1, b2, eps;
    in >> lr >> wd >> b1 >> b2 >> eps >> ck.optim.step_count;
    ck.optim.learning_rate = std::strtod(lr.c_str(), nullptr);
    ck.optim.weight_decay = std::strtod(wd.c_str(), nullptr);
    ck.optim.beta1 = std::strtod(b1.c_str(), nullptr);
    ck.optim.beta2 = std::strtod(b2.c_str(), nullptr);
    ck.optim.epsilon = std::strtod(eps.c_str(), nullptr);

    std::size_t moment_count = 0;
    if (!(in >> tag >> moment_count) || tag != "moments")
        throw std::runtime_error("checkpoint: missing moments section");
    for (std::size_t i = 0; i < moment_count; ++i) {
        std::string name;
        Tensor t = read_tensor(in, name);
        ck.optim.first_moment[name] = std::move(t);
    }
    for (std::size_t i = 0; i < moment_count; ++i) {
        std::string name;
        Tensor t = read_tensor(in, name);
        ck.optim.second_moment[name] = std::move(t);
    }

    if (!(in >> tag) || tag != "counters") throw std::runtime_error("checkpoint: missing counters record");
    in >> ck.env_steps >> ck.updates >> ck.updates_since_reset;

    if (!(in >> tag) || tag != "end") throw std::runtime_error("checkpoint: missing end marker");
    return ck;
}

} // namespace deskrl
