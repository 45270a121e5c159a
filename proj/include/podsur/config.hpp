// Pipeline configuration: a flat INI-style document ([section] headers,
// key = value lines, '#' comments). Every field has a default equal to the
// full-scale study profile, so an empty document is a valid config.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "podsur/fem.hpp"
#include "podsur/io.hpp"
#include "podsur/mesh.hpp"
#include "podsur/sampling.hpp"
#include "podsur/train_lm.hpp"

namespace podsur {

struct PipelineConfig {
    // domain
    double lx = 10.0;
    double ly = 5.0;
    int nx = 200;
    int ny = 100;
    CornerPolicy corner_policy = CornerPolicy::inflow_wins;

    // sampling
    int n_snapshots = 500;
    ParameterRanges ranges;
    std::uint64_t sampling_seed = 20250101;

    // source
    std::string source_id = "sin_pi_xy";

    // fem
    double cg_tol = 1e-10;
    int cg_max_iter = 0;  // 0: 20 * node count

    // pod
    double energy_threshold = 0.999;
    bool pod_centered = false;

    // network
    std::vector<int> hidden_layers = {100, 100};
    std::uint64_t init_seed = 7;

    // train
    TrainConfig train;

    // eval
    int histogram_bins = 20;

    // benchmark
    int bench_trials = 20;
    std::uint64_t bench_seed = 99;

    // output
    std::string output_dir = "out";

    CgOptions cg_options() const { return {cg_tol, cg_max_iter}; }

    void validate() const {
        if (!(lx > 0.0) || !(ly > 0.0)) throw std::invalid_argument("config: domain lengths must be positive");
        if (nx < 1 || ny < 1) throw std::invalid_argument("config: cell counts must be >= 1");
        if (n_snapshots < 0) throw std::invalid_argument("config: n_snapshots must be >= 0");
        ranges.validate();
        if (!(cg_tol > 0.0) || cg_tol >= 1.0) throw std::invalid_argument("config: cg_tol must be in (0, 1)");
        if (cg_max_iter < 0) throw std::invalid_argument("config: cg_max_iter must be >= 0");
        if (!(energy_threshold > 0.0) || energy_threshold > 1.0)
            throw std::invalid_argument("config: energy_threshold must be in (0, 1]");
        for (int h : hidden_layers)
            if (h < 1) throw std::invalid_argument("config: hidden layer sizes must be >= 1");
        train.validate();
        if (histogram_bins < 1) throw std::invalid_argument("config: histogram_bins must be >= 1");
        if (bench_trials < 1) throw std::invalid_argument("config: bench_trials must be >= 1");
        if (output_dir.empty()) throw std::invalid_argument("config: output dir must not be empty");
    }

    static PipelineConfig from_file(const std::filesystem::path& path);
    static PipelineConfig from_string(const std::string& text);
    std::string echo() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return static_cast<int>(d);
    } catch (...) {
        throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad seed for " + key + ": '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_int(key, item));
    }
    if (out.empty()) throw std::invalid_argument("config: empty list for " + key);
    return out;
}

}  // namespace detail

inline PipelineConfig PipelineConfig::from_string(const std::string& text) {
    PipelineConfig cfg;
    std::istringstream is(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config: malformed section at line " + std::to_string(line_no));
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key = value at line " + std::to_string(line_no));
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;

        using namespace detail;
        if (full == "domain.lx") cfg.lx = parse_double(full, value);
        else if (full == "domain.ly") cfg.ly = parse_double(full, value);
        else if (full == "domain.nx") cfg.nx = parse_int(full, value);
        else if (full == "domain.ny") cfg.ny = parse_int(full, value);
        else if (full == "domain.corner_policy") {
            if (value == "inflow") cfg.corner_policy = CornerPolicy::inflow_wins;
            else if (value == "wall") cfg.corner_policy = CornerPolicy::wall_wins;
            else throw std::invalid_argument("config: corner_policy must be inflow or wall");
        }
        else if (full == "sampling.n_snapshots") cfg.n_snapshots = parse_int(full, value);
        else if (full == "sampling.kappa_min") cfg.ranges.kappa_min = parse_double(full, value);
        else if (full == "sampling.kappa_max") cfg.ranges.kappa_max = parse_double(full, value);
        else if (full == "sampling.beta_min") cfg.ranges.beta_min = parse_double(full, value);
        else if (full == "sampling.beta_max") cfg.ranges.beta_max = parse_double(full, value);
        else if (full == "sampling.qin_min") cfg.ranges.qin_min = parse_double(full, value);
        else if (full == "sampling.qin_max") cfg.ranges.qin_max = parse_double(full, value);
        else if (full == "sampling.kappa_log_uniform") cfg.ranges.kappa_log_uniform = parse_bool(full, value);
        else if (full == "sampling.seed") cfg.sampling_seed = parse_u64(full, value);
        else if (full == "source.id") cfg.source_id = value;
        else if (full == "fem.cg_tol") cfg.cg_tol = parse_double(full, value);
        else if (full == "fem.cg_max_iter") cfg.cg_max_iter = parse_int(full, value);
        else if (full == "pod.energy_threshold") cfg.energy_threshold = parse_double(full, value);
        else if (full == "pod.centered") cfg.pod_centered = parse_bool(full, value);
        else if (full == "network.hidden") cfg.hidden_layers = parse_int_list(full, value);
        else if (full == "network.init_seed") cfg.init_seed = parse_u64(full, value);
        else if (full == "train.max_epochs") cfg.train.max_epochs = parse_int(full, value);
        else if (full == "train.lambda0") cfg.train.lambda0 = parse_double(full, value);
        else if (full == "train.lambda_up") cfg.train.lambda_up = parse_double(full, value);
        else if (full == "train.lambda_down") cfg.train.lambda_down = parse_double(full, value);
        else if (full == "train.lambda_max") cfg.train.lambda_max = parse_double(full, value);
        else if (full == "train.val_fraction") cfg.train.val_fraction = parse_double(full, value);
        else if (full == "train.patience") cfg.train.patience = parse_int(full, value);
        else if (full == "train.gradient_tol") cfg.train.gradient_tol = parse_double(full, value);
        else if (full == "train.split_seed") cfg.train.split_seed = parse_u64(full, value);
        else if (full == "eval.histogram_bins") cfg.histogram_bins = parse_int(full, value);
        else if (full == "benchmark.trials") cfg.bench_trials = parse_int(full, value);
        else if (full == "benchmark.seed") cfg.bench_seed = parse_u64(full, value);
        else if (full == "output.dir") cfg.output_dir = value;
        else throw std::invalid_argument("config: unknown key '" + full + "'");
    }
    cfg.validate();
    return cfg;
}

inline PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("config: cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str());
}

/// Canonical text form; also the basis for manifest change detection.
inline std::string PipelineConfig::echo() const {
    std::ostringstream os;
    const auto fp = [](double v) { return io::full_precision(v); };
    os << "[domain]\n"
       << "lx = " << fp(lx) << "\nly = " << fp(ly) << "\nnx = " << nx << "\nny = " << ny
       << "\ncorner_policy = " << (corner_policy == CornerPolicy::inflow_wins ? "inflow" : "wall")
       << "\n\n[sampling]\n"
       << "n_snapshots = " << n_snapshots << "\nkappa_min = " << fp(ranges.kappa_min)
       << "\nkappa_max = " << fp(ranges.kappa_max) << "\nbeta_min = " << fp(ranges.beta_min)
       << "\nbeta_max = " << fp(ranges.beta_max) << "\nqin_min = " << fp(ranges.qin_min)
       << "\nqin_max = " << fp(ranges.qin_max)
       << "\nkappa_log_uniform = " << (ranges.kappa_log_uniform ? "true" : "false")
       << "\nseed = " << sampling_seed << "\n\n[source]\nid = " << source_id
       << "\n\n[fem]\ncg_tol = " << fp(cg_tol) << "\ncg_max_iter = " << cg_max_iter
       << "\n\n[pod]\nenergy_threshold = " << fp(energy_threshold)
       << "\ncentered = " << (pod_centered ? "true" : "false") << "\n\n[network]\nhidden = ";
    for (std::size_t i = 0; i < hidden_layers.size(); ++i)
        os << (i ? "," : "") << hidden_layers[i];
    os << "\ninit_seed = " << init_seed << "\n\n[train]\nmax_epochs = " << train.max_epochs
       << "\nlambda0 = " << fp(train.lambda0) << "\nlambda_up = " << fp(train.lambda_up)
       << "\nlambda_down = " << fp(train.lambda_down) << "\nlambda_max = " << fp(train.lambda_max)
       << "\nval_fraction = " << fp(train.val_fraction) << "\npatience = " << train.patience
       << "\ngradient_tol = " << fp(train.gradient_tol) << "\nsplit_seed = " << train.split_seed
       << "\n\n[eval]\nhistogram_bins = " << histogram_bins
       << "\n\n[benchmark]\ntrials = " << bench_trials << "\nseed = " << bench_seed
       << "\n\n[output]\ndir = " << output_dir << "\n";
    return os.str();
}

}  // namespace podsur
