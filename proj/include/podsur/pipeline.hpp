// End-to-end orchestration: evaluation statistics, runtime benchmark and the
// five-step resumable pipeline (snapshots -> basis -> model -> evaluation ->
// benchmark). Every artifact lands in the configured output directory; a
// manifest records per-step config hashes and artifact content hashes so an
// unchanged re-run skips completed steps.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "podsur/config.hpp"
#include "podsur/fem.hpp"
#include "podsur/io.hpp"
#include "podsur/mesh.hpp"
#include "podsur/mlp.hpp"
#include "podsur/pod.hpp"
#include "podsur/sampling.hpp"
#include "podsur/snapshots.hpp"
#include "podsur/train_lm.hpp"

namespace podsur {

/// Euclidean nodal relative error. A zero reference has no meaningful
/// relative error and is rejected; evaluate() reports and excludes it.
inline double relative_l2_error(const std::vector<double>& predicted,
                                const std::vector<double>& reference) {
    if (predicted.size() != reference.size())
        throw std::invalid_argument("relative_l2_error: length mismatch");
    double diff2 = 0.0, ref2 = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = predicted[i] - reference[i];
        diff2 += d * d;
        ref2 += reference[i] * reference[i];
    }
    if (ref2 == 0.0) throw Error("relative_l2_error: reference field is identically zero");
    return std::sqrt(diff2) / std::sqrt(ref2);
}

struct EvalReport {
    std::vector<ParameterSample> samples;  // evaluated samples, input order
    std::vector<double> errors;            // matching per-sample relative errors
    int n_test = 0;
    int n_excluded = 0;  // zero-reference samples dropped from statistics
    bool has_stats = false;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double median = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> bin_edges;  // histogram over [0, max], bins + 1 edges
    std::vector<int> bin_counts;
    ParameterSample best{};
    ParameterSample worst{};
    double best_error = std::numeric_limits<double>::quiet_NaN();
    double worst_error = std::numeric_limits<double>::quiet_NaN();
};

/// Compare the surrogate against fresh FEM reference solves on each sample.
inline EvalReport evaluate(const MlpModel& model, const PodBasis& basis, const Mesh& mesh,
                           const std::vector<ParameterSample>& test_samples,
                           const SourceTerm& source, const CgOptions& cg = {},
                           int histogram_bins = 20) {
    if (histogram_bins < 1) throw std::invalid_argument("evaluate: need at least one bin");
    EvalReport report;
    for (const auto& mu : test_samples) {
        const FieldVector reference = solve_instance(mesh, mu, source.fn, cg);
        const FieldVector predicted = predict_field(model, basis, mu);
        try {
            const double err = relative_l2_error(predicted, reference);
            report.samples.push_back(mu);
            report.errors.push_back(err);
        } catch (const Error&) {
            ++report.n_excluded;
        }
    }
    report.n_test = static_cast<int>(report.errors.size());
    if (report.n_test == 0) return report;

    report.has_stats = true;
    std::vector<double> sorted = report.errors;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double e : report.errors) sum += e;
    report.mean = sum / report.n_test;
    report.median = (report.n_test % 2 == 1)
                        ? sorted[static_cast<std::size_t>(report.n_test / 2)]
                        : 0.5 * (sorted[static_cast<std::size_t>(report.n_test / 2 - 1)] +
                                 sorted[static_cast<std::size_t>(report.n_test / 2)]);
    report.max = sorted.back();

    const auto best_it = std::min_element(report.errors.begin(), report.errors.end());
    const auto worst_it = std::max_element(report.errors.begin(), report.errors.end());
    report.best = report.samples[static_cast<std::size_t>(best_it - report.errors.begin())];
    report.best_error = *best_it;
    report.worst = report.samples[static_cast<std::size_t>(worst_it - report.errors.begin())];
    report.worst_error = *worst_it;

    const double hi = report.max > 0.0 ? report.max : 1.0;
    report.bin_edges.resize(static_cast<std::size_t>(histogram_bins) + 1);
    for (int b = 0; b <= histogram_bins; ++b)
        report.bin_edges[static_cast<std::size_t>(b)] = hi * b / histogram_bins;
    report.bin_counts.assign(static_cast<std::size_t>(histogram_bins), 0);
    for (double e : report.errors) {
        int b = static_cast<int>(e / hi * histogram_bins);
        b = std::clamp(b, 0, histogram_bins - 1);
        ++report.bin_counts[static_cast<std::size_t>(b)];
    }
    return report;
}

/// Per-sample section, histogram section, then summary statistics. The
/// per-sample rows carry full precision so the statistics can be recomputed
/// exactly from the file.
inline void write_eval_report_csv(const EvalReport& report, std::ostream& os) {
    os << "sample,kappa,beta,qin,rel_l2_error\n";
    for (std::size_t i = 0; i < report.errors.size(); ++i) {
        const auto& p = report.samples[i];
        os << i << ',' << io::full_precision(p.kappa) << ',' << io::full_precision(p.beta) << ','
           << io::full_precision(p.q_in) << ',' << io::full_precision(report.errors[i]) << '\n';
    }
    os << "\nbin,lo,hi,count\n";
    for (std::size_t b = 0; b < report.bin_counts.size(); ++b)
        os << b << ',' << io::full_precision(report.bin_edges[b]) << ','
           << io::full_precision(report.bin_edges[b + 1]) << ',' << report.bin_counts[b] << '\n';
    os << "\nstat,value\n";
    os << "n_test," << report.n_test << '\n';
    os << "n_excluded," << report.n_excluded << '\n';
    os << "mean," << io::full_precision(report.mean) << '\n';
    os << "median," << io::full_precision(report.median) << '\n';
    os << "max," << io::full_precision(report.max) << '\n';
    if (report.has_stats) {
        os << "best_kappa," << io::full_precision(report.best.kappa) << '\n';
        os << "best_beta," << io::full_precision(report.best.beta) << '\n';
        os << "best_qin," << io::full_precision(report.best.q_in) << '\n';
        os << "best_error," << io::full_precision(report.best_error) << '\n';
        os << "worst_kappa," << io::full_precision(report.worst.kappa) << '\n';
        os << "worst_beta," << io::full_precision(report.worst.beta) << '\n';
        os << "worst_qin," << io::full_precision(report.worst.q_in) << '\n';
        os << "worst_error," << io::full_precision(report.worst_error) << '\n';
    }
}

struct BenchTrial {
    ParameterSample mu;
    double fem_seconds = 0.0;
    double nn_seconds = 0.0;
};

struct BenchReport {
    double avg_fem_seconds = 0.0;
    double avg_nn_seconds = 0.0;
    double speedup = 0.0;
    int n_trials = 0;
    std::vector<BenchTrial> trials;
    std::string hardware_note;
};

namespace detail {

inline std::string cpu_model_string() {
    std::ifstream f("/proc/cpuinfo");
    std::string line;
    while (std::getline(f, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) return trim(line.substr(colon + 1));
        }
    }
    return "unspecified";
}

template <typename F>
double time_seconds(F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace detail

/// Time full FEM queries against surrogate queries on random in-range
/// parameters. One warm-up trial runs first and is discarded.
inline BenchReport benchmark(const MlpModel& model, const PodBasis& basis, const Mesh& mesh,
                             int n_trials, std::uint64_t seed, const SourceTerm& source,
                             const ParameterRanges& ranges, const CgOptions& cg = {}) {
    if (n_trials < 1) throw std::invalid_argument("benchmark: n_trials must be >= 1");
    const auto mus = sample_parameters(n_trials + 1, ranges, seed);

    BenchReport report;
    report.n_trials = n_trials;
    report.hardware_note = detail::cpu_model_string();

    FieldVector sink;
    for (int t = 0; t <= n_trials; ++t) {
        const ParameterSample& mu = mus[static_cast<std::size_t>(t)];
        BenchTrial trial;
        trial.mu = mu;
        trial.fem_seconds = detail::time_seconds([&] { sink = solve_instance(mesh, mu, source.fn, cg); });
        trial.nn_seconds = detail::time_seconds([&] { sink = predict_field(model, basis, mu); });
        if (t == 0) continue;  // warm-up
        report.trials.push_back(trial);
        report.avg_fem_seconds += trial.fem_seconds;
        report.avg_nn_seconds += trial.nn_seconds;
    }
    report.avg_fem_seconds /= n_trials;
    report.avg_nn_seconds /= n_trials;
    if (!(report.avg_nn_seconds > 0.0))
        throw Error("benchmark: surrogate timing below clock resolution");
    report.speedup = report.avg_fem_seconds / report.avg_nn_seconds;
    return report;
}

struct EvalStats {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double median = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
};

/// Runtime table plus, when error statistics are supplied, the accuracy rows.
inline void write_bench_report_text(const BenchReport& report, const EvalStats* eval,
                                    std::ostream& os) {
    os << "FEM vs NN runtime comparison\n";
    os << "Average FEM time          " << io::full_precision(report.avg_fem_seconds)
       << " seconds\n";
    os << "Average NN time           " << io::full_precision(report.avg_nn_seconds)
       << " seconds\n";
    os << "Speed-up factor (FEM/NN)  " << io::full_precision(report.speedup) << "x\n";
    if (eval) {
        os << "Mean relative error       " << io::full_precision(eval->mean * 100.0) << " %\n";
        os << "Median relative error     " << io::full_precision(eval->median * 100.0) << " %\n";
        os << "Max relative error        " << io::full_precision(eval->max * 100.0) << " %\n";
    }
    os << "Trials                    " << report.n_trials << " (one warm-up discarded)\n";
    os << "Hardware                  " << report.hardware_note << "\n";
    os << "\ntrial,kappa,beta,qin,fem_seconds,nn_seconds\n";
    for (std::size_t t = 0; t < report.trials.size(); ++t) {
        const auto& trial = report.trials[t];
        os << (t + 1) << ',' << io::full_precision(trial.mu.kappa) << ','
           << io::full_precision(trial.mu.beta) << ',' << io::full_precision(trial.mu.q_in) << ','
           << io::full_precision(trial.fem_seconds) << ',' << io::full_precision(trial.nn_seconds)
           << '\n';
    }
}

/// Reads the summary statistics back out of an eval_report.csv.
inline EvalStats parse_eval_stats(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("parse_eval_stats: cannot open " + path.string());
    EvalStats stats;
    std::string line;
    bool in_stats = false;
    while (std::getline(f, line)) {
        if (line == "stat,value") {
            in_stats = true;
            continue;
        }
        if (!in_stats) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        const std::string key = line.substr(0, comma);
        const std::string value = line.substr(comma + 1);
        if (key == "mean") stats.mean = std::stod(value);
        else if (key == "median") stats.median = std::stod(value);
        else if (key == "max") stats.max = std::stod(value);
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Run manifest

struct Manifest {
    bool complete = false;
    std::string config_hash;
    std::map<std::string, std::string> entries;  // step.* and artifact.* keys
    std::string config_echo;

    static std::optional<Manifest> load(const std::filesystem::path& path) {
        std::ifstream f(path);
        if (!f) return std::nullopt;
        Manifest m;
        std::string line;
        bool in_config = false;
        while (std::getline(f, line)) {
            if (line == "--- config ---") {
                in_config = true;
                continue;
            }
            if (in_config) {
                m.config_echo += line;
                m.config_echo += '\n';
                continue;
            }
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find(" = ");
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(0, eq);
            const std::string value = line.substr(eq + 3);
            if (key == "complete") m.complete = value == "true";
            else if (key == "config_hash") m.config_hash = value;
            else if (key != "manifest_version") m.entries[key] = value;
        }
        return m;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw Error("manifest: cannot write " + path.string());
        f << "# podsur run manifest\n";
        f << "manifest_version = 1\n";
        f << "complete = " << (complete ? "true" : "false") << "\n";
        f << "config_hash = " << config_hash << "\n";
        for (const auto& [k, v] : entries) f << k << " = " << v << "\n";
        f << "--- config ---\n" << config_echo;
    }
};

// ---------------------------------------------------------------------------
// Pipeline

struct StepOutcome {
    std::string name;
    bool skipped = false;
};

struct RunOutcome {
    std::filesystem::path out_dir;
    std::vector<StepOutcome> steps;
    int pod_rank = 0;
    bool has_eval = false;
    EvalReport eval;
    bool has_bench = false;
    BenchReport bench;

    bool step_skipped(const std::string& name) const {
        for (const auto& s : steps)
            if (s.name == name) return s.skipped;
        return false;
    }
};

namespace detail {

// Per-step config fingerprints: a step re-runs when the fields feeding it
// change, and only then.
inline std::string snapshots_step_key(const PipelineConfig& c) {
    std::ostringstream os;
    os << c.lx << '|' << c.ly << '|' << c.nx << '|' << c.ny << '|'
       << static_cast<int>(c.corner_policy) << '|' << c.n_snapshots << '|'
       << io::full_precision(c.ranges.kappa_min) << '|' << io::full_precision(c.ranges.kappa_max)
       << '|' << io::full_precision(c.ranges.beta_min) << '|'
       << io::full_precision(c.ranges.beta_max) << '|' << io::full_precision(c.ranges.qin_min)
       << '|' << io::full_precision(c.ranges.qin_max) << '|' << c.ranges.kappa_log_uniform << '|'
       << c.sampling_seed << '|' << c.source_id << '|' << io::full_precision(c.cg_tol) << '|'
       << c.cg_max_iter;
    return os.str();
}

inline std::string pod_step_key(const PipelineConfig& c) {
    std::ostringstream os;
    os << io::full_precision(c.energy_threshold) << '|' << c.pod_centered;
    return os.str();
}

inline std::string train_step_key(const PipelineConfig& c) {
    std::ostringstream os;
    for (int h : c.hidden_layers) os << h << ',';
    os << '|' << c.init_seed << '|' << c.train.max_epochs << '|'
       << io::full_precision(c.train.lambda0) << '|' << io::full_precision(c.train.lambda_up)
       << '|' << io::full_precision(c.train.lambda_down) << '|'
       << io::full_precision(c.train.lambda_max) << '|' << io::full_precision(c.train.val_fraction)
       << '|' << c.train.patience << '|' << io::full_precision(c.train.gradient_tol) << '|'
       << c.train.split_seed;
    return os.str();
}

inline std::string eval_step_key(const PipelineConfig& c) {
    return std::to_string(c.histogram_bins);
}

inline std::string bench_step_key(const PipelineConfig& c) {
    std::ostringstream os;
    os << c.bench_trials << '|' << c.bench_seed;
    return os.str();
}

}  // namespace detail

/// Execute the five pipeline steps, skipping any whose configuration and
/// input artifacts are unchanged since the previous run in this directory.
/// Artifacts: snapshots.pods, basis.podb, model.podm, singular_values.csv,
/// training_history.csv, eval_report.csv, bench_report.txt, manifest.txt.
inline RunOutcome run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    cfg.validate();
    const fs::path out(cfg.output_dir);
    fs::create_directories(out);

    const auto say = [&](const std::string& msg) {
        if (log) *log << msg << '\n';
    };

    const std::optional<Manifest> prev = Manifest::load(out / "manifest.txt");
    Manifest manifest;
    manifest.config_echo = cfg.echo();
    manifest.config_hash = io::hash_hex(io::hash_string(manifest.config_echo));

    RunOutcome outcome;
    outcome.out_dir = out;

    const Mesh mesh = build_structured_mesh(cfg.lx, cfg.ly, cfg.nx, cfg.ny, cfg.corner_policy);
    const SourceTerm source = make_source(cfg.source_id);
    const CgOptions cg = cfg.cg_options();

    std::optional<SnapshotSet> snapshots;
    std::optional<PodBasis> basis;
    std::optional<MlpModel> model;

    const auto artifact_unchanged = [&](const std::string& file) {
        if (!prev) return false;
        const auto it = prev->entries.find("artifact." + file);
        if (it == prev->entries.end()) return false;
        if (!fs::exists(out / file)) return false;
        return io::hash_hex(io::hash_file(out / file)) == it->second;
    };

    const auto step_unchanged = [&](const std::string& step, const std::string& key) {
        if (!prev) return false;
        const auto it = prev->entries.find("step." + step + ".config_hash");
        return it != prev->entries.end() && it->second == io::hash_hex(io::hash_string(key));
    };

    const auto record_artifact = [&](const std::string& file) {
        manifest.entries["artifact." + file] = io::hash_hex(io::hash_file(out / file));
    };

    const auto record_step = [&](const std::string& step, const std::string& key,
                                 bool skipped) {
        manifest.entries["step." + step + ".config_hash"] = io::hash_hex(io::hash_string(key));
        manifest.entries["step." + step + ".status"] = skipped ? "skipped" : "generated";
        outcome.steps.push_back({step, skipped});
        manifest.save(out / "manifest.txt");
        say(std::string("step ") + step + (skipped ? ": skipped (unchanged)" : ": done"));
    };

    const auto fail_step = [&](const std::string& step) {
        manifest.entries["step." + step + ".status"] = "failed";
        manifest.complete = false;
        manifest.save(out / "manifest.txt");
    };

    const auto need_snapshots = [&]() -> SnapshotSet& {
        if (!snapshots) snapshots = load_snapshots(out / "snapshots.pods");
        require_grid_match(*snapshots, mesh);
        return *snapshots;
    };
    const auto need_basis = [&]() -> PodBasis& {
        if (!basis) basis = load_basis(out / "basis.podb");
        if (basis->n_nodes() != mesh.node_count())
            throw Error("pipeline: basis does not match configured mesh");
        return *basis;
    };
    const auto need_model = [&]() -> MlpModel& {
        if (!model) model = load_model(out / "model.podm");
        return *model;
    };

    // step 1: snapshots
    {
        const std::string key = detail::snapshots_step_key(cfg);
        const bool skip = step_unchanged("snapshots", key) && artifact_unchanged("snapshots.pods");
        if (!skip) {
            try {
                const auto samples = sample_parameters(cfg.n_snapshots, cfg.ranges, cfg.sampling_seed);
                snapshots = generate_snapshots(mesh, samples, source, cg);
                snapshots->seed = cfg.sampling_seed;
                snapshots->ranges = cfg.ranges;
                save_snapshots(*snapshots, out / "snapshots.pods");
            } catch (...) {
                fail_step("snapshots");
                throw;
            }
        }
        record_artifact("snapshots.pods");
        record_step("snapshots", key, skip);
    }

    // step 2: basis
    {
        const std::string key = detail::pod_step_key(cfg);
        const bool skip = step_unchanged("pod", key) && artifact_unchanged("snapshots.pods") &&
                          artifact_unchanged("basis.podb") &&
                          artifact_unchanged("singular_values.csv");
        if (!skip) {
            try {
                PodOptions opts;
                opts.energy_threshold = cfg.energy_threshold;
                opts.centered = cfg.pod_centered;
                basis = compute_pod(need_snapshots().fields, opts);
                save_basis(*basis, out / "basis.podb");
                std::ofstream sv(out / "singular_values.csv");
                write_singular_values_csv(*basis, sv);
            } catch (...) {
                fail_step("pod");
                throw;
            }
        }
        record_artifact("basis.podb");
        record_artifact("singular_values.csv");
        record_step("pod", key, skip);
    }
    outcome.pod_rank = need_basis().rank;

    // step 3: surrogate training
    {
        const std::string key = detail::train_step_key(cfg);
        const bool skip = step_unchanged("train", key) && artifact_unchanged("snapshots.pods") &&
                          artifact_unchanged("basis.podb") && artifact_unchanged("model.podm") &&
                          artifact_unchanged("training_history.csv");
        if (!skip) {
            try {
                SnapshotSet& set = need_snapshots();
                PodBasis& b = need_basis();
                std::vector<CoeffSample> dataset(set.params.size());
                std::vector<double> column(static_cast<std::size_t>(set.n_nodes()));
                for (int j = 0; j < set.n_samples(); ++j) {
                    std::copy(set.fields.col(j), set.fields.col(j) + set.n_nodes(), column.begin());
                    dataset[static_cast<std::size_t>(j)] = {set.params[static_cast<std::size_t>(j)],
                                                            project(b, column)};
                }
                std::vector<int> layers;
                layers.push_back(3);
                layers.insert(layers.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
                layers.push_back(b.rank);
                const MlpModel initial = init_model(layers, cfg.init_seed);
                TrainResult trained = train_lm(initial, dataset, cfg.train);
                say("train: " + std::to_string(trained.history.size()) + " epochs, stop=" +
                    stop_reason_name(trained.stop_reason) + ", train_mse=" +
                    io::full_precision(trained.model.meta.final_train_mse));
                model = std::move(trained.model);
                save_model(*model, out / "model.podm");
                std::ofstream hist(out / "training_history.csv");
                write_history_csv(trained.history, hist);
            } catch (...) {
                fail_step("train");
                throw;
            }
        }
        record_artifact("model.podm");
        record_artifact("training_history.csv");
        record_step("train", key, skip);
    }

    // step 4: evaluation on the held-out split (all samples when no split)
    {
        const std::string key = detail::eval_step_key(cfg);
        const bool skip = step_unchanged("evaluate", key) && artifact_unchanged("snapshots.pods") &&
                          artifact_unchanged("basis.podb") && artifact_unchanged("model.podm") &&
                          artifact_unchanged("eval_report.csv");
        if (!skip) {
            try {
                SnapshotSet& set = need_snapshots();
                const DatasetSplit split = split_dataset(set.n_samples(), cfg.train.val_fraction,
                                                         cfg.train.split_seed);
                std::vector<ParameterSample> held_out;
                if (split.val_indices.empty()) {
                    held_out = set.params;
                } else {
                    for (int i : split.val_indices)
                        held_out.push_back(set.params[static_cast<std::size_t>(i)]);
                }
                outcome.eval = evaluate(need_model(), need_basis(), mesh, held_out, source, cg,
                                        cfg.histogram_bins);
                outcome.has_eval = true;
                std::ofstream csv(out / "eval_report.csv");
                write_eval_report_csv(outcome.eval, csv);
            } catch (...) {
                fail_step("evaluate");
                throw;
            }
        }
        record_artifact("eval_report.csv");
        record_step("evaluate", key, skip);
    }

    // step 5: runtime benchmark
    {
        const std::string key = detail::bench_step_key(cfg);
        const bool skip = step_unchanged("benchmark", key) && artifact_unchanged("basis.podb") &&
                          artifact_unchanged("model.podm") && artifact_unchanged("bench_report.txt");
        if (!skip) {
            try {
                outcome.bench = benchmark(need_model(), need_basis(), mesh, cfg.bench_trials,
                                          cfg.bench_seed, source, cfg.ranges, cg);
                outcome.has_bench = true;
                const EvalStats stats = parse_eval_stats(out / "eval_report.csv");
                std::ofstream txt(out / "bench_report.txt");
                write_bench_report_text(outcome.bench, &stats, txt);
            } catch (...) {
                fail_step("benchmark");
                throw;
            }
        }
        record_artifact("bench_report.txt");
        record_step("benchmark", key, skip);
    }

    manifest.complete = true;
    manifest.save(out / "manifest.txt");
    return outcome;
}

}  // namespace podsur
