// Levenberg-Marquardt training of the coefficient network. The residual
// vector stacks every normalized coefficient of every training sample
// (sample-major); a step solves the damped normal equations
//   (J^T J + lambda I) delta = J^T r
// in whichever of the primal/dual forms is smaller, accepts the step only
// if the training MSE strictly decreases, and adapts lambda accordingly.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "podsur/io.hpp"
#include "podsur/linalg.hpp"
#include "podsur/mlp.hpp"
#include "podsur/rng.hpp"
#include "podsur/sampling.hpp"

namespace podsur {

/// One (parameter triple, coefficient vector) regression pair.
struct CoeffSample {
    ParameterSample mu;
    std::vector<double> coeffs;
};

struct TrainConfig {
    int max_epochs = 1000;
    double lambda0 = 1e-3;
    double lambda_up = 10.0;
    // A gentler decrease than the classic factor 10: dividing by 10 after an
    // acceptance overshoots and gets roughly every other step rejected.
    double lambda_down = 2.0;
    double lambda_max = 1e10;
    double val_fraction = 0.2;  // held out of training, drives early stopping
    int patience = 6;           // accepted steps without validation improvement
    double gradient_tol = 1e-10;
    std::uint64_t split_seed = 0;

    void validate() const {
        if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
        if (!(lambda0 > 0.0)) throw std::invalid_argument("train: lambda0 must be > 0");
        if (!(lambda_up > 1.0) || !(lambda_down > 1.0))
            throw std::invalid_argument("train: damping factors must be > 1");
        if (!(lambda_max > lambda0)) throw std::invalid_argument("train: lambda_max must exceed lambda0");
        if (val_fraction < 0.0 || val_fraction > 0.5)
            throw std::invalid_argument("train: val_fraction must be in [0, 0.5]");
        if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
    }
};

struct EpochRecord {
    int epoch = 0;
    double lambda = 0.0;  // damping used for this attempt
    double train_mse = 0.0;
    double val_mse = std::numeric_limits<double>::quiet_NaN();
    bool accepted = false;
};

enum class StopReason { max_epochs, lambda_overflow, gradient, early_stop };

inline const char* stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::max_epochs: return "max_epochs";
        case StopReason::lambda_overflow: return "lambda_overflow";
        case StopReason::gradient: return "gradient";
        case StopReason::early_stop: return "early_stop";
    }
    return "?";
}

struct TrainResult {
    MlpModel model;
    std::vector<EpochRecord> history;
    StopReason stop_reason = StopReason::max_epochs;
};

class TrainingError : public Error {
public:
    TrainingError(const std::string& msg, std::vector<EpochRecord> hist)
        : Error(msg), history(std::move(hist)) {}
    std::vector<EpochRecord> history;
};

namespace detail {

/// Residuals (prediction minus target, normalized space) for inputs/targets
/// stored one sample per column. Residual index = sample * m + coefficient.
inline void eval_residuals(const MlpModel& model, const Matrix& inputs, const Matrix& targets,
                           std::vector<double>& r) {
    const int n_samples = inputs.cols;
    const int m = targets.rows;
    r.resize(static_cast<std::size_t>(n_samples) * m);
    std::vector<double> yn(static_cast<std::size_t>(m));
    for (int s = 0; s < n_samples; ++s) {
        forward_normalized(model, inputs.col(s), yn.data());
        const double* t = targets.col(s);
        for (int k = 0; k < m; ++k)
            r[static_cast<std::size_t>(s) * m + k] = yn[static_cast<std::size_t>(k)] - t[k];
    }
}

inline double mean_square(const std::vector<double>& r) {
    if (r.empty()) return std::numeric_limits<double>::quiet_NaN();
    return dot(r, r) / static_cast<double>(r.size());
}

/// Jacobian of the stacked residual vector with respect to the flattened
/// parameters (per layer: weights column-major, then biases). One backward
/// pass per (sample, output) pair.
inline Matrix residual_jacobian(const MlpModel& model, const Matrix& inputs) {
    const int n_samples = inputs.cols;
    const int m = model.output_size();
    const int n_layers = model.layer_count();
    const int n_params = model.parameter_count();
    Matrix jac(n_samples * m, n_params);

    std::vector<std::vector<double>> act(static_cast<std::size_t>(n_layers) + 1);
    std::vector<std::vector<double>> delta(static_cast<std::size_t>(n_layers) + 1);

    for (int s = 0; s < n_samples; ++s) {
        act[0].assign(inputs.col(s), inputs.col(s) + model.input_size());
        for (int l = 0; l < n_layers; ++l) {
            const Matrix& w = model.weights[static_cast<std::size_t>(l)];
            auto& out = act[static_cast<std::size_t>(l) + 1];
            out.assign(static_cast<std::size_t>(w.rows), 0.0);
            matvec(w, act[static_cast<std::size_t>(l)].data(), out.data());
            const auto& b = model.biases[static_cast<std::size_t>(l)];
            for (int i = 0; i < w.rows; ++i) out[static_cast<std::size_t>(i)] += b[static_cast<std::size_t>(i)];
            if (l + 1 < n_layers)
                for (double& v : out) v = std::tanh(v);
        }

        for (int k = 0; k < m; ++k) {
            const int row = s * m + k;
            delta[static_cast<std::size_t>(n_layers)].assign(static_cast<std::size_t>(m), 0.0);
            delta[static_cast<std::size_t>(n_layers)][static_cast<std::size_t>(k)] = 1.0;

            int col = n_params;
            for (int l = n_layers - 1; l >= 0; --l) {
                const Matrix& w = model.weights[static_cast<std::size_t>(l)];
                const auto& d_out = delta[static_cast<std::size_t>(l) + 1];
                const auto& a_in = act[static_cast<std::size_t>(l)];

                col -= w.rows * w.cols + w.rows;
                int c = col;
                for (int j = 0; j < w.cols; ++j)
                    for (int i = 0; i < w.rows; ++i)
                        jac(row, c++) = d_out[static_cast<std::size_t>(i)] * a_in[static_cast<std::size_t>(j)];
                for (int i = 0; i < w.rows; ++i)
                    jac(row, c++) = d_out[static_cast<std::size_t>(i)];

                if (l > 0) {
                    auto& d_in = delta[static_cast<std::size_t>(l)];
                    d_in.assign(static_cast<std::size_t>(w.cols), 0.0);
                    for (int j = 0; j < w.cols; ++j) {
                        double sum = 0.0;
                        for (int i = 0; i < w.rows; ++i) sum += w(i, j) * d_out[static_cast<std::size_t>(i)];
                        const double a = act[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
                        d_in[static_cast<std::size_t>(j)] = sum * (1.0 - a * a);
                    }
                }
            }
        }
    }
    return jac;
}

inline void apply_step(MlpModel& model, const std::vector<double>& delta) {
    std::size_t o = 0;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        for (double& v : model.weights[l].data) v -= delta[o++];
        for (double& v : model.biases[l]) v -= delta[o++];
    }
}

}  // namespace detail

enum class LmMode { automatic, primal, dual };

/// Solve (J^T J + lambda I) delta = J^T r. With fewer residuals than
/// parameters the identity delta = J^T (J J^T + lambda I)^{-1} r gives the
/// same step from a smaller system; `automatic` picks by size. Returns
/// nothing if the damped system is not SPD to working precision.
inline std::optional<std::vector<double>> lm_step(const Matrix& jac,
                                                  const std::vector<double>& residuals,
                                                  double lambda, LmMode mode = LmMode::automatic) {
    const int n_res = jac.rows;
    const int n_par = jac.cols;
    if (static_cast<int>(residuals.size()) != n_res)
        throw std::invalid_argument("lm_step: residual length mismatch");
    const bool use_dual = mode == LmMode::dual || (mode == LmMode::automatic && n_res < n_par);

    if (use_dual) {
        Matrix b = gram_aat(jac);
        for (int i = 0; i < n_res; ++i) b(i, i) += lambda;
        if (!cholesky_factor(b)) return std::nullopt;
        std::vector<double> z = residuals;
        cholesky_solve(b, z);
        std::vector<double> delta(static_cast<std::size_t>(n_par));
        matvec_transposed(jac, z.data(), delta.data());
        return delta;
    }

    Matrix a = gram_ata(jac);
    for (int i = 0; i < n_par; ++i) a(i, i) += lambda;
    if (!cholesky_factor(a)) return std::nullopt;
    std::vector<double> delta(static_cast<std::size_t>(n_par));
    matvec_transposed(jac, residuals.data(), delta.data());
    cholesky_solve(a, delta);
    return delta;
}

struct DatasetSplit {
    std::vector<int> train_indices;  // ascending
    std::vector<int> val_indices;    // ascending
};

inline DatasetSplit split_dataset(int n, double val_fraction, std::uint64_t seed) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    UniformRng rng(seed);
    for (int i = n - 1; i > 0; --i)
        std::swap(idx[static_cast<std::size_t>(i)], idx[rng.next_index(static_cast<std::size_t>(i) + 1)]);

    int n_val = static_cast<int>(std::llround(val_fraction * n));
    n_val = std::clamp(n_val, 0, n - 1);  // training set must stay nonempty

    DatasetSplit split;
    split.val_indices.assign(idx.begin(), idx.begin() + n_val);
    split.train_indices.assign(idx.begin() + n_val, idx.end());
    std::sort(split.val_indices.begin(), split.val_indices.end());
    std::sort(split.train_indices.begin(), split.train_indices.end());
    return split;
}

/// Train the network on (mu, coefficient) pairs. Normalization bounds are
/// fitted on the training split only; early stopping restores the weights
/// with the best validation MSE seen.
inline TrainResult train_lm(const MlpModel& initial, const std::vector<CoeffSample>& data,
                            const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw std::invalid_argument("train_lm: empty dataset");
    const int m = initial.output_size();
    for (const auto& d : data)
        if (static_cast<int>(d.coeffs.size()) != m)
            throw std::invalid_argument("train_lm: target length does not match model output");
    if (initial.input_size() != 3)
        throw std::invalid_argument("train_lm: model must take a parameter triple");

    const DatasetSplit split =
        split_dataset(static_cast<int>(data.size()), config.val_fraction, config.split_seed);

    MlpModel model = initial;
    model.meta.split_seed = config.split_seed;
    {
        std::vector<std::vector<double>> in_rows, tgt_rows;
        in_rows.reserve(split.train_indices.size());
        tgt_rows.reserve(split.train_indices.size());
        for (int i : split.train_indices) {
            const auto& d = data[static_cast<std::size_t>(i)];
            in_rows.push_back({d.mu.kappa, d.mu.beta, d.mu.q_in});
            tgt_rows.push_back(d.coeffs);
        }
        model.input_norm = MinMaxScaler::fit(in_rows);
        model.target_norm = MinMaxScaler::fit(tgt_rows);
    }

    auto normalize_block = [&](const std::vector<int>& indices, Matrix& xn, Matrix& tn) {
        xn = Matrix(3, static_cast<int>(indices.size()));
        tn = Matrix(m, static_cast<int>(indices.size()));
        for (std::size_t c = 0; c < indices.size(); ++c) {
            const auto& d = data[static_cast<std::size_t>(indices[c])];
            const double raw[3] = {d.mu.kappa, d.mu.beta, d.mu.q_in};
            model.input_norm.normalize(raw, xn.col(static_cast<int>(c)));
            model.target_norm.normalize(d.coeffs.data(), tn.col(static_cast<int>(c)));
        }
    };
    Matrix train_x, train_t, val_x, val_t;
    normalize_block(split.train_indices, train_x, train_t);
    const bool has_val = !split.val_indices.empty();
    if (has_val) normalize_block(split.val_indices, val_x, val_t);

    std::vector<double> residuals, val_residuals, trial_residuals;
    auto val_mse_of = [&](const MlpModel& mdl) {
        if (!has_val) return std::numeric_limits<double>::quiet_NaN();
        detail::eval_residuals(mdl, val_x, val_t, val_residuals);
        return detail::mean_square(val_residuals);
    };

    detail::eval_residuals(model, train_x, train_t, residuals);
    double train_mse = detail::mean_square(residuals);
    double val_mse = val_mse_of(model);

    TrainResult result;
    result.stop_reason = StopReason::max_epochs;
    MlpModel best_model = model;
    double best_val = val_mse;
    int patience_used = 0;
    bool restored_best = false;

    double lambda = config.lambda0;
    Matrix jac;
    bool jac_fresh = false;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        if (!jac_fresh) {
            jac = detail::residual_jacobian(model, train_x);
            jac_fresh = true;
            double grad_inf = 0.0;
            std::vector<double> grad(static_cast<std::size_t>(jac.cols));
            matvec_transposed(jac, residuals.data(), grad.data());
            for (double g : grad) grad_inf = std::max(grad_inf, std::abs(g));
            if (grad_inf < config.gradient_tol) {
                result.stop_reason = StopReason::gradient;
                break;
            }
        }

        const double lambda_used = lambda;
        const auto delta = lm_step(jac, residuals, lambda);
        bool accepted = false;
        double trial_mse = train_mse;

        if (delta) {
            MlpModel trial = model;
            detail::apply_step(trial, *delta);
            detail::eval_residuals(trial, train_x, train_t, trial_residuals);
            trial_mse = detail::mean_square(trial_residuals);
            if (std::isfinite(trial_mse) && trial_mse < train_mse) {
                accepted = true;
                model = std::move(trial);
                residuals.swap(trial_residuals);
                train_mse = trial_mse;
                val_mse = val_mse_of(model);
                jac_fresh = false;
            }
        } else if (lambda >= config.lambda_max) {
            throw TrainingError(
                "train_lm: damped normal equations singular at lambda_max (lambda=" +
                    io::full_precision(lambda) + ")",
                std::move(result.history));
        }

        result.history.push_back({epoch, lambda_used, train_mse, val_mse, accepted});

        if (accepted) {
            lambda = std::max(lambda / config.lambda_down, 1e-300);
            if (has_val) {
                if (!(val_mse >= best_val)) {  // improvement
                    best_val = val_mse;
                    best_model = model;
                    patience_used = 0;
                } else if (++patience_used >= config.patience) {
                    result.stop_reason = StopReason::early_stop;
                    model = best_model;
                    restored_best = true;
                    break;
                }
            }
        } else {
            lambda *= config.lambda_up;
            if (lambda > config.lambda_max) {
                result.stop_reason = StopReason::lambda_overflow;
                break;
            }
        }
    }

    if (restored_best) {
        detail::eval_residuals(model, train_x, train_t, residuals);
        train_mse = detail::mean_square(residuals);
        val_mse = val_mse_of(model);
    }
    model.meta.epochs_run = static_cast<int>(result.history.size());
    model.meta.final_train_mse = train_mse;
    model.meta.final_val_mse = val_mse;
    result.model = std::move(model);
    return result;
}

inline void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& os) {
    os << "epoch,lambda,train_mse,val_mse,accepted\n";
    for (const auto& e : history)
        os << e.epoch << ',' << io::full_precision(e.lambda) << ','
           << io::full_precision(e.train_mse) << ',' << io::full_precision(e.val_mse) << ','
           << (e.accepted ? 1 : 0) << '\n';
}

}  // namespace podsur
