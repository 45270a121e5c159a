// Feedforward network mapping normalized parameter triples to normalized
// POD coefficients: tanh hidden layers, identity output, min-max scaling on
// both ends. The surrogate field prediction composes the network with the
// reduced-basis reconstruction.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "podsur/io.hpp"
#include "podsur/linalg.hpp"
#include "podsur/pod.hpp"
#include "podsur/rng.hpp"
#include "podsur/sampling.hpp"

namespace podsur {

/// Per-feature affine map onto [-1, 1]. A degenerate feature (max == min)
/// maps to 0 and inverts back to its constant value.
struct MinMaxScaler {
    std::vector<double> lo;
    std::vector<double> hi;

    int size() const { return static_cast<int>(lo.size()); }

    static MinMaxScaler identity(int n) {
        MinMaxScaler s;
        s.lo.assign(static_cast<std::size_t>(n), -1.0);
        s.hi.assign(static_cast<std::size_t>(n), 1.0);
        return s;
    }

    /// Fit per-feature bounds over rows of a feature table (rows = samples).
    static MinMaxScaler fit(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) throw std::invalid_argument("MinMaxScaler: no samples to fit");
        MinMaxScaler s;
        s.lo.assign(rows.front().size(), std::numeric_limits<double>::infinity());
        s.hi.assign(rows.front().size(), -std::numeric_limits<double>::infinity());
        for (const auto& row : rows) {
            if (row.size() != s.lo.size())
                throw std::invalid_argument("MinMaxScaler: ragged sample table");
            for (std::size_t i = 0; i < row.size(); ++i) {
                s.lo[i] = std::min(s.lo[i], row[i]);
                s.hi[i] = std::max(s.hi[i], row[i]);
            }
        }
        return s;
    }

    double normalize_one(double x, int i) const {
        const double span = hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)];
        if (span == 0.0) return 0.0;
        return 2.0 * (x - lo[static_cast<std::size_t>(i)]) / span - 1.0;
    }

    double denormalize_one(double z, int i) const {
        const double span = hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)];
        if (span == 0.0) return lo[static_cast<std::size_t>(i)];
        return lo[static_cast<std::size_t>(i)] + (z + 1.0) * 0.5 * span;
    }

    void normalize(const double* x, double* out) const {
        for (int i = 0; i < size(); ++i) out[i] = normalize_one(x[i], i);
    }

    void denormalize(const double* z, double* out) const {
        for (int i = 0; i < size(); ++i) out[i] = denormalize_one(z[i], i);
    }

    bool in_box(const double* x) const {
        for (int i = 0; i < size(); ++i)
            if (x[i] < lo[static_cast<std::size_t>(i)] || x[i] > hi[static_cast<std::size_t>(i)])
                return false;
        return true;
    }
};

struct TrainingMeta {
    std::uint64_t init_seed = 0;
    std::uint64_t split_seed = 0;
    int epochs_run = 0;
    double final_train_mse = std::numeric_limits<double>::quiet_NaN();
    double final_val_mse = std::numeric_limits<double>::quiet_NaN();
};

struct MlpModel {
    std::vector<int> layer_sizes;              // [inputs, hidden..., outputs]
    std::vector<Matrix> weights;               // weights[l]: sizes[l+1] x sizes[l]
    std::vector<std::vector<double>> biases;   // biases[l]: sizes[l+1]
    MinMaxScaler input_norm;
    MinMaxScaler target_norm;
    TrainingMeta meta;

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }

    int parameter_count() const {
        int n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l)
            n += weights[l].rows * weights[l].cols + static_cast<int>(biases[l].size());
        return n;
    }
};

/// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
/// The fill order is fixed (layer by layer, column-major) so a seed pins the
/// model bit-for-bit.
inline MlpModel init_model(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("init_model: need at least input and output layers");
    for (int s : layer_sizes)
        if (s < 1) throw std::invalid_argument("init_model: layer sizes must be >= 1");

    MlpModel model;
    model.layer_sizes = layer_sizes;
    model.meta.init_seed = seed;
    UniformRng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        Matrix w(fan_out, fan_in);
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : w.data) v = rng.next(-bound, bound);
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
    }
    model.input_norm = MinMaxScaler::identity(layer_sizes.front());
    model.target_norm = MinMaxScaler::identity(layer_sizes.back());
    return model;
}

/// Network evaluation in normalized space: tanh on every layer but the last.
inline void forward_normalized(const MlpModel& model, const double* in, double* out) {
    std::vector<double> cur(in, in + model.input_size());
    std::vector<double> next;
    for (int l = 0; l < model.layer_count(); ++l) {
        const Matrix& w = model.weights[static_cast<std::size_t>(l)];
        next.assign(static_cast<std::size_t>(w.rows), 0.0);
        matvec(w, cur.data(), next.data());
        const auto& b = model.biases[static_cast<std::size_t>(l)];
        for (int i = 0; i < w.rows; ++i) next[static_cast<std::size_t>(i)] += b[static_cast<std::size_t>(i)];
        if (l + 1 < model.layer_count())
            for (double& v : next) v = std::tanh(v);
        cur.swap(next);
    }
    std::copy(cur.begin(), cur.end(), out);
}

struct Prediction {
    std::vector<double> coefficients;
    bool extrapolated = false;  // parameter fell outside the training box
};

inline Prediction forward(const MlpModel& model, const ParameterSample& mu) {
    if (model.input_size() != 3)
        throw std::invalid_argument("forward: model does not take a parameter triple");
    const double raw[3] = {mu.kappa, mu.beta, mu.q_in};
    Prediction pred;
    pred.extrapolated = !model.input_norm.in_box(raw);

    std::vector<double> xn(3);
    model.input_norm.normalize(raw, xn.data());
    std::vector<double> yn(static_cast<std::size_t>(model.output_size()));
    forward_normalized(model, xn.data(), yn.data());
    pred.coefficients.resize(yn.size());
    model.target_norm.denormalize(yn.data(), pred.coefficients.data());
    for (double v : pred.coefficients)
        if (!std::isfinite(v)) throw Error("forward: non-finite network output");
    return pred;
}

/// Surrogate field query: network coefficients expanded in the POD basis.
inline std::vector<double> predict_field(const MlpModel& model, const PodBasis& basis,
                                         const ParameterSample& mu) {
    if (model.output_size() != basis.rank)
        throw Error("predict_field: model outputs " + std::to_string(model.output_size()) +
                    " coefficients but basis rank is " + std::to_string(basis.rank));
    return reconstruct(basis, forward(model, mu).coefficients);
}

// Container layout ("PODM", version 1): magic, u32 version, u64 layer count
// L, u64 sizes[L], u8 activation per transition (0 tanh, 1 identity),
// weights column-major then biases per transition, input scaler lo/hi,
// target scaler lo/hi, u64 init seed, u64 split seed, u64 epochs,
// f64 train/val mse.
inline void save_model(const MlpModel& model, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("save_model: cannot open " + path.string());
    io::write_magic(os, "PODM");
    io::write_u32(os, 1);
    io::write_u64(os, model.layer_sizes.size());
    for (int s : model.layer_sizes) io::write_u64(os, static_cast<std::uint64_t>(s));
    for (int l = 0; l < model.layer_count(); ++l)
        io::write_u8(os, l + 1 < model.layer_count() ? 0 : 1);
    for (int l = 0; l < model.layer_count(); ++l) {
        io::write_f64_array(os, model.weights[static_cast<std::size_t>(l)].data);
        io::write_f64_array(os, model.biases[static_cast<std::size_t>(l)]);
    }
    io::write_f64_array(os, model.input_norm.lo);
    io::write_f64_array(os, model.input_norm.hi);
    io::write_f64_array(os, model.target_norm.lo);
    io::write_f64_array(os, model.target_norm.hi);
    io::write_u64(os, model.meta.init_seed);
    io::write_u64(os, model.meta.split_seed);
    io::write_u64(os, static_cast<std::uint64_t>(model.meta.epochs_run));
    io::write_f64(os, model.meta.final_train_mse);
    io::write_f64(os, model.meta.final_val_mse);
    if (!os) throw Error("save_model: write failed for " + path.string());
}

inline MlpModel load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("load_model: cannot open " + path.string());
    io::expect_magic(is, "PODM", "model");
    const std::uint32_t version = io::read_u32(is);
    if (version != 1)
        throw Error("load_model: unsupported format version " + std::to_string(version));

    const std::uint64_t n_layers = io::read_u64(is);
    if (n_layers < 2 || n_layers > 64) throw Error("load_model: layer count out of range");

    MlpModel model;
    model.layer_sizes.resize(static_cast<std::size_t>(n_layers));
    for (auto& s : model.layer_sizes) {
        const std::uint64_t v = io::read_u64(is);
        if (v < 1 || v > (1u << 20)) throw Error("load_model: layer size out of range");
        s = static_cast<int>(v);
    }
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
        const std::uint8_t act = io::read_u8(is);
        const std::uint8_t expected = (l + 2 < n_layers) ? 0 : 1;
        if (act != expected) throw Error("load_model: unsupported activation layout");
    }
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
        Matrix w(model.layer_sizes[l + 1], model.layer_sizes[l]);
        io::read_f64_array(is, w.data, w.data.size());
        model.weights.push_back(std::move(w));
        std::vector<double> b;
        io::read_f64_array(is, b, static_cast<std::size_t>(model.layer_sizes[l + 1]));
        model.biases.push_back(std::move(b));
    }
    io::read_f64_array(is, model.input_norm.lo, static_cast<std::size_t>(model.layer_sizes.front()));
    io::read_f64_array(is, model.input_norm.hi, static_cast<std::size_t>(model.layer_sizes.front()));
    io::read_f64_array(is, model.target_norm.lo, static_cast<std::size_t>(model.layer_sizes.back()));
    io::read_f64_array(is, model.target_norm.hi, static_cast<std::size_t>(model.layer_sizes.back()));
    model.meta.init_seed = io::read_u64(is);
    model.meta.split_seed = io::read_u64(is);
    model.meta.epochs_run = static_cast<int>(io::read_u64(is));
    model.meta.final_train_mse = io::read_f64(is);
    model.meta.final_val_mse = io::read_f64(is);
    io::expect_eof(is, "model");
    return model;
}

}  // namespace podsur
