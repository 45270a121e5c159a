// Parameter triples (diffusivity, reaction rate, inflow concentration) and
// their uniform sampling over configured ranges.
#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "podsur/io.hpp"
#include "podsur/rng.hpp"

namespace podsur {

struct ParameterSample {
    double kappa = 0.0;  // diffusivity, > 0
    double beta = 0.0;   // reaction rate, >= 0
    double q_in = 0.0;   // inflow concentration

    std::string describe() const {
        std::ostringstream os;
        os << "kappa=" << io::full_precision(kappa) << " beta=" << io::full_precision(beta)
           << " q_in=" << io::full_precision(q_in);
        return os.str();
    }
};

struct ParameterRanges {
    double kappa_min = 1e-3;
    double kappa_max = 1e-1;
    double beta_min = 0.0;
    double beta_max = 1.0;
    double qin_min = 0.1;
    double qin_max = 1.0;
    bool kappa_log_uniform = false;  // draw kappa uniform in log10 instead of linear

    void validate() const {
        if (!(kappa_min > 0.0)) throw std::invalid_argument("ranges: kappa_min must be > 0");
        if (kappa_min > kappa_max) throw std::invalid_argument("ranges: kappa_min > kappa_max");
        if (beta_min < 0.0) throw std::invalid_argument("ranges: beta_min must be >= 0");
        if (beta_min > beta_max) throw std::invalid_argument("ranges: beta_min > beta_max");
        if (qin_min > qin_max) throw std::invalid_argument("ranges: qin_min > qin_max");
    }

    bool contains(const ParameterSample& s) const {
        return s.kappa >= kappa_min && s.kappa <= kappa_max && s.beta >= beta_min &&
               s.beta <= beta_max && s.q_in >= qin_min && s.q_in <= qin_max;
    }
};

/// Independent uniform draws per coordinate, in (kappa, beta, q_in) order,
/// fully determined by the seed.
inline std::vector<ParameterSample> sample_parameters(int n, const ParameterRanges& ranges,
                                                      std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("sample_parameters: negative count");
    ranges.validate();

    UniformRng rng(seed);
    std::vector<ParameterSample> out;
    out.reserve(static_cast<std::size_t>(n));
    const double lk_min = std::log10(ranges.kappa_min);
    const double lk_max = std::log10(ranges.kappa_max);
    for (int i = 0; i < n; ++i) {
        ParameterSample s;
        if (ranges.kappa_log_uniform)
            s.kappa = std::pow(10.0, rng.next(lk_min, lk_max));
        else
            s.kappa = rng.next(ranges.kappa_min, ranges.kappa_max);
        s.beta = rng.next(ranges.beta_min, ranges.beta_max);
        s.q_in = rng.next(ranges.qin_min, ranges.qin_max);
        out.push_back(s);
    }
    return out;
}

}  // namespace podsur
