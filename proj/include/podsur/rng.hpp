#pragma once

#include <cstdint>
#include <random>

namespace podsur {

// mt19937_64 with a fixed bits-to-double mapping. The engine's output stream
// is pinned by the standard; std::uniform_real_distribution is not, so the
// mapping is done by hand to keep sampled values reproducible everywhere.
class UniformRng {
public:
    explicit UniformRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform draw in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double next(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Uniform index in [0, bound). bound must be positive.
    std::size_t next_index(std::size_t bound) {
        return static_cast<std::size_t>(engine_() % bound);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace podsur
