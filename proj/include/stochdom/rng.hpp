#pragma once

#include <array>
#include <cstdint>

namespace stochdom {

/// Philox4x32-10 counter-based generator. The output block is a pure
/// function of (key, counter), so any (seed, sample, substream) triple can be
/// evaluated independently of call order or thread schedule.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter counter, Key key);
};

/// Sequential uniform stream over one (seed, index, substream) triple.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, std::uint64_t index, std::uint32_t substream);

    std::uint32_t next_u32();
    /// Uniform double in [0, 1) with 53 random bits.
    double next_uniform();
    /// Uniform double in [lo, hi].
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

private:
    Philox4x32::Key key_;
    Philox4x32::Counter counter_;
    Philox4x32::Counter buffer_{};
    int used_ = 4;
};

} // namespace stochdom
