#include "stochdom/rng.hpp"

namespace stochdom {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline Philox4x32::Counter round(const Philox4x32::Counter& c, const Philox4x32::Key& k)
{
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

} // namespace

Philox4x32::Counter Philox4x32::block(Counter counter, Key key)
{
    counter = round(counter, key);
    for (int r = 1; r < 10; ++r) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
        counter = round(counter, key);
    }
    return counter;
}

CounterStream::CounterStream(std::uint64_t seed, std::uint64_t index, std::uint32_t substream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), substream, 0u}
{
}

std::uint32_t CounterStream::next_u32()
{
    if (used_ == 4) {
        buffer_ = Philox4x32::block(counter_, key_);
        ++counter_[3];
        used_ = 0;
    }
    return buffer_[used_++];
}

double CounterStream::next_uniform()
{
    const std::uint64_t hi = next_u32() >> 5; // 27 bits
    const std::uint64_t lo = next_u32() >> 6; // 26 bits
    return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
}

} // namespace stochdom
