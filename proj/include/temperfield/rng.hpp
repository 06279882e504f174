#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace tf {

/// Philox4x32-10 counter-based generator. Each (key, stream) pair is an
/// independent sequence; the 64-bit block counter advances within a stream.
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0u, 0u} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (pos_ == 4) {
            out_ = block(ctr_, key_);
            if (++ctr_[2] == 0) ++ctr_[3];
            pos_ = 0;
        }
        return out_[pos_++];
    }

    /// Uniform double in (0, 1) with 53 random bits.
    double uniform_open() {
        for (;;) {
            std::uint64_t a = (*this)() >> 5;
            std::uint64_t b = (*this)() >> 6;
            double u = (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) * (1.0 / 9007199254740992.0);
            if (u > 0.0) return u;
        }
    }

    /// Uniform double in (0, 1) from a single 32-bit word.
    double uniform32() { return (static_cast<double>((*this)()) + 0.5) * (1.0 / 4294967296.0); }

    /// The raw bijection, exposed for known-answer tests.
    static Counter block(Counter ctr, Key key) {
        std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
        std::uint32_t k0 = key[0], k1 = key[1];
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c0;
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c2;
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            c0 = hi1 ^ c1 ^ k0;
            c1 = lo1;
            c2 = hi0 ^ c3 ^ k1;
            c3 = lo0;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return {c0, c1, c2, c3};
    }

private:
    Key key_;
    Counter ctr_;
    Counter out_{};
    int pos_ = 4;
};

}  // namespace tf
