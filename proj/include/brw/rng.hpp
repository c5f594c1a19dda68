#pragma once

// Counter-based random streams.
//
// Every random quantity in the library is drawn from a Stream, which is a
// Philox4x32-10 generator keyed by a 64-bit key and a 64-bit "lane". The
// 64-bit block counter is the only mutable state, so a stream can be
// recreated anywhere from (key, lane) and reproduces the same sequence.
//
// Substreams are derived from a master seed by hashing (master seed, task
// label, index) into a key. Work is always partitioned into fixed indices
// (replicas, excursion blocks, paths), so results never depend on how many
// threads executed them.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace brw {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over the bytes of a label.
constexpr std::uint64_t hash_label(std::string_view label) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Key of substream `index` of task `label` under `master_seed`.
constexpr std::uint64_t substream_key(std::uint64_t master_seed,
                                      std::string_view label,
                                      std::uint64_t index) noexcept
{
    return mix64(mix64(mix64(master_seed) ^ hash_label(label)) + index);
}

/// Label of child `index` of a particle labelled `parent`.
constexpr std::uint64_t child_label(std::uint64_t parent, std::uint64_t index) noexcept
{
    return mix64(parent * 0x2545f4914f6cdd1dULL + index + 1);
}

class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t key, std::uint64_t lane = 0) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
          lane_(lane), key64_(key)
    {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept
    {
        if (pos_ == 2) {
            refill();
        }
        return buffer_[pos_++];
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept
    {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal (Marsaglia polar method).
    double normal() noexcept
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double exponential() noexcept { return -std::log(uniform()); }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Uniform integer in [0, n) by multiply-shift, n >= 1.
    std::uint64_t below(std::uint64_t n) noexcept
    {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>((*this)()) * n) >> 64);
    }

    /// One Philox4x32-10 block.
    static constexpr std::array<std::uint32_t, 4>
    philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> k) noexcept
    {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1],
                   static_cast<std::uint32_t>(p0)};
            k[0] += 0x9E3779B9u;
            k[1] += 0xBB67AE85u;
        }
        return ctr;
    }

    std::uint64_t key() const noexcept { return key64_; }
    std::uint64_t lane() const noexcept { return lane_; }

private:
    void refill() noexcept
    {
        const auto out = philox4x32_10({static_cast<std::uint32_t>(counter_),
                                        static_cast<std::uint32_t>(counter_ >> 32),
                                        static_cast<std::uint32_t>(lane_),
                                        static_cast<std::uint32_t>(lane_ >> 32)},
                                       key_);
        buffer_[0] = (std::uint64_t{out[1]} << 32) | out[0];
        buffer_[1] = (std::uint64_t{out[3]} << 32) | out[2];
        ++counter_;
        pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t lane_;
    std::uint64_t key64_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int pos_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream for substream `index` of task `label`.
inline Stream make_stream(std::uint64_t master_seed, std::string_view label,
                          std::uint64_t index, std::uint64_t lane = 0)
{
    return Stream(substream_key(master_seed, label, index), lane);
}

} // namespace brw
