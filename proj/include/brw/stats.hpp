#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "brw/rng.hpp"

namespace brw {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) noexcept
    {
        add(x);
        return *this;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// A Monte Carlo estimate with its standard error.
struct Estimate {
    double mean = 0.0;
    double se = 0.0;
    std::uint64_t n = 0;

    /// |mean - target| in units of se (infinite if se == 0 and they differ).
    double z_score(double target) const noexcept;
};

/// Distance between two independent estimates in combined standard errors.
double combined_z(const Estimate& a, const Estimate& b) noexcept;

/// Streaming mean/variance (Welford), mergeable in a fixed order.
class Moments {
public:
    void add(double x) noexcept
    {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    void merge(const Moments& o) noexcept;

    std::uint64_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    double variance() const noexcept
    {
        return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
    }
    double se() const noexcept
    {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }
    Estimate estimate() const noexcept { return {mean(), se(), n_}; }

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Two-sample Kolmogorov-Smirnov statistic. Ties are handled exactly.
double ks_statistic(std::span<const double> a, std::span<const double> b);

/// Asymptotic Kolmogorov p-value of a two-sample statistic.
double ks_asymptotic_pvalue(double d, std::size_t n_a, std::size_t n_b);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// KS statistic with a permutation p-value over `permutations` relabelings.
KsResult ks_permutation_test(std::span<const double> a, std::span<const double> b,
                             std::size_t permutations, Stream& stream);

/// Relative growth (S_N - S_{N/2}) / S_{N/2} of a partial-sum trajectory
/// indexed 0..N. Returns 0 when both are zero and +inf when only S_{N/2} is.
double last_half_growth(std::span<const double> partial_sums);

/// Sample quantile (type 7) of unsorted data.
double quantile(std::vector<double> values, double p);

} // namespace brw
