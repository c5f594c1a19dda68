#include "brw/stats.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace brw {

double Estimate::z_score(double target) const noexcept
{
    const double d = std::abs(mean - target);
    if (se > 0.0) {
        return d / se;
    }
    return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

double combined_z(const Estimate& a, const Estimate& b) noexcept
{
    const double d = std::abs(a.mean - b.mean);
    const double se = std::hypot(a.se, b.se);
    if (se > 0.0) {
        return d / se;
    }
    return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

void Moments::merge(const Moments& o) noexcept
{
    if (o.n_ == 0) {
        return;
    }
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(o.n_);
    const double d = o.mean_ - mean_;
    const double n = na + nb;
    mean_ += d * nb / n;
    m2_ += o.m2_ + d * d * na * nb / n;
    n_ += o.n_;
}

namespace {

double ks_sorted(std::span<const double> a, std::span<const double> b)
{
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) {
            ++i;
        }
        while (j < b.size() && b[j] == x) {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

} // namespace

double ks_statistic(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty()) {
        return 0.0;
    }
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    return ks_sorted(sa, sb);
}

double ks_asymptotic_pvalue(double d, std::size_t n_a, std::size_t n_b)
{
    if (n_a == 0 || n_b == 0) {
        return 1.0;
    }
    const double ne = static_cast<double>(n_a) * static_cast<double>(n_b) /
                      static_cast<double>(n_a + n_b);
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    if (lambda < 1e-3) {
        return 1.0;
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) {
            break;
        }
    }
    return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_permutation_test(std::span<const double> a, std::span<const double> b,
                             std::size_t permutations, Stream& stream)
{
    KsResult result;
    result.statistic = ks_statistic(a, b);
    if (a.empty() || b.empty() || permutations == 0) {
        return result;
    }
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<double> left(a.size());
    std::vector<double> right(b.size());
    std::size_t at_least = 0;
    for (std::size_t p = 0; p < permutations; ++p) {
        // Fisher-Yates on the first |a| slots only.
        for (std::size_t k = 0; k < a.size(); ++k) {
            const std::size_t r = k + stream.below(pooled.size() - k);
            std::swap(pooled[k], pooled[r]);
        }
        std::copy_n(pooled.begin(), a.size(), left.begin());
        std::copy(pooled.begin() + static_cast<std::ptrdiff_t>(a.size()), pooled.end(),
                  right.begin());
        std::sort(left.begin(), left.end());
        std::sort(right.begin(), right.end());
        if (ks_sorted(left, right) >= result.statistic - 1e-12) {
            ++at_least;
        }
    }
    result.p_value = static_cast<double>(at_least + 1) / static_cast<double>(permutations + 1);
    return result;
}

double last_half_growth(std::span<const double> partial_sums)
{
    if (partial_sums.size() < 3) {
        return 0.0;
    }
    const std::size_t n = partial_sums.size() - 1;
    const double half = partial_sums[n / 2];
    const double full = partial_sums[n];
    if (half == 0.0) {
        return full == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return (full - half) / half;
}

double quantile(std::vector<double> values, double p)
{
    if (values.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

} // namespace brw
