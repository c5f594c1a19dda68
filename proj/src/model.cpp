#include "brw/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "brw/errors.hpp"

namespace brw {

namespace {

constexpr std::uint64_t kSeriesTerms = 1000000;  // direct summation range
constexpr std::uint64_t kCountTableMax = 65536;  // tabulated sampling range

const double kLatticeH = std::log(2.0 + std::numbers::sqrt2);
const double kLatticeQ = (2.0 - std::numbers::sqrt2) / 4.0;

/// log-sum-exp summary of a finite weighted set of displacements.
LaplaceValue laplace_of_points(const std::vector<TableAtom>& atoms, double t)
{
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& a : atoms) {
        if (a.probability <= 0.0) {
            continue;
        }
        for (double d : a.displacements) {
            top = std::max(top, std::log(a.probability) - t * d);
        }
    }
    LaplaceValue out;
    if (!std::isfinite(top)) {
        out.phi = 0.0;
        out.psi = -std::numeric_limits<double>::infinity();
        return out;
    }
    CompensatedSum w, wd, wdd;
    for (const auto& a : atoms) {
        if (a.probability <= 0.0) {
            continue;
        }
        for (double d : a.displacements) {
            const double e = std::exp(std::log(a.probability) - t * d - top);
            w += e;
            wd += e * d;
            wdd += e * d * d;
        }
    }
    const double mean_d = wd.value() / w.value();
    out.psi = top + std::log(w.value());
    out.phi = std::exp(out.psi);
    out.psi_prime = -mean_d;
    out.psi_second = std::max(0.0, wdd.value() / w.value() - mean_d * mean_d);
    return out;
}

LaplaceValue gaussian_laplace(double log_count, double mean, double sd, double t)
{
    LaplaceValue out;
    out.psi = log_count - t * mean + 0.5 * t * t * sd * sd;
    out.phi = std::exp(out.psi);
    out.psi_prime = -mean + t * sd * sd;
    out.psi_second = sd * sd;
    return out;
}

/// sum_{n > M} f(n) by Euler-Maclaurin from the integral and f, f' at M.
double em_tail(double integral, double f_m, double fprime_m)
{
    return integral - 0.5 * f_m - fprime_m / 12.0;
}

} // namespace

std::string to_string(Family f)
{
    switch (f) {
    case Family::BinaryGaussian: return "BinaryGaussian";
    case Family::LatticeBinary: return "LatticeBinary";
    case Family::HeavyCount: return "HeavyCount";
    case Family::UserTable: return "UserTable";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// HeavyCountTable

HeavyCountTable::HeavyCountTable(double theta) : theta_(theta)
{
    if (!(theta > 1.0)) {
        throw PreconditionError("HeavyCount requires theta > 1");
    }
    // S2 = sum n^-2 (ln n)^-theta, S1 = sum n^-1 (ln n)^-theta over n >= 2.
    CompensatedSum s2, s1;
    CompensatedSum s2_table, s1_table;
    for (std::uint64_t n = kSeriesTerms; n >= 2; --n) {
        const double x = static_cast<double>(n);
        const double l = std::pow(std::log(x), -theta);
        s2 += l / (x * x);
        s1 += l / x;
    }
    for (std::uint64_t n = kCountTableMax; n >= 2; --n) {
        const double x = static_cast<double>(n);
        const double l = std::pow(std::log(x), -theta);
        s2_table += l / (x * x);
        s1_table += l / x;
    }
    const double m = static_cast<double>(kSeriesTerms);
    const double lm = std::log(m);

    // integral of x^-2 (ln x)^-theta over [M, inf), with x = M e^u
    boost::math::quadrature::exp_sinh<double> integrator;
    const double i2 = integrator.integrate(
                          [&](double u) { return std::exp(-u) * std::pow(lm + u, -theta); }) /
                      m;
    const double f2 = std::pow(lm, -theta) / (m * m);
    const double f2p = -(2.0 * lm + theta) * std::pow(lm, -theta - 1.0) / (m * m * m);
    const double i1 = std::pow(lm, 1.0 - theta) / (theta - 1.0);
    const double f1 = std::pow(lm, -theta) / m;
    const double f1p = -(lm + theta) * std::pow(lm, -theta - 1.0) / (m * m);

    const double total2 = s2.value() + em_tail(i2, f2, f2p);
    const double total1 = s1.value() + em_tail(i1, f1, f1p);
    c_ = 1.0 / total2;
    mean_ = c_ * total1;
    tail_ = c_ * (total2 - s2_table.value());
    tail_biased_ = c_ * (total1 - s1_table.value()) / mean_;

    cdf_.reserve(kCountTableMax - 1);
    cdf_biased_.reserve(kCountTableMax - 1);
    CompensatedSum acc, acc_b;
    for (std::uint64_t n = 2; n <= kCountTableMax; ++n) {
        const double p = pmf(static_cast<double>(n));
        acc += p;
        acc_b += static_cast<double>(n) * p / mean_;
        cdf_.push_back(acc.value());
        cdf_biased_.push_back(acc_b.value());
    }
}

double HeavyCountTable::pmf(double n) const noexcept
{
    if (n < 2.0) {
        return 0.0;
    }
    return c_ * std::pow(std::log(n), -theta_) / (n * n);
}

double HeavyCountTable::sample(Stream& s) const
{
    const double u = s.uniform();
    if (u < 1.0 - tail_) {
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return static_cast<double>(std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                                            cdf_.size() - 1)) +
               2.0;
    }
    // Pareto(1) proposal floor((K+1)/V) on n > K, pmf (K+1)/(n(n+1)).
    const double k1 = static_cast<double>(kCountTableMax + 1);
    const double bound = (k1 + 1.0) / k1 * std::pow(std::log(k1), -theta_);
    for (;;) {
        const double n = std::floor(k1 / s.uniform());
        const double ratio = (n + 1.0) / n * std::pow(std::log(n), -theta_);
        if (s.uniform() * bound <= ratio) {
            return n;
        }
    }
}

double HeavyCountTable::sample_size_biased_log(Stream& s) const
{
    const double u = s.uniform();
    if (u < 1.0 - tail_biased_) {
        const auto it = std::upper_bound(cdf_biased_.begin(), cdf_biased_.end(), u);
        const auto idx = std::min<std::ptrdiff_t>(it - cdf_biased_.begin(),
                                                  cdf_biased_.size() - 1);
        return std::log(static_cast<double>(idx) + 2.0);
    }
    // log n has density proportional to L^-theta beyond L0 = log(K+1); the
    // discrete correction f(n) / int_n^{n+1} f only matters for moderate n.
    const double k1 = static_cast<double>(kCountTableMax + 1);
    const double l0 = std::log(k1);
    const auto f = [this](double x) { return std::pow(std::log(x), -theta_) / x; };
    const double bound = f(k1) / f(k1 + 1.0);
    for (;;) {
        const double l = l0 * std::pow(s.uniform(), -1.0 / (theta_ - 1.0));
        if (l > 36.0) {
            return l;
        }
        const double n = std::floor(std::exp(l));
        if (n < k1) {
            continue;
        }
        const double ln = std::log(n);
        const double cell = std::pow(ln, 1.0 - theta_) / (theta_ - 1.0) *
                            -std::expm1((1.0 - theta_) * std::log1p(std::log1p(1.0 / n) / ln));
        if (s.uniform() * bound * cell <= f(n)) {
            return ln;
        }
    }
}

double HeavyCountTable::sample_size_biased(Stream& s) const
{
    return std::round(std::exp(sample_size_biased_log(s)));
}

double HeavyCountTable::truncated_moment(double p, double log_power, std::uint64_t k) const
{
    CompensatedSum acc;
    for (std::uint64_t n = std::max<std::uint64_t>(k, 1); n >= 2; --n) {
        const double x = static_cast<double>(n);
        acc += std::pow(x, p) * std::pow(std::log(x), log_power) * pmf(x);
    }
    return acc.value();
}

// ---------------------------------------------------------------------------
// OffspringLaw

OffspringLaw OffspringLaw::binary_gaussian(double mean, double sd)
{
    if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean)) {
        throw PreconditionError("BinaryGaussian needs a finite mean and sd > 0");
    }
    OffspringLaw law;
    law.family_ = Family::BinaryGaussian;
    law.params_.mean = mean;
    law.params_.sd = sd;
    return law;
}

OffspringLaw OffspringLaw::lattice_binary()
{
    OffspringLaw law;
    law.family_ = Family::LatticeBinary;
    law.params_.atoms = {{kLatticeQ, {-kLatticeH}}, {1.0 - kLatticeQ, {kLatticeH, kLatticeH}}};
    law.params_.lattice_span = kLatticeH;
    law.atom_cdf_ = {kLatticeQ, 1.0};
    return law;
}

OffspringLaw OffspringLaw::heavy_count(double theta, double mean, double sd)
{
    if (!(theta > 1.0)) {
        throw PreconditionError("HeavyCount requires theta > 1");
    }
    if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean)) {
        throw PreconditionError("HeavyCount needs a finite mean and sd > 0");
    }
    OffspringLaw law;
    law.family_ = Family::HeavyCount;
    law.params_.theta = theta;
    law.params_.mean = mean;
    law.params_.sd = sd;
    law.counts_ = std::make_shared<const HeavyCountTable>(theta);
    return law;
}

OffspringLaw OffspringLaw::user_table(std::vector<TableAtom> atoms,
                                      std::optional<double> lattice_span)
{
    if (atoms.empty()) {
        throw PreconditionError("UserTable needs at least one atom");
    }
    double total = 0.0;
    for (const auto& a : atoms) {
        if (!(a.probability >= 0.0) || !std::isfinite(a.probability)) {
            throw PreconditionError("UserTable probabilities must be finite and >= 0");
        }
        for (double d : a.displacements) {
            if (!std::isfinite(d)) {
                throw PreconditionError("UserTable displacements must be finite");
            }
            if (lattice_span) {
                const double k = d / *lattice_span;
                if (std::abs(k - std::round(k)) > 1e-9) {
                    throw PreconditionError("UserTable displacement " + std::to_string(d) +
                                            " is not a multiple of the lattice span");
                }
            }
        }
        total += a.probability;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw PreconditionError("UserTable probabilities must sum to 1");
    }
    if (lattice_span && !(*lattice_span > 0.0)) {
        throw PreconditionError("lattice_span must be positive");
    }
    OffspringLaw law;
    law.family_ = Family::UserTable;
    law.params_.atoms = std::move(atoms);
    law.params_.lattice_span = lattice_span;
    double acc = 0.0;
    for (const auto& a : law.params_.atoms) {
        acc += a.probability / total;
        law.atom_cdf_.push_back(acc);
    }
    law.atom_cdf_.back() = 1.0;
    return law;
}

std::string OffspringLaw::describe() const
{
    std::ostringstream os;
    os.precision(17);
    os << to_string(family_);
    switch (family_) {
    case Family::BinaryGaussian:
        os << "(mean=" << params_.mean << ", sd=" << params_.sd << ")";
        break;
    case Family::HeavyCount:
        os << "(theta=" << params_.theta << ", mean=" << params_.mean << ", sd=" << params_.sd
           << ")";
        break;
    case Family::UserTable:
        os << "(" << params_.atoms.size() << " atoms)";
        break;
    case Family::LatticeBinary:
        break;
    }
    if (boundary_) {
        os << " normalized by (" << norm_.scale << ", " << norm_.shift << ")";
    }
    return os.str();
}

LaplaceValue OffspringLaw::laplace_raw(double t) const
{
    if (!std::isfinite(t)) {
        throw OutOfDomain("Laplace transform evaluated at non-finite t");
    }
    LaplaceValue v;
    switch (family_) {
    case Family::BinaryGaussian:
        v = gaussian_laplace(std::numbers::ln2, params_.mean, params_.sd, t);
        break;
    case Family::HeavyCount:
        v = gaussian_laplace(std::log(counts_->mean()), params_.mean, params_.sd, t);
        break;
    case Family::LatticeBinary:
    case Family::UserTable:
        v = laplace_of_points(params_.atoms, t);
        break;
    }
    return v;
}

LaplaceValue OffspringLaw::laplace(double t) const
{
    const LaplaceValue r = laplace_raw(norm_.scale * t);
    LaplaceValue v;
    v.psi = -t * norm_.shift + r.psi;
    v.psi_prime = -norm_.shift + norm_.scale * r.psi_prime;
    v.psi_second = norm_.scale * norm_.scale * r.psi_second;
    v.phi = std::exp(v.psi);
    if (!std::isfinite(v.psi_prime) || !(v.psi < std::numeric_limits<double>::infinity())) {
        throw OutOfDomain("Laplace transform is not finite at t=" + std::to_string(t));
    }
    return v;
}

double OffspringLaw::sigma2() const
{
    const LaplaceValue v = laplace(1.0);
    return v.phi * (v.psi_second + v.psi_prime * v.psi_prime);
}

double OffspringLaw::mean_count() const
{
    switch (family_) {
    case Family::BinaryGaussian: return 2.0;
    case Family::HeavyCount: return counts_->mean();
    case Family::LatticeBinary:
    case Family::UserTable: {
        double m = 0.0;
        for (const auto& a : params_.atoms) {
            m += a.probability * static_cast<double>(a.displacements.size());
        }
        return m;
    }
    }
    return 0.0;
}

std::optional<double> OffspringLaw::lattice_span() const
{
    if (!params_.lattice_span) {
        return std::nullopt;
    }
    const double span = norm_.scale * *params_.lattice_span;
    const double k = norm_.shift / span;
    if (std::abs(k - std::round(k)) > 1e-9) {
        return std::nullopt;
    }
    return span;
}

std::vector<TableAtom> OffspringLaw::atoms() const
{
    if (!finite_support()) {
        throw PreconditionError(to_string(family_) + " has no finite outcome table");
    }
    std::vector<TableAtom> out = params_.atoms;
    for (auto& a : out) {
        for (double& d : a.displacements) {
            d = norm_.scale * d + norm_.shift;
        }
    }
    return out;
}

std::size_t OffspringLaw::max_children() const
{
    std::size_t m = 0;
    for (const auto& a : params_.atoms) {
        m = std::max(m, a.displacements.size());
    }
    return m;
}

std::pair<double, double> OffspringLaw::gaussian_displacement() const
{
    if (family_ != Family::BinaryGaussian && family_ != Family::HeavyCount) {
        throw PreconditionError(to_string(family_) + " has no Gaussian displacement");
    }
    return {norm_.scale * params_.mean + norm_.shift, norm_.scale * params_.sd};
}

void OffspringLaw::sample(Stream& s, std::vector<double>& out) const
{
    out.clear();
    switch (family_) {
    case Family::BinaryGaussian: {
        const auto [mu, sd] = gaussian_displacement();
        out.push_back(mu + sd * s.normal());
        out.push_back(mu + sd * s.normal());
        break;
    }
    case Family::HeavyCount: {
        const double n = counts_->sample(s);
        if (n > kMaxMaterializedChildren) {
            throw OffspringTooLarge(n);
        }
        const auto [mu, sd] = gaussian_displacement();
        const auto count = static_cast<std::size_t>(n);
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            out.push_back(mu + sd * s.normal());
        }
        break;
    }
    case Family::LatticeBinary:
    case Family::UserTable: {
        const double u = s.uniform();
        const auto it = std::upper_bound(atom_cdf_.begin(), atom_cdf_.end(), u);
        const auto idx = std::min<std::ptrdiff_t>(it - atom_cdf_.begin(),
                                                  atom_cdf_.size() - 1);
        for (double d : params_.atoms[static_cast<std::size_t>(idx)].displacements) {
            out.push_back(norm_.scale * d + norm_.shift);
        }
        break;
    }
    }
}

std::vector<double> OffspringLaw::sample(Stream& s) const
{
    std::vector<double> out;
    sample(s, out);
    return out;
}

OffspringLaw OffspringLaw::with_normalization(Normalization n, bool boundary) const
{
    OffspringLaw law = *this;
    law.norm_ = n;
    law.boundary_ = boundary;
    return law;
}

// ---------------------------------------------------------------------------

OffspringLaw normalize_to_boundary(const OffspringLaw& law, double a_max)
{
    constexpr double kAlreadyBoundary = 1e-12;
    constexpr double kAMin = 1e-6;

    const LaplaceValue raw1 = law.laplace_raw(1.0);
    if (std::isfinite(raw1.psi) && std::abs(raw1.psi) <= kAlreadyBoundary &&
        std::abs(raw1.psi_prime) <= kAlreadyBoundary) {
        return law.with_normalization({1.0, 0.0}, true);
    }
    if (law.is_boundary()) {
        return law;
    }

    const auto g = [&](double a) {
        const LaplaceValue v = law.laplace_raw(a);
        return v.psi - a * v.psi_prime;
    };
    // Psi(a) - a Psi'(a) is non-increasing in a; scan for its sign change.
    constexpr int kScan = 2000;
    double lo = kAMin;
    double g_lo = g(lo);
    bool any_finite = std::isfinite(g_lo);
    double hi = 0.0;
    bool bracketed = false;
    for (int i = 1; i <= kScan; ++i) {
        const double a = kAMin * std::pow(a_max / kAMin, static_cast<double>(i) / kScan);
        const double ga = g(a);
        if (!std::isfinite(ga)) {
            continue;
        }
        if (!any_finite || !std::isfinite(g_lo)) {
            lo = a;
            g_lo = ga;
            any_finite = true;
            continue;
        }
        if (g_lo > 0.0 && ga <= 0.0) {
            hi = a;
            bracketed = true;
            break;
        }
        lo = a;
        g_lo = ga;
    }
    if (!any_finite) {
        throw NonIntegrable("Laplace transform of " + law.describe() +
                            " diverges on the whole search range");
    }
    if (!bracketed) {
        throw NoBoundaryRoot("Psi(a) = a Psi'(a) has no root in [1e-6, " +
                             std::to_string(a_max) + "] for " + law.describe());
    }
    for (int iter = 0; iter < 400 && hi - lo > 0.0; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (g(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double a_star = std::abs(g(lo)) <= std::abs(g(hi)) ? lo : hi;
    const double b_star = law.laplace_raw(a_star).psi;
    return law.with_normalization({a_star, b_star}, true);
}

LaplaceValue eval_laplace(const OffspringLaw& law, double t)
{
    return law.laplace(t);
}

LaplaceEstimate eval_laplace_mc(const OffspringLaw& law, double t, std::uint64_t draws,
                                Stream& s)
{
    if (!std::isfinite(t)) {
        throw OutOfDomain("Laplace transform evaluated at non-finite t");
    }
    Moments a, b, cross;
    std::vector<double> kids;
    std::vector<double> av, bv;
    av.reserve(draws);
    bv.reserve(draws);
    for (std::uint64_t i = 0; i < draws; ++i) {
        law.sample(s, kids);
        double sa = 0.0;
        double sb = 0.0;
        for (double v : kids) {
            const double e = std::exp(-t * v);
            sa += e;
            sb -= v * e;
        }
        a.add(sa);
        b.add(sb);
        av.push_back(sa);
        bv.push_back(sb);
    }
    LaplaceEstimate out;
    out.phi = a.estimate();
    out.psi = std::log(a.mean());
    const double r = b.mean() / a.mean();
    for (std::uint64_t i = 0; i < draws; ++i) {
        cross.add(bv[i] - r * av[i]);
    }
    out.psi_prime = {r, cross.se() / std::abs(a.mean()), draws};
    return out;
}

YZ eval_yz(std::span<const double> displacements)
{
    CompensatedSum y, z;
    for (double v : displacements) {
        const double e = std::exp(-v);
        y += e;
        if (v > 0.0) {
            z += v * e;
        }
    }
    return {y.value(), z.value()};
}

std::vector<double> sample_offspring(const OffspringLaw& law, Stream& s)
{
    return law.sample(s);
}

} // namespace brw
