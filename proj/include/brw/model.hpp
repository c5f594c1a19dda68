#pragma once

// Offspring point-process laws.
//
// A law describes the displacements (V(u), |u| = 1) of the children of one
// particle. Every family carries an affine normalization V -> a*V + b* that
// is applied on sampling and folded into the Laplace transform, so a raw law
// and its boundary-case version share one object type.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brw/rng.hpp"
#include "brw/stats.hpp"

namespace brw {

enum class Family { BinaryGaussian, LatticeBinary, HeavyCount, UserTable };

std::string to_string(Family f);

/// The affine map V -> scale * V + shift.
struct Normalization {
    double scale = 1.0;
    double shift = 0.0;
    bool operator==(const Normalization&) const = default;
};

/// One outcome of a UserTable law.
struct TableAtom {
    double probability = 0.0;
    std::vector<double> displacements;
};

/// Values of the Laplace transform of a law at one t.
struct LaplaceValue {
    double phi = 0.0;
    double psi = 0.0;
    double psi_prime = 0.0;
    double psi_second = 0.0;
};

/// Monte Carlo estimates of the same quantities.
struct LaplaceEstimate {
    Estimate phi;
    Estimate psi_prime; ///< ratio estimator, se by the delta method
    double psi = 0.0;
};

/// The count law P(N = n) = c n^-2 (log n)^-theta, n >= 2, and its
/// size-biased version n P(N = n) / E[N].
class HeavyCountTable {
public:
    explicit HeavyCountTable(double theta);

    double theta() const noexcept { return theta_; }
    double normalizer() const noexcept { return c_; }
    double mean() const noexcept { return mean_; }
    double pmf(double n) const noexcept;

    /// One draw of N; can exceed any materializable size.
    double sample(Stream& s) const;
    /// One draw of the size-biased count.
    double sample_size_biased(Stream& s) const;
    /// log of a size-biased draw; finite even when the count overflows a double.
    double sample_size_biased_log(Stream& s) const;

    /// E[N^p 1{N <= k}] summed exactly over the support.
    double truncated_moment(double p, double log_power, std::uint64_t k) const;

private:
    double theta_;
    double c_ = 0.0;
    double mean_ = 0.0;
    std::vector<double> cdf_;        // P(N <= n) for n = 2..table_max
    std::vector<double> cdf_biased_; // size-biased analogue
    double tail_ = 0.0;              // P(N > table_max)
    double tail_biased_ = 0.0;
};

/// Parameters by family. Unused fields are ignored.
struct LawParams {
    double mean = 0.0;  ///< Gaussian displacement mean (BinaryGaussian, HeavyCount)
    double sd = 1.0;    ///< Gaussian displacement sd
    double theta = 2.0; ///< HeavyCount tail exponent
    std::vector<TableAtom> atoms;     ///< UserTable outcomes
    std::optional<double> lattice_span; ///< UserTable lattice span, if declared
};

/// Hard limit on the number of children materialized by one draw.
inline constexpr double kMaxMaterializedChildren = 67108864.0; // 2^26

class OffspringLaw {
public:
    static OffspringLaw binary_gaussian(double mean = 0.0, double sd = 1.0);
    static OffspringLaw lattice_binary();
    static OffspringLaw heavy_count(double theta, double mean = 0.0, double sd = 1.0);
    static OffspringLaw user_table(std::vector<TableAtom> atoms,
                                   std::optional<double> lattice_span = std::nullopt);

    Family family() const noexcept { return family_; }
    const LawParams& params() const noexcept { return params_; }
    const Normalization& normalization() const noexcept { return norm_; }
    /// True once normalize_to_boundary produced or confirmed this law.
    bool is_boundary() const noexcept { return boundary_; }
    std::string describe() const;

    /// Laplace transform of the normalized law at t.
    LaplaceValue laplace(double t) const;
    /// Laplace transform of the raw (unnormalized) law at t.
    LaplaceValue laplace_raw(double t) const;
    /// sigma^2 = E[sum V^2 e^-V] = Psi''(1) for a boundary law.
    double sigma2() const;
    /// Expected number of children.
    double mean_count() const;
    /// Lattice span of the normalized displacements, if they live on a lattice
    /// through the origin.
    std::optional<double> lattice_span() const;
    /// True if the number of outcomes of one draw is finite.
    bool finite_support() const noexcept
    {
        return family_ == Family::LatticeBinary || family_ == Family::UserTable;
    }
    /// Outcomes of a finite-support law after normalization.
    std::vector<TableAtom> atoms() const;
    /// Largest child count a finite-support law can produce.
    std::size_t max_children() const;

    const HeavyCountTable* count_table() const noexcept { return counts_.get(); }

    /// Gaussian displacement (mean, sd) after normalization, for the
    /// Gaussian families.
    std::pair<double, double> gaussian_displacement() const;

    /// One draw of the point process, appended to `out` after clearing it.
    void sample(Stream& s, std::vector<double>& out) const;
    std::vector<double> sample(Stream& s) const;

    OffspringLaw with_normalization(Normalization n, bool boundary) const;

private:
    OffspringLaw() = default;

    Family family_ = Family::BinaryGaussian;
    LawParams params_;
    Normalization norm_;
    bool boundary_ = false;
    std::shared_ptr<const HeavyCountTable> counts_;
    std::vector<double> atom_cdf_;
};

/// Returns the boundary-case version of `law`.
///
/// Throws NoBoundaryRoot when no a in [1e-6, a_max] solves
/// Psi(a) = a Psi'(a), and NonIntegrable when the transform is infinite on
/// the whole search range.
OffspringLaw normalize_to_boundary(const OffspringLaw& law, double a_max = 50.0);

LaplaceValue eval_laplace(const OffspringLaw& law, double t);
/// Monte Carlo estimate of Phi(t) and Psi'(t) from `draws` offspring draws.
LaplaceEstimate eval_laplace_mc(const OffspringLaw& law, double t, std::uint64_t draws,
                                Stream& s);

/// Y = sum e^-V and Z = sum V_+ e^-V over one draw.
struct YZ {
    double y = 0.0;
    double z = 0.0;
};
YZ eval_yz(std::span<const double> displacements);

std::vector<double> sample_offspring(const OffspringLaw& law, Stream& s);

} // namespace brw
