#pragma once

// The non-triviality condition E[Z log+ Z + Y (log+ Y)^2] < infinity and the
// series criteria evaluated along paths of the conditioned walk.

#include <cstdint>
#include <string>
#include <vector>

#include "brw/conditioned.hpp"
#include "brw/forest.hpp"
#include "brw/model.hpp"
#include "brw/walk.hpp"

namespace brw {

/// X = sum_u R(zeta + D_u) e^{-D_u} 1{D_u > -zeta} / R(zeta) for one
/// offspring draw D.
double eval_X(std::span<const double> displacements, double zeta, const RenewalFunction& r);

/// One draw of X under P_zeta from a fresh offspring draw. Throws
/// OffspringTooLarge when the draw cannot be materialized.
double eval_X(const OffspringLaw& law, double zeta, const RenewalFunction& r, Stream& s);

/// A weighted draw of X: E[f(X)] is estimated by the mean of weight * f(X).
/// `log_x` stays finite when X overflows a double; `x_weighted` = X * weight.
struct WeightedX {
    double log_x = 0.0;
    double x_weighted = 0.0;
    double weight = 1.0;
};

struct XSamplerOptions {
    /// Offspring counts above this are summed by a central limit approximation.
    double clt_threshold = 10000.0;
    /// Draw HeavyCount counts from (P + size-biased P) / 2 and reweight.
    bool importance = true;
};

/// Draws X at a fixed zeta. For HeavyCount laws the count is importance
/// sampled and large counts use the normal approximation of the sum of the
/// per-child terms, whose mean and variance are computed by quadrature.
class XSampler {
public:
    XSampler(const OffspringLaw& law, const RenewalFunction& r, double zeta,
             const XSamplerOptions& options = {});
    WeightedX draw(Stream& s);

private:
    void ensure_moments();

    const OffspringLaw& law_;
    const RenewalFunction& r_;
    double zeta_;
    double r_zeta_;
    XSamplerOptions options_;
    double mean_w_ = 0.0; ///< E[R(zeta + D) e^{-D} 1{D > -zeta}] for one Gaussian child
    double sd_w_ = 0.0;
    bool have_moments_ = false;
    std::vector<double> kids_;
};

struct CriterionOptions {
    std::uint64_t horizon = 10000;
    std::uint64_t paths = 32;
    std::uint64_t draws = 64; ///< X draws per (path, n), shared by every series
    std::vector<double> y_values{1.0, 2.0, 8.0};
    SeriesThresholds thresholds{0.05, 0.20};
    XSamplerOptions sampler;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

/// One criterion series: "truncated" is sum_n E[X (c X ^ 1)], "tail_y<y>"
/// is sum_n E[X; c X >= y], with c = R(zeta_n) e^{-zeta_n}.
struct SeriesTrack {
    std::string name;
    std::vector<double> summand;     ///< mean over paths, n = 1..N (index n - 1)
    std::vector<double> partial_sum; ///< mean over paths
    std::vector<double> se;          ///< standard error of the partial sum over paths
    std::vector<double> path_growth;
    double growth = 0.0;
    SeriesClass series_class = SeriesClass::Indeterminate;
};

struct CriterionReport {
    std::string law;
    std::vector<SeriesTrack> series;
    const SeriesTrack& find(const std::string& name) const;
};

std::string tail_series_name(double y);

/// "violating" when any tail series diverges, "satisfying" when the truncated
/// series plateaus, "undetermined" otherwise.
std::string criterion_verdict(const CriterionReport& report);

CriterionReport run_criterion_series(const OffspringLaw& law, const RenewalFunction& r,
                                     const CriterionOptions& options);

/// Columns law, series, n, summand, partial_sum, se.
std::string criterion_csv(const std::vector<CriterionReport>& reports);

struct MomentOptions {
    std::uint64_t draws = 1000000;
    std::vector<double> caps{1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e8, 1e10, 1e12};
    XSamplerOptions sampler;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

/// Truncated moments M_Y(K) = E[Y (log+ Y)^2 ^ K] and M_Z(K) = E[Z log+ Z ^ K].
struct MomentReport {
    std::vector<double> caps;
    std::vector<Estimate> m_y, m_z;
    double slope_y = 0.0; ///< dM/dlog K between the two largest caps
    double slope_z = 0.0;
    std::uint64_t draws = 0;
};

MomentReport estimate_moments(const OffspringLaw& law, const MomentOptions& options);

/// F1(z) = E[Y; log Y >= z] and F3(z) = E[Z; log Z >= z + log y] / R(z).
struct TailFunctionals {
    std::vector<double> z;
    std::vector<double> f1, f3;
    std::vector<double> se_f1, se_f3;
    double y = 1.0;
};

TailFunctionals eval_tail_functionals(const OffspringLaw& law, std::vector<double> z_grid,
                                      double y, const RenewalFunction& r,
                                      const MomentOptions& options);

struct DichotomyOptions {
    CriterionOptions criterion;
    MomentOptions moments;
    int generations = 10;
    std::uint64_t forest_replicas = 200;
    std::uint64_t cap = 2000000;
    double tail_y = 1.0;
};

/// Per-law summary of the dichotomy experiment.
struct DichotomySide {
    std::string law;
    MomentReport moments;
    CriterionReport criterion;
    SeriesDiagnostic f3_series;                ///< sum_n F3(zeta_n) along the criterion paths
    std::vector<double> d_median, d_q90;       ///< D_n^(0) quantiles per depth
    std::vector<double> zero_fraction;         ///< fraction of replicas with D_n^(0) = 0
    std::uint64_t truncated = 0;               ///< forest replicas stopped by the cap
    std::string verdict; ///< criterion_verdict of the criterion report
};

struct DichotomyReport {
    DichotomySide a, b;
};

DichotomySide dichotomy_side(const OffspringLaw& law, const RenewalFunction& r,
                             const DichotomyOptions& options);
DichotomyReport dichotomy_experiment(const OffspringLaw& law_a, const RenewalFunction& r_a,
                                     const OffspringLaw& law_b, const RenewalFunction& r_b,
                                     const DichotomyOptions& options);

/// Columns law, quantity, index, value.
std::string dichotomy_csv(const DichotomyReport& report);

} // namespace brw
