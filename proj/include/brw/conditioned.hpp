#pragma once

// The random walk conditioned to stay positive, built by Tanaka's
// construction from time-reversed negative excursions.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "brw/stats.hpp"
#include "brw/walk.hpp"

namespace brw {

/// A path xi(0) = 0, ..., xi(tau) with xi(j) <= 0 for j < tau and xi(tau) > 0.
struct Excursion {
    std::vector<double> path;
    std::size_t tau() const noexcept { return path.size() - 1; }
};

/// Runs the walk from 0 until it first enters (0, inf). Throws
/// ExcursionOverrun after `budget` steps without entry.
Excursion sample_excursion(const StepLaw& step, std::uint64_t budget, Stream& s);

/// nu(j) = xi(tau) - xi(tau - j), j = 0..tau.
std::vector<double> reverse_excursion(const Excursion& e);

struct ConditionedPath {
    std::vector<double> values;              ///< zeta_0 = 0, ..., zeta_N
    std::vector<std::uint64_t> block_ends;   ///< T_1^+, T_2^+, ... (completed blocks)
    std::vector<double> heights;             ///< H_1^+, H_2^+, ...
};

/// zeta_n = H_k^+ + nu_{k+1}(n - T_k^+), concatenated up to horizon N.
/// Excursion overruns propagate as ExcursionOverrun.
ConditionedPath sample_conditioned(const StepLaw& step, std::uint64_t horizon, Stream& s,
                                   std::uint64_t budget = 10000000);

struct ConditionedBatch {
    std::vector<ConditionedPath> paths;
    std::uint64_t retries = 0; ///< paths resampled after an excursion overrun
};

/// Paths 0..P-1; path p uses substream (seed, "conditioned", p) and on an
/// overrun is redrawn from lane attempt+1 of the same substream.
ConditionedBatch sample_conditioned_paths(const StepLaw& step, std::uint64_t horizon,
                                          std::uint64_t paths, std::uint64_t seed,
                                          unsigned workers = 1,
                                          std::uint64_t budget = 10000000,
                                          std::uint64_t max_attempts = 64);

/// A non-increasing function given as a table, evaluated as a right-continuous
/// step function: F(y) = F(y_k) for y_k <= y < y_{k+1}, F(y_last) beyond.
class MonotoneTable {
public:
    MonotoneTable(std::vector<double> y, std::vector<double> f);
    /// Tabulates `fn` on `y`.
    static MonotoneTable from_function(const std::function<double(double)>& fn,
                                       std::vector<double> y);
    /// Geometric grid 0, y_min, y_min*r, ... up to y_max.
    static std::vector<double> geometric_grid(double y_min, double y_max, double ratio);

    double operator()(double y) const;
    const std::vector<double>& y() const noexcept { return y_; }
    const std::vector<double>& f() const noexcept { return f_; }
    /// int_0^{y_k} F(y) y dy at every grid point (exact for the step function).
    std::vector<double> moment_integral() const;

private:
    std::vector<double> y_;
    std::vector<double> f_;
};

MonotoneTable parse_f_table(const std::string& csv_text);

enum class SeriesClass { Plateau, Divergent, Indeterminate };
std::string to_string(SeriesClass c);

struct SeriesThresholds {
    double plateau = 0.01;   ///< last-half relative growth below this: plateau
    double divergent = 0.20; ///< last-half relative growth above this: divergent
};

SeriesClass classify_growth(double growth, const SeriesThresholds& t);

struct SeriesDiagnostic {
    std::vector<double> partial_sums;      ///< mean over paths of sum_{0<=k<=n} F(zeta_k), n = 0..N
    std::vector<double> path_growth;       ///< last-half growth of each path
    double growth = 0.0;                   ///< last-half growth of the mean trajectory
    SeriesClass series_class = SeriesClass::Indeterminate;
    std::vector<double> integral_m;        ///< M values of the integral trend
    std::vector<double> integral;          ///< int_0^M F(y) y dy
    bool integral_divergent = false;       ///< integral trend still growing over the table
};

/// Partial sums sum_{n=0}^{N} F(zeta_n) over the given paths (horizon N taken
/// from the paths), the integral trend of F and a plateau/divergence call.
SeriesDiagnostic series_diagnostic(const MonotoneTable& f,
                                   std::span<const ConditionedPath> paths,
                                   const SeriesThresholds& thresholds = {});

/// Right-hand side int f(x) R(x) U(dx) of the expected-sum identity,
/// evaluated on a renewal table (f must vanish beyond the table).
double expected_sum_rhs(const std::function<double(double)>& f, const RenewalTable& table);

struct HTransformCheck {
    Estimate tanaka;   ///< E[g(zeta_0..N)] from Tanaka paths
    Estimate weighted; ///< E[g(S) R(S_N); min_{k>=1} S_k > 0] / R(0)
};

/// Monte Carlo comparison of the Tanaka construction with the h-transform.
/// Tanaka paths come from sample_conditioned_paths, so overruns are redrawn.
HTransformCheck verify_h_transform_mc(const StepLaw& step, const RenewalFunction& r,
                                      std::uint64_t horizon, const PathFunctional& g,
                                      std::uint64_t replicas, std::uint64_t seed,
                                      unsigned workers = 1);

} // namespace brw
