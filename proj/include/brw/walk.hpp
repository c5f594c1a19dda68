#pragma once

// The associated one-dimensional walk of the many-to-one lemma, its ladder
// structure and renewal functions.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brw/model.hpp"
#include "brw/rng.hpp"
#include "brw/stats.hpp"

namespace brw {

/// Law of one increment S_1 - S_0 of the associated walk.
class StepLaw {
public:
    enum class Kind { Gaussian, Discrete, Resampled };

    static StepLaw gaussian(double sd);
    /// Finite law; values are merged when equal. With a lattice span every
    /// value must be an integer multiple of it.
    static StepLaw discrete(std::vector<double> values, std::vector<double> probs,
                            std::optional<double> lattice_span = std::nullopt);
    /// Draws by rejection from a finite-support offspring law: accept an
    /// offspring set with probability Y / y_max, then pick child u with
    /// probability e^{-V(u)} / Y.
    static StepLaw resampled(const OffspringLaw& law, double y_max);

    Kind kind() const noexcept { return kind_; }
    double sample(Stream& s) const;
    double mean() const noexcept { return mean_; }
    double variance() const noexcept { return variance_; }
    double sd() const noexcept { return std::sqrt(variance_); }
    std::optional<double> lattice_span() const noexcept { return span_; }
    bool finite_support() const noexcept { return kind_ != Kind::Gaussian; }

    /// Support and probabilities of a finite law (resampled laws report the
    /// exact law they sample from).
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<double>& probabilities() const noexcept { return probs_; }
    /// Support in units of the lattice span.
    std::vector<std::int64_t> lattice_steps() const;
    /// q-quantile bounds of the step, used to size table coverage.
    double upper_quantile(double tail) const;

private:
    StepLaw() = default;

    Kind kind_ = Kind::Gaussian;
    double mean_ = 0.0;
    double variance_ = 0.0;
    std::vector<double> values_;
    std::vector<double> probs_;
    std::vector<double> cdf_;
    std::optional<double> span_;
    std::shared_ptr<const OffspringLaw> law_;
    double y_max_ = 0.0;
};

enum class StepMode { Analytic, Resampled };

/// Law of S_1 - S_0 for a boundary law. Analytic mode is exact for every
/// built-in family; resampled mode needs a finite rejection envelope for Y.
StepLaw derive_step_law(const OffspringLaw& law, StepMode mode = StepMode::Analytic);

/// A path functional g(V(u_1), ..., V(u_n)).
using PathFunctional = std::function<double(std::span<const double>)>;

struct ManyToOneResult {
    Estimate lhs; ///< E[sum_{|u|=n} g(V(u_1..u_n))]
    Estimate rhs; ///< E[e^{S_n - a} g(S_1..S_n)]
};

ManyToOneResult verify_many_to_one(const OffspringLaw& law, const PathFunctional& g, int n,
                                   std::uint64_t replicas, std::uint64_t seed,
                                   double start = 0.0, unsigned workers = 1,
                                   std::uint64_t cap = 5000000);

// ---------------------------------------------------------------------------
// Renewal functions

/// R(x) = U^-([0, x)) for x > 0 with R(0) = 1; R(x) = 0 for x < 0.
class RenewalFunction {
public:
    virtual ~RenewalFunction() = default;
    virtual double operator()(double x) const = 0;
    /// Standard error of the value at x (0 for exact forms).
    virtual double se(double) const { return 0.0; }
    /// Largest x at which the function may be evaluated.
    virtual double coverage() const = 0;
    /// Constants with c1 (1 + x) <= R(x) <= c2 (1 + x) for x >= 0.
    virtual double envelope_lower() const = 0;
    virtual double envelope_upper() const = 0;
    virtual std::string describe() const = 0;
};

using RHandle = std::shared_ptr<const RenewalFunction>;

/// Exact R of the +-h simple walk: R(x) = 2 ceil(x / h) for x > 0.
class ExactLatticeR final : public RenewalFunction {
public:
    explicit ExactLatticeR(double h) : h_(h) {}
    double operator()(double x) const override;
    double coverage() const override;
    double envelope_lower() const override { return 2.0 / (1.0 + h_); }
    double envelope_upper() const override { return 2.0; }
    std::string describe() const override;
    double span() const noexcept { return h_; }

private:
    double h_;
};

/// Monte Carlo renewal tables.
///
/// Cell i of the grid is x_i = i * cell_width. For i >= 1 the columns hold
/// U([0, x_i)), U^-([0, x_i)) and R(x_i) = U^-([0, x_i)); at x_0 = 0 the U
/// columns hold the atoms U({0}) and U^-({0}) while R(0) = 1.
struct RenewalTable {
    double cell_width = 0.0;
    std::vector<double> x;
    std::vector<double> u;
    std::vector<double> u_minus;
    std::vector<double> r;
    std::vector<double> se_r;
    std::vector<double> se_u;
    std::vector<std::uint64_t> n_samples; ///< visits recorded in each cell
    std::optional<double> lattice_span;
    std::uint64_t excursions = 0;
    std::uint64_t overruns = 0;  ///< excursions cut at the step budget
    bool partial = false;

    double x_max() const noexcept { return x.empty() ? 0.0 : x.back(); }
    /// Fitted envelope constants over the table.
    double envelope_lower() const;
    double envelope_upper() const;
    /// Copy with every abscissa multiplied by `factor` (R_{c sigma}(x) = R_sigma(x / c)).
    RenewalTable rescaled(double factor) const;
};

struct RenewalOptions {
    std::uint64_t excursions = 200000;
    double grid_max = 0.0;    ///< 0 selects 100 step sds
    double cell_width = 0.0;  ///< 0 selects span/4 on lattices, sd/10 otherwise
    std::uint64_t budget = 10000000; ///< step budget of a single excursion
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::uint64_t block = 4096; ///< excursions per substream
};

RenewalTable estimate_renewal(const StepLaw& step, const RenewalOptions& options);

/// R read from a table: step interpolation on lattices ("smallest grid point
/// >= x"), linear otherwise. Beyond the table the function either throws
/// RIncompatible or, if `linear_tail` is set, continues with the fitted slope.
class TabulatedR final : public RenewalFunction {
public:
    explicit TabulatedR(std::shared_ptr<const RenewalTable> table, bool linear_tail = false);
    double operator()(double x) const override;
    double se(double x) const override;
    double coverage() const override;
    double envelope_lower() const override { return c1_; }
    double envelope_upper() const override { return c2_; }
    std::string describe() const override;
    const RenewalTable& table() const noexcept { return *table_; }
    double tail_slope() const noexcept { return slope_; }

private:
    double interpolate(const std::vector<double>& col, double x) const;

    std::shared_ptr<const RenewalTable> table_;
    bool linear_tail_;
    double slope_ = 0.0;
    double c1_ = 0.0;
    double c2_ = 0.0;
};

struct C0Estimate {
    double c0 = 0.0;    ///< least-squares slope of R over the top half of the grid
    double drift = 0.0; ///< relative change of R(x)/x over the last decade
};
C0Estimate estimate_c0(const RenewalTable& table, double step_sd);

struct HarmonicPoint {
    double x = 0.0;
    Estimate lhs;      ///< E[R(S_1 + x); S_1 + x > 0]
    double rhs = 0.0;  ///< R(x)
    double se = 0.0;   ///< combined standard error of lhs - rhs
    double z = 0.0;
};
struct HarmonicReport {
    std::vector<HarmonicPoint> points;
    double max_relative_deviation = 0.0;
    double max_z = 0.0;
};

HarmonicReport check_harmonic(const StepLaw& step, const RenewalFunction& r,
                              std::span<const double> x_grid, std::uint64_t replicas,
                              std::uint64_t seed, unsigned workers = 1);

/// Strict ascending ladder epochs/heights and weak descending ladder heights
/// read off one path of `steps` steps from 0.
struct LadderDecomposition {
    std::vector<std::uint64_t> ascending_epochs;
    std::vector<double> ascending_heights;
    std::vector<std::uint64_t> descending_epochs;
    std::vector<double> descending_heights; ///< magnitudes -S_k, nondecreasing
};
LadderDecomposition ladder_decomposition(const StepLaw& step, std::uint64_t steps, Stream& s);

std::string renewal_csv(const RenewalTable& table);
/// Parses a table written by renewal_csv; lattice tables need the span.
RenewalTable parse_renewal_csv(const std::string& text,
                               std::optional<double> lattice_span = std::nullopt);

/// The renewal function a boundary law's walk uses: exact for the lattice
/// law, otherwise the given table rescaled from a unit-variance estimate.
RHandle renewal_for(const OffspringLaw& law, std::shared_ptr<const RenewalTable> unit_table,
                    bool linear_tail);

} // namespace brw
