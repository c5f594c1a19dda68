#include "brw/walk.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "brw/csv.hpp"
#include "brw/errors.hpp"
#include "brw/parallel.hpp"
#include "lattice_sampler.hpp"

namespace brw {

// ---------------------------------------------------------------------------
// StepLaw

StepLaw StepLaw::gaussian(double sd)
{
    if (!(sd >= 0.0) || !std::isfinite(sd)) {
        throw PreconditionError("Gaussian step needs a finite sd >= 0");
    }
    StepLaw s;
    s.kind_ = Kind::Gaussian;
    s.variance_ = sd * sd;
    return s;
}

StepLaw StepLaw::discrete(std::vector<double> values, std::vector<double> probs,
                          std::optional<double> lattice_span)
{
    if (values.empty() || values.size() != probs.size()) {
        throw PreconditionError("discrete step law needs matching values and probabilities");
    }
    std::map<double, double> merged;
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = values[i];
        if (lattice_span) {
            v = std::round(v / *lattice_span) * *lattice_span;
            if (std::abs(values[i] - v) > 1e-9 * std::max(1.0, std::abs(v))) {
                throw PreconditionError("step value off the declared lattice");
            }
        }
        if (probs[i] > 0.0) {
            merged[v] += probs[i];
        }
    }
    StepLaw s;
    s.kind_ = Kind::Discrete;
    s.span_ = lattice_span;
    double total = 0.0;
    for (const auto& [v, p] : merged) {
        total += p;
    }
    double acc = 0.0;
    CompensatedSum m1, m2;
    for (const auto& [v, p] : merged) {
        s.values_.push_back(v);
        s.probs_.push_back(p / total);
        acc += p / total;
        s.cdf_.push_back(acc);
        m1 += v * p / total;
        m2 += v * v * p / total;
    }
    s.cdf_.back() = 1.0;
    s.mean_ = m1.value();
    s.variance_ = std::max(0.0, m2.value() - s.mean_ * s.mean_);
    return s;
}

StepLaw StepLaw::resampled(const OffspringLaw& law, double y_max)
{
    if (!law.finite_support() || !std::isfinite(y_max) || !(y_max > 0.0)) {
        throw EnvelopeMissing("resampled step law needs a finite envelope for Y; " +
                              law.describe() + " has none");
    }
    StepLaw exact = derive_step_law(law, StepMode::Analytic);
    exact.kind_ = Kind::Resampled;
    exact.law_ = std::make_shared<const OffspringLaw>(law);
    exact.y_max_ = y_max;
    return exact;
}

double StepLaw::sample(Stream& s) const
{
    switch (kind_) {
    case Kind::Gaussian:
        return sd() * s.normal();
    case Kind::Discrete: {
        const double u = s.uniform();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return values_[static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1))];
    }
    case Kind::Resampled: {
        std::vector<double> kids;
        for (;;) {
            law_->sample(s, kids);
            const YZ yz = eval_yz(kids);
            if (yz.y <= 0.0 || s.uniform() * y_max_ > yz.y) {
                continue;
            }
            double target = s.uniform() * yz.y;
            for (double v : kids) {
                target -= std::exp(-v);
                if (target <= 0.0) {
                    return v;
                }
            }
            return kids.back();
        }
    }
    }
    return 0.0;
}

std::vector<std::int64_t> StepLaw::lattice_steps() const
{
    if (!span_) {
        throw PreconditionError("step law has no lattice span");
    }
    std::vector<std::int64_t> out;
    for (double v : values_) {
        out.push_back(static_cast<std::int64_t>(std::llround(v / *span_)));
    }
    return out;
}

double StepLaw::upper_quantile(double tail) const
{
    if (kind_ == Kind::Gaussian) {
        if (variance_ == 0.0) {
            return 0.0;
        }
        boost::math::normal_distribution<double> n(0.0, sd());
        return boost::math::quantile(boost::math::complement(n, tail));
    }
    return values_.back();
}

StepLaw derive_step_law(const OffspringLaw& law, StepMode mode)
{
    if (mode == StepMode::Resampled) {
        if (!law.finite_support()) {
            throw EnvelopeMissing(law.describe() +
                                  " has no finite rejection envelope for Y = sum e^-V");
        }
        double y_max = 0.0;
        for (const auto& a : law.atoms()) {
            y_max = std::max(y_max, eval_yz(a.displacements).y);
        }
        return StepLaw::resampled(law, y_max);
    }
    switch (law.family()) {
    case Family::BinaryGaussian:
    case Family::HeavyCount:
        return StepLaw::gaussian(std::sqrt(law.sigma2()));
    case Family::LatticeBinary:
    case Family::UserTable: {
        // P(S_1 in dx) = e^{-x} E[sum_u delta_{V(u)}(dx)]
        std::vector<double> values, probs;
        for (const auto& a : law.atoms()) {
            for (double d : a.displacements) {
                values.push_back(d);
                probs.push_back(a.probability * std::exp(-d));
            }
        }
        return StepLaw::discrete(std::move(values), std::move(probs), law.lattice_span());
    }
    }
    throw PreconditionError("unknown family");
}

// ---------------------------------------------------------------------------
// Many-to-one

namespace {

constexpr std::uint64_t kReplicaBlock = 1024;

struct BlockMoments {
    Moments lhs;
    Moments rhs;
};

} // namespace

ManyToOneResult verify_many_to_one(const OffspringLaw& law, const PathFunctional& g, int n,
                                   std::uint64_t replicas, std::uint64_t seed, double start,
                                   unsigned workers, std::uint64_t cap)
{
    if (n < 0) {
        throw PreconditionError("depth must be >= 0");
    }
    const StepLaw step = derive_step_law(law);
    const std::uint64_t blocks = (replicas + kReplicaBlock - 1) / kReplicaBlock;
    std::vector<BlockMoments> parts(blocks);
    parallel_for(blocks, workers, [&](std::size_t b) {
        Stream fs = make_stream(seed, "many_to_one.forest", b);
        Stream ws = make_stream(seed, "many_to_one.walk", b);
        const std::uint64_t lo = b * kReplicaBlock;
        const std::uint64_t hi = std::min(replicas, lo + kReplicaBlock);
        std::vector<std::vector<double>> paths, next;
        std::vector<double> kids, walk(static_cast<std::size_t>(n));
        for (std::uint64_t r = lo; r < hi; ++r) {
            paths.assign(1, {});
            for (int d = 0; d < n; ++d) {
                next.clear();
                for (const auto& p : paths) {
                    const double here = p.empty() ? start : p.back();
                    law.sample(fs, kids);
                    for (double k : kids) {
                        auto child = p;
                        child.push_back(here + k);
                        next.push_back(std::move(child));
                    }
                }
                if (next.size() > cap) {
                    throw PopulationCapExceeded(d, next.size(), cap);
                }
                paths.swap(next);
            }
            CompensatedSum sum;
            for (const auto& p : paths) {
                sum += g(p);
            }
            parts[b].lhs.add(sum.value());

            double s = start;
            for (int k = 0; k < n; ++k) {
                s += step.sample(ws);
                walk[static_cast<std::size_t>(k)] = s;
            }
            parts[b].rhs.add(std::exp(s - start) * g(walk));
        }
    });
    Moments lhs, rhs;
    for (const auto& p : parts) {
        lhs.merge(p.lhs);
        rhs.merge(p.rhs);
    }
    return {lhs.estimate(), rhs.estimate()};
}

// ---------------------------------------------------------------------------
// ExactLatticeR

double ExactLatticeR::operator()(double x) const
{
    if (x < 0.0) {
        return 0.0;
    }
    const double t = x / h_;
    const double k = std::round(t);
    if (std::abs(t - k) < 1e-9) {
        return k == 0.0 ? 1.0 : 2.0 * k;
    }
    return 2.0 * std::ceil(t);
}

double ExactLatticeR::coverage() const
{
    return std::numeric_limits<double>::infinity();
}

std::string ExactLatticeR::describe() const
{
    return "exact lattice R with span " + fmt17(h_);
}

// ---------------------------------------------------------------------------
// Renewal estimation

namespace {

/// Per-side accumulator of cumulative visit counts. For cell i >= 1 the
/// per-excursion value is C(i) = #{visits with bucket <= i}; excursions whose
/// deepest bucket is m add their total to every i >= m through the tail
/// arrays, so the cost per excursion is O(m).
struct SideAcc {
    std::vector<double> sum, sq, tail_sum, tail_sq;
    std::vector<std::uint64_t> visits;
    double atom_sum = 0.0;
    double atom_sq = 0.0;
    std::uint64_t overruns = 0;

    explicit SideAcc(std::size_t cells)
        : sum(cells + 1), sq(cells + 1), tail_sum(cells + 1), tail_sq(cells + 1),
          visits(cells + 1)
    {}

    void merge(const SideAcc& o)
    {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += o.sum[i];
            sq[i] += o.sq[i];
            tail_sum[i] += o.tail_sum[i];
            tail_sq[i] += o.tail_sq[i];
            visits[i] += o.visits[i];
        }
        atom_sum += o.atom_sum;
        atom_sq += o.atom_sq;
        overruns += o.overruns;
    }
};

/// Histogram of one excursion, flushed into a SideAcc.
class ExcursionHist {
public:
    explicit ExcursionHist(std::size_t cells) : hist_(cells + 2, 0), cells_(cells) {}

    void record(std::size_t bucket)
    {
        if (bucket <= cells_) {
            ++hist_[bucket];
            max_ = std::max(max_, bucket);
        }
    }
    void record_atom() { ++atom_; }

    void flush(SideAcc& acc)
    {
        double c = 0.0;
        for (std::size_t i = 1; i < max_; ++i) {
            c += static_cast<double>(hist_[i]);
            acc.visits[i] += hist_[i];
            acc.sum[i] += c;
            acc.sq[i] += c * c;
            hist_[i] = 0;
        }
        if (max_ >= 1) {
            c += static_cast<double>(hist_[max_]);
            acc.visits[max_] += hist_[max_];
            hist_[max_] = 0;
            acc.tail_sum[max_] += c;
            acc.tail_sq[max_] += c * c;
        }
        const auto a = static_cast<double>(atom_);
        acc.atom_sum += a;
        acc.atom_sq += a * a;
        max_ = 0;
        atom_ = 0;
    }

private:
    std::vector<std::uint64_t> hist_;
    std::size_t cells_;
    std::size_t max_ = 0;
    std::uint64_t atom_ = 0;
};

struct BlockResult {
    SideAcc minus;
    SideAcc plus;
    explicit BlockResult(std::size_t cells) : minus(cells), plus(cells) {}
};

// With `skip_free` (a +-1 walk in lattice units) a walk outside the grid is
// moved straight back to the nearest level inside it: by recurrence it gets
// there almost surely and records nothing on the way.
template <class Position, class Sampler, class Bucket>
void run_excursions(std::uint64_t count, std::uint64_t budget, Sampler& draw, Bucket bucket,
                    std::size_t cells, bool skip_free, Stream& sd, Stream& sa,
                    ExcursionHist& hist, BlockResult& out)
{
    // Weak descending side: sum_{j < tau} f(-S_j), tau = first entry to (0, inf).
    for (std::uint64_t e = 0; e < count; ++e) {
        Position s = 0;
        std::uint64_t steps = 0;
        for (;;) {
            if (s == 0) {
                hist.record_atom();
            }
            const std::size_t cell = bucket(-s);
            hist.record(cell);
            if (skip_free && cell > cells) {
                s += 1;
                continue;
            }
            if (steps == budget) {
                ++out.minus.overruns;
                break;
            }
            s += draw(sd);
            ++steps;
            if (s > 0) {
                break;
            }
        }
        hist.flush(out.minus);
    }
    // Ascending side: sum_{n < tau_-} f(S_n), tau_- = first entry to (-inf, 0].
    for (std::uint64_t e = 0; e < count; ++e) {
        Position s = 0;
        std::uint64_t steps = 0;
        for (;;) {
            if (s == 0) {
                hist.record_atom();
            }
            const std::size_t cell = bucket(s);
            hist.record(cell);
            if (skip_free && cell > cells) {
                s -= 1;
                continue;
            }
            if (steps == budget) {
                ++out.plus.overruns;
                break;
            }
            s += draw(sa);
            ++steps;
            if (s <= 0) {
                break;
            }
        }
        hist.flush(out.plus);
    }
}

void finalize_side(const SideAcc& acc, std::uint64_t n, std::vector<double>& mean,
                   std::vector<double>& se)
{
    const auto nn = static_cast<double>(n);
    const std::size_t cells = acc.sum.size() - 1;
    mean.assign(cells + 1, 0.0);
    se.assign(cells + 1, 0.0);
    const auto finish = [&](std::size_t i, double s, double q) {
        mean[i] = s / nn;
        const double var = n > 1 ? std::max(0.0, (q - nn * mean[i] * mean[i]) / (nn - 1.0)) : 0.0;
        se[i] = std::sqrt(var / nn);
    };
    finish(0, acc.atom_sum, acc.atom_sq);
    double ts = 0.0;
    double tq = 0.0;
    for (std::size_t i = 1; i <= cells; ++i) {
        ts += acc.tail_sum[i];
        tq += acc.tail_sq[i];
        finish(i, acc.sum[i] + ts, acc.sq[i] + tq);
    }
}

} // namespace

RenewalTable estimate_renewal(const StepLaw& step, const RenewalOptions& options)
{
    if (std::abs(step.mean()) > 1e-9 * std::max(1.0, step.sd()) || !(step.variance() > 0.0)) {
        throw PreconditionError("renewal estimation needs a centered step law with positive "
                                "variance");
    }
    if (options.excursions == 0 || options.block == 0) {
        throw PreconditionError("excursion count and block size must be >= 1");
    }
    const auto span = step.lattice_span();
    double width = options.cell_width;
    if (width <= 0.0) {
        width = span ? *span / 4.0 : step.sd() / 10.0;
    }
    const double grid_max = options.grid_max > 0.0 ? options.grid_max : 100.0 * step.sd();
    const auto cells = static_cast<std::size_t>(std::ceil(grid_max / width - 1e-9));

    std::int64_t per_span = 0;
    if (span) {
        const double r = *span / width;
        per_span = std::llround(r);
        if (per_span < 1 || std::abs(r - static_cast<double>(per_span)) > 1e-9) {
            throw PreconditionError("lattice cell width must divide the lattice span");
        }
    }

    const std::uint64_t blocks = (options.excursions + options.block - 1) / options.block;
    std::vector<BlockResult> parts(blocks, BlockResult(cells));
    parallel_for(blocks, options.workers, [&](std::size_t b) {
        Stream sd = make_stream(options.seed, "renewal.descending", b);
        Stream sa = make_stream(options.seed, "renewal.ascending", b);
        const std::uint64_t lo = b * options.block;
        const std::uint64_t count = std::min(options.excursions, lo + options.block) - lo;
        ExcursionHist hist(cells);
        if (span) {
            detail::LatticeSampler draw(step);
            const auto bucket = [per_span](std::int64_t level) {
                return static_cast<std::size_t>(level * per_span + 1);
            };
            run_excursions<std::int64_t>(count, options.budget, draw, bucket, cells,
                                         draw.simple(), sd, sa, hist, parts[b]);
        } else {
            const double inv = 1.0 / width;
            const auto limit = static_cast<double>(cells + 1);
            const auto bucket = [inv, limit](double level) {
                const double k = std::floor(level * inv) + 1.0;
                return static_cast<std::size_t>(std::min(k, limit));
            };
            auto draw = [&step](Stream& s) { return step.sample(s); };
            run_excursions<double>(count, options.budget, draw, bucket, cells, false, sd, sa,
                                   hist, parts[b]);
        }
    });
    BlockResult total(cells);
    for (const auto& p : parts) {
        total.minus.merge(p.minus);
        total.plus.merge(p.plus);
    }

    RenewalTable t;
    t.cell_width = width;
    t.lattice_span = span;
    t.excursions = options.excursions;
    t.overruns = total.minus.overruns + total.plus.overruns;
    t.partial = t.overruns > 0;
    t.x.resize(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) {
        t.x[i] = static_cast<double>(i) * width;
    }
    std::vector<double> se_minus;
    finalize_side(total.minus, options.excursions, t.u_minus, se_minus);
    finalize_side(total.plus, options.excursions, t.u, t.se_u);
    t.r = t.u_minus;
    t.se_r = se_minus;
    t.r[0] = 1.0;
    t.se_r[0] = 0.0;
    t.n_samples = total.minus.visits;
    t.n_samples[0] = static_cast<std::uint64_t>(total.minus.atom_sum);
    return t;
}

double RenewalTable::envelope_lower() const
{
    double c = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) {
        c = std::min(c, r[i] / (1.0 + x[i]));
    }
    return c;
}

double RenewalTable::envelope_upper() const
{
    double c = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        // Step interpolation holds r[i] on (x_{i-1}, x_i].
        const double left = lattice_span && i > 0 ? x[i - 1] : x[i];
        c = std::max(c, r[i] / (1.0 + left));
    }
    return c;
}

RenewalTable RenewalTable::rescaled(double factor) const
{
    RenewalTable t = *this;
    t.cell_width *= factor;
    for (double& v : t.x) {
        v *= factor;
    }
    if (t.lattice_span) {
        *t.lattice_span *= factor;
    }
    return t;
}

// ---------------------------------------------------------------------------
// TabulatedR

TabulatedR::TabulatedR(std::shared_ptr<const RenewalTable> table, bool linear_tail)
    : table_(std::move(table)), linear_tail_(linear_tail)
{
    if (!table_ || table_->x.size() < 3) {
        throw PreconditionError("renewal table needs at least three grid points");
    }
    const auto& t = *table_;
    const std::size_t k = t.x.size() - 1;
    // least-squares slope over the top half of the grid
    const std::size_t first = k / 2;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = first; i <= k; ++i) {
        mx += t.x[i];
        my += t.r[i];
    }
    const auto cnt = static_cast<double>(k - first + 1);
    mx /= cnt;
    my /= cnt;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = first; i <= k; ++i) {
        sxy += (t.x[i] - mx) * (t.r[i] - my);
        sxx += (t.x[i] - mx) * (t.x[i] - mx);
    }
    slope_ = sxx > 0.0 ? sxy / sxx : 0.0;
    c1_ = t.envelope_lower();
    c2_ = t.envelope_upper();
    if (linear_tail_) {
        c1_ = std::min(c1_, slope_);
        c2_ = std::max(c2_, slope_);
    }
}

double TabulatedR::interpolate(const std::vector<double>& col, double x) const
{
    const auto& t = *table_;
    const std::size_t k = t.x.size() - 1;
    const double pos = x / t.cell_width;
    if (t.lattice_span) {
        const double idx = std::ceil(pos - 1e-9);
        if (idx <= static_cast<double>(k)) {
            return col[static_cast<std::size_t>(std::max(idx, 0.0))];
        }
    } else {
        if (pos <= static_cast<double>(k)) {
            const auto i = static_cast<std::size_t>(std::floor(pos));
            if (i >= k) {
                return col[k];
            }
            const double f = pos - static_cast<double>(i);
            return col[i] + f * (col[i + 1] - col[i]);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double TabulatedR::operator()(double x) const
{
    if (x < 0.0) {
        return 0.0;
    }
    if (x == 0.0) {
        return 1.0;
    }
    const double v = interpolate(table_->r, x);
    if (!std::isnan(v)) {
        return v;
    }
    if (!linear_tail_) {
        throw RIncompatible(x, coverage());
    }
    return table_->r.back() + slope_ * (x - table_->x.back());
}

double TabulatedR::se(double x) const
{
    if (x <= 0.0) {
        return 0.0;
    }
    const double v = interpolate(table_->se_r, x);
    if (!std::isnan(v)) {
        return v;
    }
    return table_->se_r.back() * x / table_->x.back();
}

double TabulatedR::coverage() const
{
    return linear_tail_ ? std::numeric_limits<double>::infinity() : table_->x.back();
}

std::string TabulatedR::describe() const
{
    return "tabulated R to x=" + fmt17(table_->x.back()) + " from " +
           std::to_string(table_->excursions) + " excursions" +
           (linear_tail_ ? " with linear tail" : "");
}

C0Estimate estimate_c0(const RenewalTable& table, double step_sd)
{
    if (!(step_sd > 0.0)) {
        throw PreconditionError("c0 needs a step law with positive variance");
    }
    if (table.x_max() < 50.0 * step_sd) {
        throw PreconditionError("table must extend to at least 50 step sds");
    }
    const TabulatedR r(std::make_shared<const RenewalTable>(table));
    const double top = table.x_max();
    const double low = top / 10.0;
    const double ratio_top = r(top) / top;
    const double ratio_low = r(low) / low;
    return {r.tail_slope(), std::abs(ratio_top - ratio_low) / ratio_top};
}

// ---------------------------------------------------------------------------
// Harmonicity

HarmonicReport check_harmonic(const StepLaw& step, const RenewalFunction& r,
                              std::span<const double> x_grid, std::uint64_t replicas,
                              std::uint64_t seed, unsigned workers)
{
    const double reach = step.upper_quantile(1e-6);
    for (double x : x_grid) {
        if (x + reach > r.coverage()) {
            throw RIncompatible(x + reach, r.coverage());
        }
    }
    HarmonicReport report;
    report.points.resize(x_grid.size());
    parallel_for(x_grid.size(), workers, [&](std::size_t i) {
        Stream s = make_stream(seed, "harmonic", i);
        const double x = x_grid[i];
        Moments lhs;
        CompensatedSum se_acc;
        for (std::uint64_t k = 0; k < replicas; ++k) {
            const double y = x + step.sample(s);
            if (y > 0.0) {
                lhs.add(r(y));
                se_acc += r.se(y);
            } else {
                lhs.add(0.0);
            }
        }
        HarmonicPoint& p = report.points[i];
        p.x = x;
        p.lhs = lhs.estimate();
        p.rhs = r(x);
        const double table_se = se_acc.value() / static_cast<double>(std::max<std::uint64_t>(replicas, 1));
        p.se = std::sqrt(p.lhs.se * p.lhs.se + r.se(x) * r.se(x) + table_se * table_se);
        const double d = std::abs(p.lhs.mean - p.rhs);
        p.z = p.se > 0.0 ? d / p.se : (d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    });
    for (const auto& p : report.points) {
        report.max_relative_deviation =
            std::max(report.max_relative_deviation, std::abs(p.lhs.mean - p.rhs) / p.rhs);
        report.max_z = std::max(report.max_z, p.z);
    }
    return report;
}

LadderDecomposition ladder_decomposition(const StepLaw& step, std::uint64_t steps, Stream& s)
{
    LadderDecomposition out;
    const auto span = step.lattice_span();
    std::optional<detail::LatticeSampler> lattice;
    if (span) {
        lattice.emplace(step);
    }
    // lattice walks are tracked in integer units so records are exact
    std::int64_t k = 0;
    double pos = 0.0;
    double hi = 0.0;
    double lo = 0.0;
    for (std::uint64_t n = 1; n <= steps; ++n) {
        if (lattice) {
            k += (*lattice)(s);
            pos = static_cast<double>(k) * *span;
        } else {
            pos += step.sample(s);
        }
        if (pos > hi) {
            hi = pos;
            out.ascending_epochs.push_back(n);
            out.ascending_heights.push_back(pos);
        }
        if (pos <= lo) {
            lo = pos;
            out.descending_epochs.push_back(n);
            out.descending_heights.push_back(-pos);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string renewal_csv(const RenewalTable& t)
{
    CsvWriter w{"x", "U", "Uminus", "R", "se_R", "n_samples"};
    for (std::size_t i = 0; i < t.x.size(); ++i) {
        w.field(t.x[i]).field(t.u[i]).field(t.u_minus[i]).field(t.r[i]).field(t.se_r[i]);
        w.field(t.n_samples[i]);
        w.end_row();
    }
    return w.str();
}

RenewalTable parse_renewal_csv(const std::string& text, std::optional<double> lattice_span)
{
    const auto rows = read_csv_rows(text);
    if (rows.size() < 4) {
        throw ParseError("renewal table", "needs a header and at least three rows");
    }
    const std::vector<std::string> header{"x", "U", "Uminus", "R", "se_R", "n_samples"};
    if (rows[0] != header) {
        throw ParseError("renewal table line 1", "expected header x,U,Uminus,R,se_R,n_samples");
    }
    RenewalTable t;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != header.size()) {
            throw ParseError("renewal table line " + std::to_string(i + 1),
                             "expected 6 fields");
        }
        try {
            t.x.push_back(std::stod(r[0]));
            t.u.push_back(std::stod(r[1]));
            t.u_minus.push_back(std::stod(r[2]));
            t.r.push_back(std::stod(r[3]));
            t.se_r.push_back(std::stod(r[4]));
            t.n_samples.push_back(std::stoull(r[5]));
        } catch (const std::exception&) {
            throw ParseError("renewal table line " + std::to_string(i + 1), "not a number");
        }
    }
    t.cell_width = t.x[1] - t.x[0];
    for (std::size_t i = 1; i < t.x.size(); ++i) {
        if (!(t.x[i] > t.x[i - 1])) {
            throw ParseError("renewal table line " + std::to_string(i + 2),
                             "x must be strictly increasing");
        }
        if (t.r[i] < t.r[i - 1] && i > 1) {
            throw ParseError("renewal table line " + std::to_string(i + 2),
                             "R must be nondecreasing");
        }
    }
    t.se_u.assign(t.x.size(), 0.0);
    t.lattice_span = lattice_span;
    return t;
}

RHandle renewal_for(const OffspringLaw& law, std::shared_ptr<const RenewalTable> table,
                    bool linear_tail)
{
    if (law.family() == Family::LatticeBinary) {
        return std::make_shared<ExactLatticeR>(*law.lattice_span());
    }
    if (!table) {
        throw PreconditionError("no renewal table supplied for " + law.describe());
    }
    if (law.family() == Family::UserTable) {
        return std::make_shared<TabulatedR>(std::move(table), linear_tail);
    }
    const double sigma = std::sqrt(law.sigma2());
    return std::make_shared<TabulatedR>(
        std::make_shared<const RenewalTable>(table->rescaled(sigma)), linear_tail);
}

} // namespace brw
