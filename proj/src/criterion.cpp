#include "brw/criterion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "brw/csv.hpp"
#include "brw/errors.hpp"
#include "brw/parallel.hpp"

namespace brw {

namespace {

/// Beyond this log-count the sum over children is replaced by its mean.
constexpr double kLogDeterministic = 36.0;

double normal_pdf(double x, double mu, double sd)
{
    const double z = (x - mu) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// An offspring draw whose count may be importance sampled. When the count
/// is too large to materialize only (log_n, weight) are meaningful.
struct CountedDraw {
    bool materialized = true;
    double n = 0.0;
    double log_n = 0.0;
    double weight = 1.0;
    /// n * weight without overflow.
    double n_weight() const
    {
        return materialized || log_n < kLogDeterministic ? n * weight : n_weight_big;
    }
    double n_weight_big = 0.0;
};

CountedDraw draw_children(const OffspringLaw& law, const XSamplerOptions& opt, Stream& s,
                          std::vector<double>& kids)
{
    CountedDraw d;
    if (law.family() != Family::HeavyCount) {
        law.sample(s, kids);
        d.n = static_cast<double>(kids.size());
        d.log_n = d.n > 0.0 ? std::log(d.n) : -std::numeric_limits<double>::infinity();
        return d;
    }
    const HeavyCountTable& counts = *law.count_table();
    const double m = counts.mean();
    if (opt.importance && s.uniform() < 0.5) {
        d.log_n = counts.sample_size_biased_log(s);
    } else {
        d.log_n = std::log(counts.sample(s));
    }
    if (opt.importance) {
        // P(n) / (P(n)/2 + n P(n) / (2 m))
        d.weight = 2.0 / (1.0 + std::exp(d.log_n - std::log(m)));
        d.n_weight_big = 2.0 * m / (m * std::exp(-d.log_n) + 1.0);
    }
    d.n = d.log_n < kLogDeterministic ? std::round(std::exp(d.log_n)) : std::exp(d.log_n);
    kids.clear();
    if (d.n <= opt.clt_threshold) {
        const auto [mu, sd] = law.gaussian_displacement();
        const auto count = static_cast<std::size_t>(d.n);
        for (std::size_t i = 0; i < count; ++i) {
            kids.push_back(mu + sd * s.normal());
        }
    } else {
        d.materialized = false;
    }
    return d;
}

/// E[f(D)] for D ~ N(mu, sd) restricted to (lo, inf).
template <class F>
double gaussian_expectation(F f, double mu, double sd, double lo)
{
    const double a = std::max(lo, mu - 12.0 * sd);
    const double b = mu + 12.0 * sd;
    if (!(b > a)) {
        return 0.0;
    }
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double x) { return f(x) * normal_pdf(x, mu, sd); }, a, b, 3, 1e-8);
}

/// Moments of e^{-D} and D_+ e^{-D} for one child D ~ N(mu, sd).
struct ChildMoments {
    double y1, z1;      // E[e^-D], E[D+ e^-D]
    double yy, zz, yz;  // second moments
};

/// E[D'_+^k] for D' ~ N(mu, sd), k = 0, 1, 2.
double positive_part_moment(int k, double mu, double sd)
{
    const double a = mu / sd;
    const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
    const double cdf = normal_cdf(a);
    switch (k) {
    case 0: return cdf;
    case 1: return mu * cdf + sd * phi;
    default: return (mu * mu + sd * sd) * cdf + mu * sd * phi;
    }
}

ChildMoments child_moments(double mu, double sd)
{
    // E[f(D) e^{-kD}] = e^{-k mu + k^2 sd^2 / 2} E[f(D_k)], D_k ~ N(mu - k sd^2, sd)
    const double s2 = sd * sd;
    const double t1 = std::exp(-mu + s2 / 2.0);
    const double t2 = std::exp(-2.0 * mu + 2.0 * s2);
    ChildMoments c;
    c.y1 = t1;
    c.z1 = t1 * positive_part_moment(1, mu - s2, sd);
    c.yy = t2;
    c.zz = t2 * positive_part_moment(2, mu - 2.0 * s2, sd);
    c.yz = t2 * positive_part_moment(1, mu - 2.0 * s2, sd);
    return c;
}

} // namespace

double eval_X(std::span<const double> displacements, double zeta, const RenewalFunction& r)
{
    if (!(zeta > 0.0)) {
        throw PreconditionError("X needs zeta > 0");
    }
    CompensatedSum s;
    for (double d : displacements) {
        if (d > -zeta) {
            s += r(zeta + d) * std::exp(-d);
        }
    }
    return s.value() / r(zeta);
}

double eval_X(const OffspringLaw& law, double zeta, const RenewalFunction& r, Stream& s)
{
    return eval_X(law.sample(s), zeta, r);
}

XSampler::XSampler(const OffspringLaw& law, const RenewalFunction& r, double zeta,
                   const XSamplerOptions& options)
    : law_(law), r_(r), zeta_(zeta), r_zeta_(r(zeta)), options_(options)
{
    if (!(zeta > 0.0)) {
        throw PreconditionError("X needs zeta > 0");
    }
}

void XSampler::ensure_moments()
{
    if (have_moments_) {
        return;
    }
    const auto [mu, sd] = law_.gaussian_displacement();
    const auto w = [&](double x) { return r_(zeta_ + x) * std::exp(-x); };
    mean_w_ = gaussian_expectation(w, mu, sd, -zeta_);
    const double second =
        gaussian_expectation([&](double x) { return w(x) * w(x); }, mu, sd, -zeta_);
    sd_w_ = std::sqrt(std::max(second - mean_w_ * mean_w_, 0.0));
    have_moments_ = true;
}

WeightedX XSampler::draw(Stream& s)
{
    const CountedDraw d = draw_children(law_, options_, s, kids_);
    WeightedX out;
    out.weight = d.weight;
    if (d.materialized) {
        const double x = d.n > 0.0 ? eval_X(kids_, zeta_, r_) : 0.0;
        out.log_x = x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
        out.x_weighted = x * d.weight;
        return out;
    }
    ensure_moments();
    if (d.log_n >= kLogDeterministic) {
        out.log_x = d.log_n + std::log(mean_w_) - std::log(r_zeta_);
        out.x_weighted = d.n_weight() * mean_w_ / r_zeta_;
        return out;
    }
    const double sum = d.n * mean_w_ + std::sqrt(d.n) * sd_w_ * s.normal();
    const double x = std::max(sum, 0.0) / r_zeta_;
    out.log_x = x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
    out.x_weighted = x * d.weight;
    return out;
}

// ---------------------------------------------------------------------------
// Criterion series

std::string tail_series_name(double y)
{
    std::string v = fmt17(y);
    return "tail_y" + v;
}

std::string criterion_verdict(const CriterionReport& report)
{
    for (const auto& s : report.series) {
        if (s.name != "truncated" && s.series_class == SeriesClass::Divergent) {
            return "violating";
        }
    }
    if (report.find("truncated").series_class == SeriesClass::Plateau) {
        return "satisfying";
    }
    return "undetermined";
}

const SeriesTrack& CriterionReport::find(const std::string& name) const
{
    for (const auto& s : series) {
        if (s.name == name) {
            return s;
        }
    }
    throw PreconditionError("no series named " + name);
}

CriterionReport run_criterion_series(const OffspringLaw& law, const RenewalFunction& r,
                                     const CriterionOptions& options)
{
    if (options.horizon < 2 || options.paths < 1 || options.draws < 1) {
        throw PreconditionError("criterion series need horizon >= 2, paths >= 1, draws >= 1");
    }
    for (double y : options.y_values) {
        if (!(y > 0.0)) {
            throw PreconditionError("criterion thresholds y must be > 0");
        }
    }
    const std::size_t n_series = 1 + options.y_values.size();
    const std::size_t horizon = options.horizon;
    const StepLaw step = derive_step_law(law);
    const auto batch = sample_conditioned_paths(step, horizon, options.paths, options.seed,
                                                options.workers);
    std::vector<double> log_y;
    for (double y : options.y_values) {
        log_y.push_back(std::log(y));
    }
    // summands[p][s * horizon + (n - 1)]
    std::vector<std::vector<double>> summands(options.paths);
    parallel_for(options.paths, options.workers, [&](std::size_t p) {
        Stream xs = make_stream(options.seed, "criterion.x", p);
        auto& out = summands[p];
        out.assign(n_series * horizon, 0.0);
        std::vector<double> acc(n_series);
        const auto& zeta = batch.paths[p].values;
        for (std::size_t n = 1; n <= horizon; ++n) {
            XSampler sampler(law, r, zeta[n], options.sampler);
            const double log_c = std::log(r(zeta[n])) - zeta[n];
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::uint64_t k = 0; k < options.draws; ++k) {
                const WeightedX x = sampler.draw(xs);
                if (x.x_weighted == 0.0) {
                    continue;
                }
                const double log_cx = log_c + x.log_x;
                acc[0] += x.x_weighted * std::min(std::exp(log_cx), 1.0);
                for (std::size_t j = 0; j < log_y.size(); ++j) {
                    if (log_cx >= log_y[j]) {
                        acc[1 + j] += x.x_weighted;
                    }
                }
            }
            for (std::size_t sidx = 0; sidx < n_series; ++sidx) {
                out[sidx * horizon + n - 1] = acc[sidx] / static_cast<double>(options.draws);
            }
        }
    });

    CriterionReport report;
    report.law = law.describe();
    for (std::size_t sidx = 0; sidx < n_series; ++sidx) {
        SeriesTrack t;
        t.name = sidx == 0 ? "truncated" : tail_series_name(options.y_values[sidx - 1]);
        t.summand.assign(horizon, 0.0);
        std::vector<Moments> partial(horizon);
        std::vector<double> own(horizon + 1);
        for (std::size_t p = 0; p < options.paths; ++p) {
            own[0] = 0.0;
            for (std::size_t n = 1; n <= horizon; ++n) {
                const double v = summands[p][sidx * horizon + n - 1];
                t.summand[n - 1] += v / static_cast<double>(options.paths);
                own[n] = own[n - 1] + v;
                partial[n - 1].add(own[n]);
            }
            t.path_growth.push_back(last_half_growth(own));
        }
        std::vector<double> mean_partial{0.0};
        for (const auto& m : partial) {
            t.partial_sum.push_back(m.mean());
            t.se.push_back(m.se());
            mean_partial.push_back(m.mean());
        }
        t.growth = last_half_growth(mean_partial);
        t.series_class = classify_growth(t.growth, options.thresholds);
        report.series.push_back(std::move(t));
    }
    return report;
}

std::string criterion_csv(const std::vector<CriterionReport>& reports)
{
    CsvWriter w{"law", "series", "n", "summand", "partial_sum", "se"};
    for (const auto& rep : reports) {
        for (const auto& s : rep.series) {
            for (std::size_t i = 0; i < s.summand.size(); ++i) {
                w.field(rep.law).field(s.name).field(static_cast<std::uint64_t>(i + 1));
                w.field(s.summand[i]).field(s.partial_sum[i]).field(s.se[i]);
                w.end_row();
            }
        }
    }
    return w.str();
}

// ---------------------------------------------------------------------------
// Moments and tail functionals

namespace {

/// A weighted (Y, Z) draw; y_weighted = Y * weight.
struct WeightedYZ {
    double log_y = 0.0;
    double log_z = 0.0;
    double y = 0.0;
    double z = 0.0;
    double y_weighted = 0.0;
    double z_weighted = 0.0;
    double weight = 1.0;
};

class YZSampler {
public:
    YZSampler(const OffspringLaw& law, const XSamplerOptions& opt) : law_(law), opt_(opt)
    {
        if (law.family() == Family::HeavyCount) {
            const auto [mu, sd] = law.gaussian_displacement();
            c_ = child_moments(mu, sd);
        }
    }

    WeightedYZ draw(Stream& s)
    {
        const CountedDraw d = draw_children(law_, opt_, s, kids_);
        WeightedYZ out;
        out.weight = d.weight;
        if (!d.materialized && d.log_n >= kLogDeterministic) {
            out.log_y = d.log_n + std::log(c_.y1);
            out.log_z = d.log_n + std::log(c_.z1);
            out.y = std::exp(out.log_y);
            out.z = std::exp(out.log_z);
            out.y_weighted = d.n_weight() * c_.y1;
            out.z_weighted = d.n_weight() * c_.z1;
            return out;
        }
        if (d.materialized) {
            const YZ yz = eval_yz(kids_);
            out.y = yz.y;
            out.z = yz.z;
        } else {
            // bivariate normal approximation of the sum over n children
            const double vy = c_.yy - c_.y1 * c_.y1;
            const double vz = c_.zz - c_.z1 * c_.z1;
            const double cyz = c_.yz - c_.y1 * c_.z1;
            const double g1 = s.normal();
            const double g2 = s.normal();
            const double ly = std::sqrt(std::max(vy, 0.0));
            const double a = ly > 0.0 ? cyz / ly : 0.0;
            const double b = std::sqrt(std::max(vz - a * a, 0.0));
            const double rn = std::sqrt(d.n);
            out.y = std::max(d.n * c_.y1 + rn * ly * g1, 0.0);
            out.z = std::max(d.n * c_.z1 + rn * (a * g1 + b * g2), 0.0);
        }
        const double ninf = -std::numeric_limits<double>::infinity();
        out.log_y = out.y > 0.0 ? std::log(out.y) : ninf;
        out.log_z = out.z > 0.0 ? std::log(out.z) : ninf;
        out.y_weighted = out.y * d.weight;
        out.z_weighted = out.z * d.weight;
        return out;
    }

private:
    const OffspringLaw& law_;
    XSamplerOptions opt_;
    ChildMoments c_{};
    std::vector<double> kids_;
};

constexpr std::uint64_t kDrawBlock = 16384;

} // namespace

MomentReport estimate_moments(const OffspringLaw& law, const MomentOptions& options)
{
    if (options.caps.empty() || options.draws < 2) {
        throw PreconditionError("moment curves need caps and at least two draws");
    }
    std::vector<double> caps = options.caps;
    std::sort(caps.begin(), caps.end());
    const std::size_t k = caps.size();
    const std::uint64_t blocks = (options.draws + kDrawBlock - 1) / kDrawBlock;
    std::vector<std::vector<Moments>> parts(blocks);
    parallel_for(blocks, options.workers, [&](std::size_t b) {
        Stream s = make_stream(options.seed, "moments", b);
        YZSampler sampler(law, options.sampler);
        auto& acc = parts[b];
        acc.resize(2 * k);
        const std::uint64_t hi = std::min(options.draws, (b + 1) * kDrawBlock);
        for (std::uint64_t i = b * kDrawBlock; i < hi; ++i) {
            const WeightedYZ d = sampler.draw(s);
            // Y (log+ Y)^2 and Z log+ Z, which may overflow for huge draws
            const double ly = std::max(d.log_y, 0.0);
            const double lz = std::max(d.log_z, 0.0);
            const double fy = d.y * ly * ly;
            const double fz = d.z * lz;
            for (std::size_t j = 0; j < k; ++j) {
                acc[j].add(d.weight * std::min(fy, caps[j]));
                acc[k + j].add(d.weight * std::min(fz, caps[j]));
            }
        }
    });
    std::vector<Moments> total(2 * k);
    for (const auto& p : parts) {
        for (std::size_t j = 0; j < 2 * k; ++j) {
            total[j].merge(p[j]);
        }
    }
    MomentReport out;
    out.caps = caps;
    out.draws = options.draws;
    for (std::size_t j = 0; j < k; ++j) {
        out.m_y.push_back(total[j].estimate());
        out.m_z.push_back(total[k + j].estimate());
    }
    if (k >= 2) {
        const double dl = std::log(caps[k - 1]) - std::log(caps[k - 2]);
        out.slope_y = std::max(out.m_y[k - 1].mean - out.m_y[k - 2].mean, 0.0) / dl;
        out.slope_z = std::max(out.m_z[k - 1].mean - out.m_z[k - 2].mean, 0.0) / dl;
    }
    return out;
}

TailFunctionals eval_tail_functionals(const OffspringLaw& law, std::vector<double> z_grid,
                                      double y, const RenewalFunction& r,
                                      const MomentOptions& options)
{
    if (!(y >= 1.0)) {
        throw PreconditionError("tail functionals need y >= 1");
    }
    if (z_grid.empty() || !std::is_sorted(z_grid.begin(), z_grid.end())) {
        throw PreconditionError("z grid must be non-empty and sorted");
    }
    const std::size_t k = z_grid.size();
    const double log_y = std::log(y);
    const std::uint64_t blocks = (options.draws + kDrawBlock - 1) / kDrawBlock;
    std::vector<std::vector<Moments>> parts(blocks);
    parallel_for(blocks, options.workers, [&](std::size_t b) {
        Stream s = make_stream(options.seed, "tail_functionals", b);
        YZSampler sampler(law, options.sampler);
        auto& acc = parts[b];
        acc.resize(2 * k);
        const std::uint64_t hi = std::min(options.draws, (b + 1) * kDrawBlock);
        for (std::uint64_t i = b * kDrawBlock; i < hi; ++i) {
            const WeightedYZ d = sampler.draw(s);
            for (std::size_t j = 0; j < k; ++j) {
                acc[j].add(d.log_y >= z_grid[j] ? d.y_weighted : 0.0);
                acc[k + j].add(d.log_z >= z_grid[j] + log_y ? d.z_weighted : 0.0);
            }
        }
    });
    std::vector<Moments> total(2 * k);
    for (const auto& p : parts) {
        for (std::size_t j = 0; j < 2 * k; ++j) {
            total[j].merge(p[j]);
        }
    }
    TailFunctionals out;
    out.y = y;
    out.z = z_grid;
    for (std::size_t j = 0; j < k; ++j) {
        const double rz = r(std::max(z_grid[j], 0.0));
        out.f1.push_back(total[j].mean());
        out.se_f1.push_back(total[j].se());
        out.f3.push_back(total[k + j].mean() / rz);
        out.se_f3.push_back(total[k + j].se() / rz);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dichotomy

DichotomySide dichotomy_side(const OffspringLaw& law, const RenewalFunction& r,
                             const DichotomyOptions& options)
{
    DichotomySide side;
    side.law = law.describe();
    side.moments = estimate_moments(law, options.moments);
    side.criterion = run_criterion_series(law, r, options.criterion);

    // sum_n F3(zeta_n) along the same conditioned paths
    const StepLaw step = derive_step_law(law);
    const auto batch = sample_conditioned_paths(step, options.criterion.horizon,
                                                options.criterion.paths, options.criterion.seed,
                                                options.criterion.workers);
    double z_top = 1.0;
    for (const auto& p : batch.paths) {
        z_top = std::max(z_top, *std::max_element(p.values.begin(), p.values.end()));
    }
    std::vector<double> z_grid;
    for (double z = 0.0; z <= z_top + 1.0; z += z_top / 200.0) {
        z_grid.push_back(z);
    }
    const TailFunctionals tf =
        eval_tail_functionals(law, z_grid, options.tail_y, r, options.moments);
    // Monte Carlo noise cannot make F3 increase, but guard against rounding.
    std::vector<double> f3 = tf.f3;
    for (std::size_t i = 1; i < f3.size(); ++i) {
        f3[i] = std::min(f3[i], f3[i - 1]);
    }
    side.f3_series = series_diagnostic(MonotoneTable(z_grid, f3), batch.paths,
                                       options.criterion.thresholds);

    SuiteOptions suite;
    suite.generations = options.generations;
    suite.replicas = options.forest_replicas;
    suite.forest.mode = BarrierMode::Kill;
    suite.forest.beta = 0.0;
    suite.forest.cap = options.cap;
    suite.seed = options.criterion.seed;
    suite.workers = options.criterion.workers;
    const auto series = run_martingale_suite(law, suite, &r);
    for (const auto& s : series) {
        side.truncated += s.truncated ? 1 : 0;
    }
    for (int n = 0; n <= options.generations; ++n) {
        std::vector<double> v;
        std::uint64_t zeros = 0;
        for (const auto& s : series) {
            if (static_cast<int>(s.records.size()) > n) {
                const double d = s.records[static_cast<std::size_t>(n)].d_beta;
                v.push_back(d);
                zeros += d == 0.0 ? 1 : 0;
            }
        }
        side.d_median.push_back(v.empty() ? std::nan("") : quantile(v, 0.5));
        side.d_q90.push_back(v.empty() ? std::nan("") : quantile(v, 0.9));
        side.zero_fraction.push_back(v.empty() ? std::nan("")
                                               : static_cast<double>(zeros) /
                                                     static_cast<double>(v.size()));
    }

    side.verdict = criterion_verdict(side.criterion);
    return side;
}

DichotomyReport dichotomy_experiment(const OffspringLaw& law_a, const RenewalFunction& r_a,
                                     const OffspringLaw& law_b, const RenewalFunction& r_b,
                                     const DichotomyOptions& options)
{
    return {dichotomy_side(law_a, r_a, options), dichotomy_side(law_b, r_b, options)};
}

std::string dichotomy_csv(const DichotomyReport& report)
{
    CsvWriter w{"law", "quantity", "index", "value"};
    const auto row = [&](const std::string& law, const std::string& q, double index, double v) {
        w.field(law).field(q).field(index).field(v);
        w.end_row();
    };
    for (const DichotomySide* side : {&report.a, &report.b}) {
        const std::string& law = side->law;
        for (std::size_t j = 0; j < side->moments.caps.size(); ++j) {
            row(law, "M_Y", side->moments.caps[j], side->moments.m_y[j].mean);
            row(law, "M_Z", side->moments.caps[j], side->moments.m_z[j].mean);
        }
        row(law, "slope_M_Y", 0, side->moments.slope_y);
        row(law, "slope_M_Z", 0, side->moments.slope_z);
        for (const auto& s : side->criterion.series) {
            row(law, "growth:" + s.name, 0, s.growth);
            row(law, "partial_sum:" + s.name, static_cast<double>(s.partial_sum.size()),
                s.partial_sum.back());
        }
        row(law, "growth:F3_series", 0, side->f3_series.growth);
        for (std::size_t n = 0; n < side->d_median.size(); ++n) {
            row(law, "D0_median", static_cast<double>(n), side->d_median[n]);
            row(law, "D0_q90", static_cast<double>(n), side->d_q90[n]);
            row(law, "D0_zero_fraction", static_cast<double>(n), side->zero_fraction[n]);
        }
        row(law, "truncated_replicas", 0, static_cast<double>(side->truncated));
        w.field(law).field("verdict").field(0.0).field(side->verdict);
        w.end_row();
    }
    return w.str();
}

} // namespace brw
