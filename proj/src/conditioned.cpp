#include "brw/conditioned.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "brw/csv.hpp"
#include "brw/errors.hpp"
#include "brw/parallel.hpp"
#include "lattice_sampler.hpp"

namespace brw {

Excursion sample_excursion(const StepLaw& step, std::uint64_t budget, Stream& s)
{
    Excursion e;
    e.path.push_back(0.0);
    if (const auto span = step.lattice_span()) {
        detail::LatticeSampler draw(step);
        std::int64_t k = 0;
        std::vector<std::int64_t> ks{0};
        while (k <= 0) {
            if (ks.size() > budget) {
                throw ExcursionOverrun(budget);
            }
            k += draw(s);
            ks.push_back(k);
        }
        e.path.resize(ks.size());
        for (std::size_t i = 0; i < ks.size(); ++i) {
            e.path[i] = static_cast<double>(ks[i]) * *span;
        }
        return e;
    }
    double x = 0.0;
    while (x <= 0.0) {
        if (e.path.size() > budget) {
            throw ExcursionOverrun(budget);
        }
        x += step.sample(s);
        e.path.push_back(x);
    }
    return e;
}

std::vector<double> reverse_excursion(const Excursion& e)
{
    const std::size_t tau = e.tau();
    std::vector<double> nu(tau + 1);
    for (std::size_t j = 0; j <= tau; ++j) {
        nu[j] = e.path[tau] - e.path[tau - j];
    }
    return nu;
}

ConditionedPath sample_conditioned(const StepLaw& step, std::uint64_t horizon, Stream& s,
                                   std::uint64_t budget)
{
    if (horizon < 1) {
        throw PreconditionError("horizon must be >= 1");
    }
    ConditionedPath p;
    p.values.reserve(horizon + 1);
    p.values.push_back(0.0);
    std::uint64_t t = 0;
    double h = 0.0;
    while (t < horizon) {
        const Excursion e = sample_excursion(step, budget, s);
        const std::vector<double> nu = reverse_excursion(e);
        const std::uint64_t tau = e.tau();
        for (std::uint64_t j = 1; j <= tau && t + j <= horizon; ++j) {
            p.values.push_back(h + nu[j]);
        }
        t += tau;
        h += nu[tau];
        if (t <= horizon) {
            p.block_ends.push_back(t);
            p.heights.push_back(h);
        }
    }
    return p;
}

ConditionedBatch sample_conditioned_paths(const StepLaw& step, std::uint64_t horizon,
                                          std::uint64_t paths, std::uint64_t seed,
                                          unsigned workers, std::uint64_t budget,
                                          std::uint64_t max_attempts)
{
    ConditionedBatch out;
    out.paths.resize(paths);
    std::vector<std::uint64_t> retries(paths, 0);
    parallel_for(paths, workers, [&](std::size_t i) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            Stream s = make_stream(seed, "conditioned", i, attempt);
            try {
                out.paths[i] = sample_conditioned(step, horizon, s, budget);
                retries[i] = attempt;
                return;
            } catch (const ExcursionOverrun&) {
                if (attempt + 1 >= max_attempts) {
                    throw;
                }
            }
        }
    });
    for (auto r : retries) {
        out.retries += r;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monotone tables

MonotoneTable::MonotoneTable(std::vector<double> y, std::vector<double> f)
    : y_(std::move(y)), f_(std::move(f))
{
    if (y_.empty() || y_.size() != f_.size()) {
        throw PreconditionError("F table needs matching, non-empty y and F columns");
    }
    if (y_[0] < 0.0) {
        throw PreconditionError("F table must start at y >= 0");
    }
    for (std::size_t i = 0; i < y_.size(); ++i) {
        if (!std::isfinite(f_[i]) || f_[i] < 0.0) {
            throw PreconditionError("F values must be finite and >= 0");
        }
        if (i > 0) {
            if (!(y_[i] > y_[i - 1])) {
                throw PreconditionError("F table y values must be strictly increasing");
            }
            if (f_[i] > f_[i - 1]) {
                throw NotMonotone("F increases between y=" + fmt17(y_[i - 1]) +
                                  " and y=" + fmt17(y_[i]));
            }
        }
    }
}

MonotoneTable MonotoneTable::from_function(const std::function<double(double)>& fn,
                                           std::vector<double> y)
{
    std::vector<double> f;
    f.reserve(y.size());
    for (double v : y) {
        f.push_back(fn(v));
    }
    return {std::move(y), std::move(f)};
}

std::vector<double> MonotoneTable::geometric_grid(double y_min, double y_max, double ratio)
{
    std::vector<double> y{0.0};
    for (double v = y_min; v <= y_max; v *= ratio) {
        y.push_back(v);
    }
    return y;
}

double MonotoneTable::operator()(double y) const
{
    if (y <= y_.front()) {
        return f_.front();
    }
    const auto it = std::upper_bound(y_.begin(), y_.end(), y);
    return f_[static_cast<std::size_t>(it - y_.begin()) - 1];
}

std::vector<double> MonotoneTable::moment_integral() const
{
    std::vector<double> out(y_.size(), 0.0);
    CompensatedSum acc;
    // below y_0 the step function holds F(y_0)
    acc += f_[0] * y_[0] * y_[0] / 2.0;
    out[0] = acc.value();
    for (std::size_t i = 1; i < y_.size(); ++i) {
        acc += f_[i - 1] * (y_[i] * y_[i] - y_[i - 1] * y_[i - 1]) / 2.0;
        out[i] = acc.value();
    }
    return out;
}

MonotoneTable parse_f_table(const std::string& csv_text)
{
    const auto rows = read_csv_rows(csv_text);
    std::vector<double> y, f;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (i == 0 && !r.empty() && r[0] == "y") {
            continue;
        }
        if (r.size() != 2) {
            throw ParseError("F table line " + std::to_string(i + 1), "expected 2 fields");
        }
        try {
            y.push_back(std::stod(r[0]));
            f.push_back(std::stod(r[1]));
        } catch (const std::exception&) {
            throw ParseError("F table line " + std::to_string(i + 1), "not a number");
        }
    }
    return {std::move(y), std::move(f)};
}

std::string to_string(SeriesClass c)
{
    switch (c) {
    case SeriesClass::Plateau: return "plateau";
    case SeriesClass::Divergent: return "divergent";
    case SeriesClass::Indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

SeriesClass classify_growth(double growth, const SeriesThresholds& t)
{
    if (growth < t.plateau) {
        return SeriesClass::Plateau;
    }
    if (growth > t.divergent) {
        return SeriesClass::Divergent;
    }
    return SeriesClass::Indeterminate;
}

SeriesDiagnostic series_diagnostic(const MonotoneTable& f,
                                   std::span<const ConditionedPath> paths,
                                   const SeriesThresholds& thresholds)
{
    if (paths.empty()) {
        throw PreconditionError("series diagnostic needs at least one path");
    }
    const std::size_t len = paths[0].values.size();
    for (const auto& p : paths) {
        if (p.values.size() != len) {
            throw PreconditionError("all paths must share one horizon");
        }
    }
    SeriesDiagnostic out;
    out.partial_sums.assign(len, 0.0);
    std::vector<double> own(len);
    for (const auto& p : paths) {
        double acc = 0.0;
        for (std::size_t n = 0; n < len; ++n) {
            acc += f(p.values[n]);
            own[n] = acc;
            out.partial_sums[n] += acc;
        }
        out.path_growth.push_back(last_half_growth(own));
    }
    for (double& v : out.partial_sums) {
        v /= static_cast<double>(paths.size());
    }
    out.growth = last_half_growth(out.partial_sums);
    out.series_class = classify_growth(out.growth, thresholds);

    const std::vector<double> integral = f.moment_integral();
    out.integral_m = f.y();
    out.integral = integral;
    const double top = f.y().back();
    const auto ref_it = std::lower_bound(f.y().begin(), f.y().end(), top / 100.0);
    const auto ref = static_cast<std::size_t>(ref_it - f.y().begin());
    const double i_ref = integral[ref];
    const double i_top = integral.back();
    const double trend = i_ref > 0.0 ? (i_top - i_ref) / i_ref : (i_top > 0.0 ? 1.0 : 0.0);
    out.integral_divergent = f.f().back() > 0.0 && trend >= thresholds.plateau;
    return out;
}

double expected_sum_rhs(const std::function<double(double)>& f, const RenewalTable& t)
{
    CompensatedSum acc;
    const std::size_t k = t.x.size() - 1;
    if (t.lattice_span) {
        // U charges lattice points only; cell i covers [x_{i-1}, x_i).
        acc += f(0.0) * 1.0 * t.u[1];
        for (std::size_t i = 2; i <= k; ++i) {
            acc += f(t.x[i - 1]) * t.r[i - 1] * (t.u[i] - t.u[i - 1]);
        }
        return acc.value();
    }
    acc += f(0.0) * t.u[0];
    for (std::size_t i = 1; i <= k; ++i) {
        const double mid = 0.5 * (t.x[i - 1] + t.x[i]);
        const double r_mid = 0.5 * (t.r[i - 1] + t.r[i]);
        acc += f(mid) * r_mid * (t.u[i] - t.u[i - 1]);
    }
    return acc.value();
}

HTransformCheck verify_h_transform_mc(const StepLaw& step, const RenewalFunction& r,
                                      std::uint64_t horizon, const PathFunctional& g,
                                      std::uint64_t replicas, std::uint64_t seed,
                                      unsigned workers)
{
    const ConditionedBatch batch = sample_conditioned_paths(
        step, horizon, replicas, substream_key(seed, "htransform.tanaka", 0), workers);
    constexpr std::uint64_t kBlock = 1024;
    const std::uint64_t blocks = (replicas + kBlock - 1) / kBlock;
    std::vector<Moments> tanaka(blocks), weighted(blocks);
    parallel_for(blocks, workers, [&](std::size_t b) {
        Stream ws = make_stream(seed, "htransform.walk", b);
        const std::uint64_t lo = b * kBlock;
        const std::uint64_t hi = std::min(replicas, lo + kBlock);
        std::vector<double> walk(horizon + 1);
        for (std::uint64_t i = lo; i < hi; ++i) {
            tanaka[b].add(g(batch.paths[i].values));
            walk[0] = 0.0;
            bool positive = true;
            for (std::uint64_t n = 1; n <= horizon; ++n) {
                walk[n] = walk[n - 1] + step.sample(ws);
                positive = positive && walk[n] > 0.0;
            }
            weighted[b].add(positive ? g(walk) * r(walk[horizon]) / r(0.0) : 0.0);
        }
    });
    Moments t, w;
    for (std::uint64_t b = 0; b < blocks; ++b) {
        t.merge(tanaka[b]);
        w.merge(weighted[b]);
    }
    return {t.estimate(), w.estimate()};
}

} // namespace brw
