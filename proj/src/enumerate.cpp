#include "brw/enumerate.hpp"

#include <cmath>
#include <functional>

#include "brw/errors.hpp"

namespace brw {

namespace {

void guard(double count, const char* what)
{
    if (count > static_cast<double>(kMaxEnumeration)) {
        throw EnumerationTooLarge(std::string(what) + " would visit " +
                                  std::to_string(count) + " paths");
    }
}

std::int64_t lattice_units(double x, double span)
{
    return static_cast<std::int64_t>(std::llround(x / span));
}

} // namespace

double exact_walk_expectation(const StepLaw& step, const PathFunctional& g, int n,
                              double start)
{
    if (!step.finite_support()) {
        throw PreconditionError("exact enumeration needs a finite step law");
    }
    const auto& values = step.values();
    const auto& probs = step.probabilities();
    guard(std::pow(static_cast<double>(values.size()), n), "walk enumeration");
    std::vector<double> path;
    CompensatedSum total;
    std::function<void(int, double, double)> rec = [&](int depth, double pos, double w) {
        if (depth == n) {
            total += w * std::exp(pos - start) * g(path);
            return;
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            path.push_back(pos + values[i]);
            rec(depth + 1, pos + values[i], w * probs[i]);
            path.pop_back();
        }
    };
    rec(0, start, 1.0);
    return total.value();
}

double exact_lineage_expectation(const OffspringLaw& law, const PathFunctional& g, int n,
                                 double start)
{
    const auto atoms = law.atoms();
    double branches = 0.0;
    for (const auto& a : atoms) {
        branches += static_cast<double>(a.displacements.size());
    }
    guard(std::pow(branches, n), "lineage enumeration");
    std::vector<double> path;
    CompensatedSum total;
    std::function<void(int, double, double)> rec = [&](int depth, double pos, double w) {
        if (depth == n) {
            total += w * g(path);
            return;
        }
        for (const auto& a : atoms) {
            for (double d : a.displacements) {
                path.push_back(pos + d);
                rec(depth + 1, pos + d, w * a.probability);
                path.pop_back();
            }
        }
    };
    rec(0, start, 1.0);
    return total.value();
}

LatticePathLaw exact_h_transform_law(int horizon)
{
    const StepLaw step = StepLaw::discrete({-1.0, 1.0}, {0.5, 0.5}, 1.0);
    return exact_h_transform_law(step, ExactLatticeR(1.0), horizon);
}

LatticePathLaw exact_h_transform_law(const StepLaw& step, const RenewalFunction& r, int horizon)
{
    if (!step.lattice_span()) {
        throw PreconditionError("exact path laws need a lattice step law");
    }
    const double span = *step.lattice_span();
    const auto ks = step.lattice_steps();
    const auto& probs = step.probabilities();
    guard(std::pow(static_cast<double>(ks.size()), horizon), "h-transform enumeration");
    LatticePathLaw out;
    std::vector<std::int64_t> path;
    const double r0 = r(0.0);
    std::function<void(std::int64_t, double)> rec = [&](std::int64_t k, double w) {
        if (static_cast<int>(path.size()) == horizon) {
            out[path] += w * r(static_cast<double>(k) * span) / r0;
            return;
        }
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const std::int64_t next = k + ks[i];
            if (next <= 0) {
                continue;
            }
            path.push_back(next);
            rec(next, w * probs[i]);
            path.pop_back();
        }
    };
    rec(0, 1.0);
    return out;
}

LatticePathLaw exact_tanaka_law(int horizon)
{
    // Reversed excursions of the simple walk: nu(1) = 1 and nu moves by +-1
    // while staying >= 1; the block may close whenever nu = 1. An excursion
    // whose first r reversed steps are observed but which is still open at
    // the horizon carries the weight of every unseen beginning, i.e. the
    // Green function G(y) of the walk killed on entering (0, inf) minus the
    // empty beginning: G(0) - 1 = 1 and G(y) = 2 for y < 0.
    if (horizon < 1) {
        throw PreconditionError("horizon must be >= 1");
    }
    guard(std::pow(3.0, horizon), "Tanaka enumeration");
    LatticePathLaw out;
    std::vector<std::int64_t> path;
    std::function<void(std::int64_t, std::int64_t, double)> in_block;
    // Start a new block at base height h.
    const auto open_block = [&](std::int64_t h, double w) {
        if (static_cast<int>(path.size()) == horizon) {
            out[path] += w;
            return;
        }
        path.push_back(h + 1);
        in_block(h, 1, w * 0.5);
        path.pop_back();
    };
    std::function<void(std::int64_t, double)> open = open_block;
    in_block = [&](std::int64_t h, std::int64_t nu, double w) {
        if (static_cast<int>(path.size()) == horizon) {
            const std::int64_t y = 1 - nu;
            out[path] += w * (y == 0 ? 1.0 : 2.0);
            if (nu == 1) {
                out[path] += w; // the block closes exactly at the horizon
            }
            return;
        }
        if (nu == 1) {
            open(h + 1, w);
        }
        for (std::int64_t d : {-1, 1}) {
            const std::int64_t next = nu + d;
            if (next < 1) {
                continue;
            }
            path.push_back(h + next);
            in_block(h, next, w * 0.5);
            path.pop_back();
        }
    };
    open(0, 1.0);
    return out;
}

LatticePathLaw exact_spine_law(const OffspringLaw& law, const RenewalFunction& r, int horizon)
{
    const auto span_opt = law.lattice_span();
    if (!span_opt) {
        throw PreconditionError("exact spine law needs a lattice law");
    }
    const double span = *span_opt;
    const auto atoms = law.atoms();
    double branches = 0.0;
    for (const auto& a : atoms) {
        branches += static_cast<double>(a.displacements.size());
    }
    guard(std::pow(branches, horizon), "spine enumeration");
    LatticePathLaw out;
    std::vector<std::int64_t> path;
    std::function<void(double, double)> rec = [&](double v, double w) {
        if (static_cast<int>(path.size()) == horizon) {
            out[path] += w;
            return;
        }
        const double rv = r(v);
        for (const auto& a : atoms) {
            for (double d : a.displacements) {
                const double x = v + d;
                if (!(x > 0.0)) {
                    continue;
                }
                // P(atom) * [weight of child / total weight] * [total weight / R(v)]
                const double p = a.probability * r(x) * std::exp(-d) / rv;
                path.push_back(lattice_units(x, span));
                rec(x, w * p);
                path.pop_back();
            }
        }
    };
    rec(0.0, 1.0);
    return out;
}

double total_variation(const LatticePathLaw& p, const LatticePathLaw& q)
{
    CompensatedSum s;
    for (const auto& [k, v] : p) {
        const auto it = q.find(k);
        s += std::abs(v - (it == q.end() ? 0.0 : it->second));
    }
    for (const auto& [k, v] : q) {
        if (!p.contains(k)) {
            s += std::abs(v);
        }
    }
    return 0.5 * s.value();
}

double expectation(const LatticePathLaw& law, double span, const PathFunctional& g)
{
    CompensatedSum s;
    std::vector<double> path;
    for (const auto& [k, p] : law) {
        path.assign(1, 0.0);
        for (auto v : k) {
            path.push_back(static_cast<double>(v) * span);
        }
        s += p * g(path);
    }
    return s.value();
}

} // namespace brw
