#include "brw/app.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "brw/conditioned.hpp"
#include "brw/criterion.hpp"
#include "brw/csv.hpp"
#include "brw/enumerate.hpp"
#include "brw/errors.hpp"
#include "brw/forest.hpp"
#include "brw/rng.hpp"
#include "brw/spine.hpp"

namespace brw {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path, "cannot open file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class OutputDir {
public:
    OutputDir(const std::string& dir, RunManifest& manifest) : dir_(dir), manifest_(manifest)
    {
        std::filesystem::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& content)
    {
        const auto path = dir_ / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw Error("cannot write " + path.string());
        }
        out << content;
        manifest_.outputs.push_back(path.string());
    }

private:
    std::filesystem::path dir_;
    RunManifest& manifest_;
};

const OffspringLaw& require_law(const std::optional<LawSpec>& spec, const char* what)
{
    if (!spec) {
        throw PreconditionError(std::string("this command needs ") + what);
    }
    return spec->law;
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

MonotoneTable f_table_for(const ConditionedConfig& c)
{
    if (!c.f_table.empty()) {
        return parse_f_table(read_file(c.f_table));
    }
    const double p = c.f_power;
    return MonotoneTable::from_function([p](double y) { return std::pow(1.0 + y, -p); },
                                        MonotoneTable::geometric_grid(1e-3, 1e9, 1.001));
}

std::string summary_csv(const std::vector<std::pair<std::string, std::string>>& rows)
{
    CsvWriter w{"quantity", "value"};
    for (const auto& [k, v] : rows) {
        w.field(k).field(v);
        w.end_row();
    }
    return w.str();
}

void run_simulate(const ExperimentConfig& c, RunManifest& m, OutputDir& out)
{
    const OffspringLaw& law = require_law(c.law, "a law");
    SuiteOptions suite;
    suite.generations = c.simulate.generations;
    suite.replicas = c.simulate.replicas;
    suite.seed = *c.seed;
    suite.workers = c.workers;
    suite.forest.cap = c.simulate.cap;
    suite.forest.start = c.simulate.start;
    RHandle r;
    if (c.simulate.barrier) {
        suite.forest.mode = c.simulate.audit ? BarrierMode::Audit : BarrierMode::Kill;
        suite.forest.beta = *c.simulate.barrier;
        r = build_renewal(law, c.renewal, *c.seed, c.workers);
    }
    m.substreams.push_back("forest[0.." + std::to_string(suite.replicas) + ")");
    const auto series = run_martingale_suite(law, suite, r.get());
    for (const auto& s : series) {
        if (s.truncated) {
            m.errors.push_back("replica " + std::to_string(s.replica) + ": " + s.error);
        }
    }
    out.write("martingales.csv", martingales_csv(series, *c.seed));
}

void run_renewal(const ExperimentConfig& c, RunManifest& m, OutputDir& out)
{
    const OffspringLaw& law = require_law(c.law, "a law");
    const StepLaw step = derive_step_law(law);
    RenewalOptions opt;
    opt.excursions = c.renewal.excursions;
    opt.grid_max = c.renewal.grid_max;
    opt.cell_width = c.renewal.cell_width;
    opt.budget = c.renewal.budget;
    opt.seed = *c.seed;
    opt.workers = c.workers;
    m.substreams.push_back("renewal.descending[blocks]");
    m.substreams.push_back("renewal.ascending[blocks]");
    const RenewalTable t = estimate_renewal(step, opt);
    out.write("renewal.csv", renewal_csv(t));
    std::vector<std::pair<std::string, std::string>> rows{
        {"excursions", std::to_string(t.excursions)},
        {"overruns", std::to_string(t.overruns)},
        {"partial", t.partial ? "true" : "false"},
        {"envelope_c1", fmt17(t.envelope_lower())},
        {"envelope_c2", fmt17(t.envelope_upper())},
    };
    if (t.x_max() >= 50.0 * step.sd()) {
        const C0Estimate c0 = estimate_c0(t, step.sd());
        rows.emplace_back("c0", fmt17(c0.c0));
        rows.emplace_back("c0_drift", fmt17(c0.drift));
    }
    if (t.partial) {
        m.errors.push_back(std::to_string(t.overruns) + " excursions hit the step budget");
    }
    out.write("renewal_summary.csv", summary_csv(rows));
}

void run_conditioned(const ExperimentConfig& c, RunManifest& m, OutputDir& out)
{
    const OffspringLaw& law = require_law(c.law, "a law");
    const StepLaw step = derive_step_law(law);
    const MonotoneTable f = f_table_for(c.conditioned);
    m.substreams.push_back("conditioned[0.." + std::to_string(c.conditioned.paths) + ")");
    const auto batch = sample_conditioned_paths(step, c.conditioned.horizon, c.conditioned.paths,
                                                *c.seed, c.workers, c.conditioned.budget);
    const SeriesDiagnostic d =
        series_diagnostic(f, batch.paths, {c.conditioned.plateau, c.conditioned.divergent});
    CsvWriter w{"n", "partial_sum"};
    for (std::size_t n = 0; n < d.partial_sums.size(); ++n) {
        w.field(static_cast<std::uint64_t>(n)).field(d.partial_sums[n]);
        w.end_row();
    }
    out.write("conditioned.csv", w.str());
    CsvWriter wi{"M", "integral"};
    for (std::size_t i = 0; i < d.integral.size(); i += 100) {
        wi.field(d.integral_m[i]).field(d.integral[i]);
        wi.end_row();
    }
    out.write("conditioned_integral.csv", wi.str());
    out.write("conditioned_summary.csv",
              summary_csv({{"growth", fmt17(d.growth)},
                           {"class", to_string(d.series_class)},
                           {"integral_divergent", d.integral_divergent ? "true" : "false"},
                           {"retries", std::to_string(batch.retries)}}));
}

void run_spine(const ExperimentConfig& c, RunManifest& m, OutputDir& out)
{
    const OffspringLaw& law = require_law(c.law, "a law");
    const RHandle r = build_renewal(law, c.renewal, *c.seed, c.workers);
    m.substreams.push_back("spine[0.." + std::to_string(c.spine.replicas) + ")");
    const auto spines = sample_spines(law, *r, c.spine.horizon, c.spine.replicas, c.spine.start,
                                      *c.seed, c.workers);
    out.write("spine.csv", spine_csv(spines));
}

CriterionOptions criterion_options(const ExperimentConfig& c)
{
    CriterionOptions o;
    o.horizon = c.criterion.horizon;
    o.paths = c.criterion.paths;
    o.draws = c.criterion.draws;
    o.y_values = c.criterion.y;
    o.thresholds = {c.criterion.plateau, c.criterion.divergent};
    o.sampler.clt_threshold = c.criterion.clt_threshold;
    o.sampler.importance = c.criterion.importance;
    o.seed = *c.seed;
    o.workers = c.workers;
    return o;
}

void run_criterion(const ExperimentConfig& c, RunManifest& m, OutputDir& out)
{
    const OffspringLaw& law = require_law(c.law, "a law");
    const RHandle r = build_renewal(law, c.renewal, *c.seed, c.workers);
    m.substreams.push_back("conditioned[0.." + std::to_string(c.criterion.paths) + ")");
    m.substreams.push_back("criterion.x[0.." + std::to_string(c.criterion.paths) + ")");
    const CriterionReport rep = run_criterion_series(law, *r, criterion_options(c));
    out.write("criterion.csv", criterion_csv({rep}));
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& s : rep.series) {
        rows.emplace_back("growth:" + s.name, fmt17(s.growth));
        rows.emplace_back("class:" + s.name, to_string(s.series_class));
    }
    rows.emplace_back("verdict", criterion_verdict(rep));
    out.write("criterion_summary.csv", summary_csv(rows));
}

void run_dichotomy(const ExperimentConfig& c, RunManifest& m, OutputDir& out)
{
    const OffspringLaw& a = require_law(c.law, "a law (law)");
    const OffspringLaw& b = require_law(c.law_b, "a second law (law_b)");
    const RHandle ra = build_renewal(a, c.renewal, *c.seed, c.workers);
    const RHandle rb = build_renewal(b, c.renewal, *c.seed, c.workers);
    DichotomyOptions o;
    o.criterion = criterion_options(c);
    o.moments.draws = c.dichotomy.moment_draws;
    o.moments.caps = c.dichotomy.caps;
    o.moments.sampler = o.criterion.sampler;
    o.moments.seed = *c.seed;
    o.moments.workers = c.workers;
    o.generations = c.dichotomy.generations;
    o.forest_replicas = c.dichotomy.forest_replicas;
    o.cap = c.dichotomy.cap;
    o.tail_y = c.dichotomy.tail_y;
    m.substreams = {"moments[blocks]", "tail_functionals[blocks]", "conditioned[paths]",
                    "criterion.x[paths]", "forest[replicas]"};
    const DichotomyReport rep = dichotomy_experiment(a, *ra, b, *rb, o);
    out.write("dichotomy.csv", dichotomy_csv(rep));
    out.write("criterion.csv", criterion_csv({rep.a.criterion, rep.b.criterion}));
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& [tag, side] : {std::pair{"a", &rep.a}, std::pair{"b", &rep.b}}) {
        const std::string prefix = std::string(tag) + ":";
        rows.emplace_back(prefix + "law", side->law);
        for (const auto& s : side->criterion.series) {
            rows.emplace_back(prefix + "class:" + s.name, to_string(s.series_class));
        }
        rows.emplace_back(prefix + "class:F3_series", to_string(side->f3_series.series_class));
        rows.emplace_back(prefix + "verdict", side->verdict);
    }
    out.write("dichotomy_summary.csv", summary_csv(rows));
}

} // namespace

std::string RunManifest::to_json() const
{
    json j;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = json::parse(config);
    j["config_hash"] = config_hash;
    j["substreams"] = substreams;
    j["version"] = version;
    j["wall_seconds"] = wall_seconds;
    j["outputs"] = outputs;
    j["errors"] = errors;
    return j.dump(2) + "\n";
}

std::string config_to_json(const ExperimentConfig& c)
{
    json j;
    if (c.seed) {
        j["seed"] = *c.seed;
    }
    j["workers"] = c.workers;
    j["out"] = c.out;
    j["test_mode"] = c.test_mode;
    if (c.law) {
        j["law"] = json::parse(c.law->canonical);
    }
    if (c.law_b) {
        j["law_b"] = json::parse(c.law_b->canonical);
    }
    json sim{{"generations", c.simulate.generations},
             {"replicas", c.simulate.replicas},
             {"audit", c.simulate.audit},
             {"cap", c.simulate.cap},
             {"start", c.simulate.start}};
    if (c.simulate.barrier) {
        sim["barrier"] = *c.simulate.barrier;
    }
    j["simulate"] = sim;
    j["renewal"] = {{"excursions", c.renewal.excursions}, {"grid_max", c.renewal.grid_max},
                    {"cell_width", c.renewal.cell_width}, {"budget", c.renewal.budget},
                    {"table", c.renewal.table},           {"linear_tail", c.renewal.linear_tail}};
    j["conditioned"] = {{"horizon", c.conditioned.horizon}, {"paths", c.conditioned.paths},
                        {"F", c.conditioned.f_table},       {"F_power", c.conditioned.f_power},
                        {"plateau", c.conditioned.plateau}, {"divergent", c.conditioned.divergent},
                        {"budget", c.conditioned.budget}};
    j["spine"] = {{"horizon", c.spine.horizon},
                  {"replicas", c.spine.replicas},
                  {"start", c.spine.start}};
    j["criterion"] = {{"horizon", c.criterion.horizon},
                      {"paths", c.criterion.paths},
                      {"draws", c.criterion.draws},
                      {"y", c.criterion.y},
                      {"plateau", c.criterion.plateau},
                      {"divergent", c.criterion.divergent},
                      {"clt_threshold", c.criterion.clt_threshold},
                      {"importance", c.criterion.importance}};
    j["dichotomy"] = {{"generations", c.dichotomy.generations},
                      {"forest_replicas", c.dichotomy.forest_replicas},
                      {"cap", c.dichotomy.cap},
                      {"moment_draws", c.dichotomy.moment_draws},
                      {"caps", c.dichotomy.caps},
                      {"tail_y", c.dichotomy.tail_y}};
    return j.dump();
}

RHandle build_renewal(const OffspringLaw& law, const RenewalConfig& config, std::uint64_t seed,
                      unsigned workers)
{
    if (law.family() == Family::LatticeBinary) {
        return renewal_for(law, nullptr, config.linear_tail);
    }
    const StepLaw step = derive_step_law(law);
    if (!config.table.empty()) {
        auto table = std::make_shared<const RenewalTable>(
            parse_renewal_csv(read_file(config.table), step.lattice_span()));
        return std::make_shared<TabulatedR>(std::move(table), config.linear_tail);
    }
    RenewalOptions opt;
    opt.excursions = config.excursions;
    opt.grid_max = config.grid_max;
    opt.cell_width = config.cell_width;
    opt.budget = config.budget;
    opt.seed = seed;
    opt.workers = workers;
    if (law.family() == Family::UserTable) {
        return renewal_for(law, std::make_shared<const RenewalTable>(estimate_renewal(step, opt)),
                           config.linear_tail);
    }
    const double sigma = step.sd();
    opt.grid_max = config.grid_max > 0.0 ? config.grid_max / sigma : 0.0;
    opt.cell_width = config.cell_width > 0.0 ? config.cell_width / sigma : 0.0;
    const StepLaw unit = StepLaw::gaussian(1.0);
    return renewal_for(law, std::make_shared<const RenewalTable>(estimate_renewal(unit, opt)),
                       config.linear_tail);
}

RunManifest run_command(const std::string& command, const ExperimentConfig& config)
{
    validate(config);
    if (!config.seed) {
        throw ValidationError({"seed: required"});
    }
    const auto t0 = std::chrono::steady_clock::now();
    RunManifest m;
    m.command = command;
    m.seed = *config.seed;
    m.config = config_to_json(config);
    m.config_hash = hex64(hash_label(m.config));
    OutputDir out(config.out, m);
    const auto finish = [&] {
        m.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto path = std::filesystem::path(config.out) / "manifest.json";
        std::ofstream(path, std::ios::binary) << m.to_json();
    };
    try {
        if (command == "simulate") {
            run_simulate(config, m, out);
        } else if (command == "renewal") {
            run_renewal(config, m, out);
        } else if (command == "conditioned") {
            run_conditioned(config, m, out);
        } else if (command == "spine") {
            run_spine(config, m, out);
        } else if (command == "criterion") {
            run_criterion(config, m, out);
        } else if (command == "dichotomy") {
            run_dichotomy(config, m, out);
        } else {
            throw PreconditionError("unknown command '" + command + "'");
        }
    } catch (const std::exception& e) {
        m.errors.push_back(e.what());
        finish();
        throw;
    }
    finish();
    return m;
}

// ---------------------------------------------------------------------------
// Selftest

int run_selftest(std::ostream& out)
{
    int failures = 0;
    const auto check = [&](const std::string& name, bool ok, const std::string& detail) {
        out << "selftest " << name << ": " << (ok ? "PASS" : "FAIL") << " (" << detail << ")\n";
        failures += ok ? 0 : 1;
    };

    const OffspringLaw lattice = OffspringLaw::lattice_binary();
    const double h = *lattice.lattice_span();
    {
        const LaplaceValue l = lattice.laplace(1.0);
        check("lattice boundary case", std::abs(l.psi) <= 1e-12 && std::abs(l.psi_prime) <= 1e-12,
              "psi(1)=" + fmt17(l.psi) + " psi'(1)=" + fmt17(l.psi_prime));
    }
    for (int n = 1; n <= 8; ++n) {
        const double tv = total_variation(exact_tanaka_law(n), exact_h_transform_law(n));
        check("tanaka vs h-transform N=" + std::to_string(n), tv <= 1e-10, "TV=" + fmt17(tv));
    }
    for (int n = 1; n <= 6; ++n) {
        const double tv = verify_spine_law_exact(lattice, n).total_variation;
        check("spine vs h-transform N=" + std::to_string(n), tv <= 1e-10, "TV=" + fmt17(tv));
    }
    {
        const StepLaw step = derive_step_law(lattice);
        const std::vector<std::pair<std::string, PathFunctional>> gs{
            {"one", [](std::span<const double>) { return 1.0; }},
            {"last_positive", [](std::span<const double> p) { return p.back() > 0.0 ? 1.0 : 0.0; }},
            {"stayed_positive",
             [](std::span<const double> p) {
                 for (double v : p) {
                     if (!(v > 0.0)) {
                         return 0.0;
                     }
                 }
                 return 1.0;
             }},
        };
        for (int n = 1; n <= 3; ++n) {
            for (const auto& [name, g] : gs) {
                const double a = exact_lineage_expectation(lattice, g, n);
                const double b = exact_walk_expectation(step, g, n);
                check("many-to-one " + name + " n=" + std::to_string(n),
                      std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)),
                      fmt17(a) + " vs " + fmt17(b));
            }
        }
    }
    {
        const ExactLatticeR r(h);
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            const double x = 0.37 * h * (i + 1);
            const double lhs = 0.5 * r(x + h) + 0.5 * (x - h > 0.0 ? r(x - h) : 0.0);
            worst = std::max(worst, std::abs(lhs - r(x)) / r(x));
        }
        check("lattice R harmonic", worst <= 1e-12, "max rel dev=" + fmt17(worst));
    }
    {
        double total = 0.0;
        for (const auto& [k, p] : exact_h_transform_law(8)) {
            total += p;
        }
        check("h-transform law normalized", std::abs(total - 1.0) <= 1e-12, fmt17(total));
    }
    return failures;
}

} // namespace brw
