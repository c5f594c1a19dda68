// Command line front end: brwsim <command> [options]

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brw/app.hpp"
#include "brw/config.hpp"
#include "brw/errors.hpp"

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out;
    std::string config;
    bool test_mode = false;

    std::optional<std::string> law, law_b;
    std::optional<int> generations;
    std::optional<std::uint64_t> replicas, cap, excursions, budget, horizon, paths, draws;
    std::optional<double> barrier, start, grid_max, cell_width, f_power;
    bool audit = false;
    std::optional<std::string> renewal_table, f_table;
    std::vector<double> y;
};

template <class T>
void set_if(std::optional<T>& src, T& dst)
{
    if (src) {
        dst = *src;
    }
}

brw::ExperimentConfig assemble(const std::string& command, Overrides& o)
{
    brw::ExperimentConfig c = o.config.empty() ? brw::parse_config_text("{}", o.test_mode)
                                               : brw::parse_config(o.config, o.test_mode);
    if (o.seed) {
        c.seed = *o.seed;
    }
    set_if(o.workers, c.workers);
    set_if(o.out, c.out);
    if (o.law) {
        c.law = brw::load_law(*o.law);
    }
    if (o.law_b) {
        c.law_b = brw::load_law(*o.law_b);
    }
    if (o.renewal_table) {
        c.renewal.table = *o.renewal_table;
    }
    set_if(o.excursions, c.renewal.excursions);
    set_if(o.budget, c.renewal.budget);
    set_if(o.grid_max, c.renewal.grid_max);
    set_if(o.cell_width, c.renewal.cell_width);
    if (command == "simulate") {
        set_if(o.generations, c.simulate.generations);
        set_if(o.replicas, c.simulate.replicas);
        set_if(o.cap, c.simulate.cap);
        set_if(o.start, c.simulate.start);
        if (o.barrier) {
            c.simulate.barrier = *o.barrier;
        }
        c.simulate.audit = c.simulate.audit || o.audit;
    } else if (command == "conditioned") {
        set_if(o.horizon, c.conditioned.horizon);
        set_if(o.paths, c.conditioned.paths);
        set_if(o.f_power, c.conditioned.f_power);
        if (o.f_table) {
            c.conditioned.f_table = *o.f_table;
        }
    } else if (command == "spine") {
        if (o.horizon) {
            c.spine.horizon = static_cast<int>(*o.horizon);
        }
        set_if(o.replicas, c.spine.replicas);
        set_if(o.start, c.spine.start);
    } else if (command == "criterion" || command == "dichotomy") {
        set_if(o.horizon, c.criterion.horizon);
        set_if(o.paths, c.criterion.paths);
        set_if(o.draws, c.criterion.draws);
        if (!o.y.empty()) {
            c.criterion.y = o.y;
        }
        set_if(o.generations, c.dichotomy.generations);
        set_if(o.replicas, c.dichotomy.forest_replicas);
    }
    brw::validate(c);
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Boundary-case branching random walk simulator"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--seed", o.seed, "master seed (64-bit)");
    app.add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", o.out, "output directory");
    app.add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_flag("--test-mode", o.test_mode, "require an explicit seed");

    const auto law_opt = [&](CLI::App* sub) {
        sub->add_option("--law", o.law, "law specification (JSON)")->check(CLI::ExistingFile);
    };
    const auto renewal_opts = [&](CLI::App* sub) {
        sub->add_option("--renewal-table", o.renewal_table, "renewal table CSV to reuse")
            ->check(CLI::ExistingFile);
        sub->add_option("--excursions", o.excursions, "excursions for the renewal estimate");
        sub->add_option("--budget", o.budget, "step budget per excursion");
    };

    auto* simulate = app.add_subcommand("simulate", "martingales W_n(1), D_n, D_n^(beta)");
    law_opt(simulate);
    simulate->add_option("--generations", o.generations);
    simulate->add_option("--replicas", o.replicas);
    simulate->add_option("--barrier", o.barrier, "barrier beta >= 0");
    simulate->add_flag("--audit", o.audit, "flag instead of killing below the barrier");
    simulate->add_option("--cap", o.cap, "population cap");
    simulate->add_option("--start", o.start, "start position a");
    renewal_opts(simulate);

    auto* renewal = app.add_subcommand("renewal", "renewal tables U, U^-, R");
    law_opt(renewal);
    renewal->add_option("--excursions", o.excursions);
    renewal->add_option("--grid-max", o.grid_max);
    renewal->add_option("--cell-width", o.cell_width);
    renewal->add_option("--budget", o.budget);

    auto* conditioned = app.add_subcommand("conditioned", "integral test along conditioned walks");
    law_opt(conditioned);
    conditioned->add_option("--horizon", o.horizon);
    conditioned->add_option("--paths", o.paths);
    conditioned->add_option("--F", o.f_table, "F table CSV (y, F_of_y)")->check(CLI::ExistingFile);
    conditioned->add_option("--F-power", o.f_power, "F(y) = (1 + y)^-p when no table is given");

    auto* spine = app.add_subcommand("spine", "spine under the changed measure");
    law_opt(spine);
    spine->add_option("--horizon", o.horizon);
    spine->add_option("--replicas", o.replicas);
    spine->add_option("--start", o.start);
    renewal_opts(spine);

    auto* criterion = app.add_subcommand("criterion", "series criteria along conditioned walks");
    law_opt(criterion);
    criterion->add_option("--horizon", o.horizon);
    criterion->add_option("--paths", o.paths);
    criterion->add_option("--draws", o.draws, "X draws per (path, n)");
    criterion->add_option("--y", o.y, "tail thresholds")->delimiter(',');
    renewal_opts(criterion);

    auto* dichotomy = app.add_subcommand("dichotomy", "side-by-side report for two laws");
    dichotomy->add_option("--law-a", o.law, "first law")->check(CLI::ExistingFile);
    dichotomy->add_option("--law-b", o.law_b, "second law")->check(CLI::ExistingFile);
    dichotomy->add_option("--horizon", o.horizon);
    dichotomy->add_option("--paths", o.paths);
    dichotomy->add_option("--draws", o.draws);
    dichotomy->add_option("--y", o.y)->delimiter(',');
    dichotomy->add_option("--generations", o.generations);
    dichotomy->add_option("--replicas", o.replicas, "forest replicas");
    renewal_opts(dichotomy);

    auto* selftest = app.add_subcommand("selftest", "exact-enumeration oracle suites");

    for (auto* sub : app.get_subcommands({})) {
        sub->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (selftest->parsed()) {
            const int failures = brw::run_selftest(std::cout);
            std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
            return failures == 0 ? 0 : 1;
        }
        const std::string command = app.get_subcommands().front()->get_name();
        const brw::ExperimentConfig config = assemble(command, o);
        const brw::RunManifest m = brw::run_command(command, config);
        for (const auto& e : m.errors) {
            std::cerr << "warning: " << e << "\n";
        }
        for (const auto& f : m.outputs) {
            std::cout << f << "\n";
        }
        return 0;
    } catch (const brw::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const brw::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
