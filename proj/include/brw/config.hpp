#pragma once

// Experiment configuration files and law specifications (JSON).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "brw/model.hpp"

namespace brw {

/// A parsed law specification {"family", "params", "normalize"}.
struct LawSpec {
    std::string canonical; ///< the specification re-serialized with sorted keys
    OffspringLaw law;      ///< normalized when the spec asks for it
};

/// Parses a law specification; throws ParseError or ValidationError.
LawSpec parse_law(const std::string& json_text, const std::string& where = "law");
LawSpec load_law(const std::string& path);

struct SimulateConfig {
    int generations = 10;
    std::uint64_t replicas = 1000;
    std::optional<double> barrier;   ///< beta; absent means no barrier
    bool audit = false;              ///< keep particles below the barrier and flag them
    std::uint64_t cap = 5000000;
    double start = 0.0;
};

struct RenewalConfig {
    std::uint64_t excursions = 200000;
    double grid_max = 0.0;
    double cell_width = 0.0;
    std::uint64_t budget = 10000000;
    std::string table;       ///< reuse a table written by the renewal command
    bool linear_tail = true; ///< extend tabulated R linearly beyond its grid
};

struct ConditionedConfig {
    std::uint64_t horizon = 100000;
    std::uint64_t paths = 64;
    std::string f_table;     ///< CSV (y, F_of_y)
    double f_power = 3.0;    ///< F(y) = (1 + y)^-power when no table is given
    double plateau = 0.01;
    double divergent = 0.20;
    std::uint64_t budget = 10000000;
};

struct SpineConfig {
    int horizon = 10;
    std::uint64_t replicas = 10000;
    double start = 0.0;
};

struct CriterionConfig {
    std::uint64_t horizon = 10000;
    std::uint64_t paths = 32;
    std::uint64_t draws = 64;
    std::vector<double> y{1.0, 2.0, 8.0};
    double plateau = 0.05;
    double divergent = 0.20;
    double clt_threshold = 10000.0;
    bool importance = true;
};

struct DichotomyConfig {
    int generations = 10;
    std::uint64_t forest_replicas = 200;
    std::uint64_t cap = 2000000;
    std::uint64_t moment_draws = 1000000;
    std::vector<double> caps{1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e8, 1e10, 1e12};
    double tail_y = 1.0;
};

struct ExperimentConfig {
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    std::string out = ".";
    bool test_mode = false;
    std::optional<LawSpec> law;
    std::optional<LawSpec> law_b;
    SimulateConfig simulate;
    RenewalConfig renewal;
    ConditionedConfig conditioned;
    SpineConfig spine;
    CriterionConfig criterion;
    DichotomyConfig dichotomy;
    std::string canonical; ///< canonical JSON of the parsed file ("{}" if none)
};

/// Parses a configuration document. Unknown keys are rejected; every
/// constraint violation is collected into one ValidationError. In test mode
/// (argument or "test_mode": true) a seed is mandatory. Law entries may be
/// inline objects or paths to law files, resolved against `base_dir`.
ExperimentConfig parse_config_text(const std::string& text, bool test_mode = false,
                                   const std::string& base_dir = ".");
ExperimentConfig parse_config(const std::string& path, bool test_mode = false);

/// Checks the constraints of an assembled configuration (also after command
/// line overrides) and throws ValidationError listing every violation.
void validate(const ExperimentConfig& config);

} // namespace brw
