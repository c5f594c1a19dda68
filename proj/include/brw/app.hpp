#pragma once

// Command runners shared by the command line tool and the Python module.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "brw/config.hpp"
#include "brw/walk.hpp"

namespace brw {

inline constexpr const char* kVersion = "0.1.0";

/// Record of one run: rerunning its "config" reproduces the CSVs byte for byte.
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    std::string config;      ///< effective configuration as JSON
    std::string config_hash; ///< FNV-1a of `config`, hex
    std::vector<std::string> substreams;
    std::string version = kVersion;
    double wall_seconds = 0.0;
    std::vector<std::string> outputs;
    std::vector<std::string> errors;
    std::string to_json() const;
};

/// Effective configuration as a JSON document accepted by parse_config_text.
std::string config_to_json(const ExperimentConfig& config);

/// The renewal function used for `law`: exact on the lattice law, a table
/// read from config.table if given, otherwise a fresh Monte Carlo estimate
/// (unit-variance for the Gaussian families, rescaled by sigma).
RHandle build_renewal(const OffspringLaw& law, const RenewalConfig& config, std::uint64_t seed,
                      unsigned workers);

/// Runs simulate | renewal | conditioned | spine | criterion | dichotomy,
/// writes CSVs and manifest.json into config.out and returns the manifest.
/// Module errors are recorded in the manifest and rethrown.
RunManifest run_command(const std::string& command, const ExperimentConfig& config);

/// Exact-enumeration oracle suites; prints one line per check and returns the
/// number of failures.
int run_selftest(std::ostream& out);

} // namespace brw
