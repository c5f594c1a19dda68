#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace brw {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

class NoBoundaryRoot : public Error {
public:
    using Error::Error;
};

class NonIntegrable : public Error {
public:
    using Error::Error;
};

class OutOfDomain : public Error {
public:
    using Error::Error;
};

/// A generation would exceed the population cap.
class PopulationCapExceeded : public Error {
public:
    PopulationCapExceeded(int depth_reached, std::uint64_t population, std::uint64_t cap)
        : Error("population cap " + std::to_string(cap) + " exceeded at depth " +
                std::to_string(depth_reached + 1) + " (would reach " +
                std::to_string(population) + ")"),
          depth_reached(depth_reached)
    {}
    int depth_reached; ///< last depth fully simulated
};

/// One offspring draw has more children than can be materialized.
class OffspringTooLarge : public Error {
public:
    explicit OffspringTooLarge(double count)
        : Error("offspring draw with " + std::to_string(count) + " children"), count(count)
    {}
    double count;
};

/// A renewal function was queried outside the range it covers.
class RIncompatible : public Error {
public:
    RIncompatible(double x, double coverage)
        : Error("renewal function queried at x=" + std::to_string(x) +
                " beyond its coverage " + std::to_string(coverage)),
          x(x), coverage(coverage)
    {}
    double x;
    double coverage;
};

class EnvelopeMissing : public Error {
public:
    using Error::Error;
};

class ExcursionOverrun : public Error {
public:
    explicit ExcursionOverrun(std::uint64_t budget)
        : Error("excursion exceeded the step budget of " + std::to_string(budget)),
          budget(budget)
    {}
    std::uint64_t budget;
};

class EnumerationTooLarge : public Error {
public:
    using Error::Error;
};

class NotMonotone : public Error {
public:
    using Error::Error;
};

/// Malformed input file; `where` names the field or line.
class ParseError : public Error {
public:
    ParseError(std::string where, const std::string& what)
        : Error(where + ": " + what), where(std::move(where))
    {}
    std::string where;
};

/// A configuration that parsed but violates its schema constraints.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(join(violations)), violations(std::move(violations))
    {}
    std::vector<std::string> violations;

private:
    static std::string join(const std::vector<std::string>& v)
    {
        std::string out = "invalid configuration:";
        for (const auto& s : v) {
            out += "\n  - " + s;
        }
        return out;
    }
};

} // namespace brw
