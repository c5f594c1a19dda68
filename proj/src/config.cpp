#include "brw/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "brw/errors.hpp"

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

json parse_json(const std::string& text, const std::string& where)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(where + " line " + std::to_string(line) + " column " +
                             std::to_string(col),
                         "malformed JSON");
    }
}

/// Reads typed fields of one JSON object, recording violations instead of
/// throwing, and flags keys nobody asked for.
class Section {
public:
    Section(const json& obj, std::string name, std::vector<std::string>& violations)
        : obj_(obj), name_(std::move(name)), v_(violations)
    {
        if (!obj_.is_object()) {
            v_.push_back(name_ + ": expected a JSON object");
        }
    }

    bool has(const char* key)
    {
        known_.insert(key);
        return obj_.is_object() && obj_.contains(key) && !obj_.at(key).is_null();
    }

    const json& at(const char* key) const { return obj_.at(key); }
    std::string path(const char* key) const { return name_ + "." + key; }

    void get(const char* key, std::uint64_t& out)
    {
        if (!has(key)) {
            return;
        }
        const json& j = obj_.at(key);
        if (j.is_number_unsigned()) {
            out = j.get<std::uint64_t>();
        } else if (j.is_number_float() && j.get<double>() >= 0.0 &&
                   j.get<double>() == std::floor(j.get<double>()) && j.get<double>() < 1.8e19) {
            out = static_cast<std::uint64_t>(j.get<double>());
        } else {
            v_.push_back(path(key) + ": expected a non-negative integer");
        }
    }

    void get(const char* key, int& out)
    {
        std::uint64_t v = static_cast<std::uint64_t>(std::max(out, 0));
        const std::size_t before = v_.size();
        get(key, v);
        if (v_.size() == before) {
            if (v > 1000000) {
                v_.push_back(path(key) + ": value too large");
            } else {
                out = static_cast<int>(v);
            }
        }
    }

    void get(const char* key, unsigned& out)
    {
        std::uint64_t v = out;
        get(key, v);
        out = static_cast<unsigned>(std::min<std::uint64_t>(v, 4096));
    }

    void get(const char* key, double& out)
    {
        if (!has(key)) {
            return;
        }
        const json& j = obj_.at(key);
        if (j.is_number()) {
            out = j.get<double>();
            if (!std::isfinite(out)) {
                v_.push_back(path(key) + ": must be finite");
            }
        } else {
            v_.push_back(path(key) + ": expected a number");
        }
    }

    void get(const char* key, std::optional<double>& out)
    {
        if (!has(key)) {
            return;
        }
        double v = 0.0;
        get(key, v);
        out = v;
    }

    void get(const char* key, bool& out)
    {
        if (!has(key)) {
            return;
        }
        if (obj_.at(key).is_boolean()) {
            out = obj_.at(key).get<bool>();
        } else {
            v_.push_back(path(key) + ": expected true or false");
        }
    }

    void get(const char* key, std::string& out)
    {
        if (!has(key)) {
            return;
        }
        if (obj_.at(key).is_string()) {
            out = obj_.at(key).get<std::string>();
        } else {
            v_.push_back(path(key) + ": expected a string");
        }
    }

    void get(const char* key, std::vector<double>& out)
    {
        if (!has(key)) {
            return;
        }
        const json& j = obj_.at(key);
        if (!j.is_array()) {
            v_.push_back(path(key) + ": expected an array of numbers");
            return;
        }
        std::vector<double> vals;
        for (const auto& e : j) {
            if (!e.is_number()) {
                v_.push_back(path(key) + ": expected an array of numbers");
                return;
            }
            vals.push_back(e.get<double>());
        }
        out = std::move(vals);
    }

    /// Records every key that no getter asked for.
    void finish()
    {
        if (!obj_.is_object()) {
            return;
        }
        for (const auto& [k, val] : obj_.items()) {
            if (!known_.contains(k)) {
                v_.push_back(name_ + ": unknown key '" + k + "'");
            }
        }
    }

private:
    const json& obj_;
    std::string name_;
    std::vector<std::string>& v_;
    std::set<std::string> known_;
};

std::optional<OffspringLaw> build_law(const json& j, const std::string& where,
                                      std::vector<std::string>& v)
{
    Section top(j, where, v);
    if (!j.is_object()) {
        return std::nullopt;
    }
    std::string family;
    bool normalize = true;
    top.get("family", family);
    top.get("normalize", normalize);
    const bool has_params = top.has("params");
    top.finish();
    static const json empty = json::object();
    const json& pj = has_params ? j.at("params") : empty;
    Section params(pj, where + ".params", v);

    std::optional<OffspringLaw> law;
    const std::size_t before = v.size();
    if (family.empty()) {
        v.push_back(where + ".family: missing");
        return std::nullopt;
    }
    try {
        if (family == "BinaryGaussian") {
            double mean = 0.0, sd = 1.0;
            params.get("mean", mean);
            params.get("sd", sd);
            if (!(sd > 0.0)) {
                v.push_back(where + ".params.sd: must be > 0");
            }
            if (v.size() == before) {
                law = OffspringLaw::binary_gaussian(mean, sd);
            }
        } else if (family == "LatticeBinary") {
            law = OffspringLaw::lattice_binary();
        } else if (family == "HeavyCount") {
            double theta = 0.0, mean = 0.0, sd = 1.0;
            if (!params.has("theta")) {
                v.push_back(where + ".params.theta: missing");
            }
            params.get("theta", theta);
            params.get("mean", mean);
            params.get("sd", sd);
            if (params.has("theta") && !(theta > 1.0)) {
                v.push_back(where + ".params.theta: θ must exceed 1 (E[N] is infinite otherwise)");
            }
            if (!(sd > 0.0)) {
                v.push_back(where + ".params.sd: must be > 0");
            }
            if (v.size() == before) {
                law = OffspringLaw::heavy_count(theta, mean, sd);
            }
        } else if (family == "UserTable") {
            std::optional<double> span;
            params.get("lattice_span", span);
            std::vector<TableAtom> atoms;
            if (!params.has("atoms") || !pj.at("atoms").is_array() || pj.at("atoms").empty()) {
                v.push_back(where + ".params.atoms: expected a non-empty array");
            } else {
                std::size_t i = 0;
                for (const auto& aj : pj.at("atoms")) {
                    const std::string name = where + ".params.atoms[" + std::to_string(i++) + "]";
                    Section a(aj, name, v);
                    TableAtom atom;
                    a.get("p", atom.probability);
                    a.get("displacements", atom.displacements);
                    if (!a.has("p")) {
                        v.push_back(name + ".p: missing");
                    }
                    if (!a.has("displacements")) {
                        v.push_back(name + ".displacements: missing");
                    }
                    a.finish();
                    atoms.push_back(std::move(atom));
                }
            }
            if (v.size() == before) {
                law = OffspringLaw::user_table(std::move(atoms), span);
            }
        } else {
            v.push_back(where + ".family: unknown family '" + family +
                        "' (BinaryGaussian, LatticeBinary, HeavyCount, UserTable)");
        }
    } catch (const PreconditionError& e) {
        v.push_back(where + ": " + e.what());
        law.reset();
    }
    params.finish();
    if (!law || !normalize) {
        return law;
    }
    return normalize_to_boundary(*law);
}

std::optional<LawSpec> law_entry(Section& top, const char* key, const std::string& base_dir,
                                 std::vector<std::string>& v)
{
    if (!top.has(key)) {
        return std::nullopt;
    }
    const json& j = top.at(key);
    json spec;
    std::string where = key;
    if (j.is_string()) {
        std::filesystem::path p(j.get<std::string>());
        if (p.is_relative()) {
            p = std::filesystem::path(base_dir) / p;
        }
        where = p.string();
        spec = parse_json(read_file(p.string()), where);
    } else {
        spec = j;
    }
    auto law = build_law(spec, where, v);
    if (!law) {
        return std::nullopt;
    }
    return LawSpec{spec.dump(), std::move(*law)};
}

} // namespace

LawSpec parse_law(const std::string& json_text, const std::string& where)
{
    const json j = parse_json(json_text, where);
    std::vector<std::string> v;
    auto law = build_law(j, where, v);
    if (!v.empty() || !law) {
        throw ValidationError(v);
    }
    return {j.dump(), std::move(*law)};
}

LawSpec load_law(const std::string& path)
{
    return parse_law(read_file(path), path);
}

ExperimentConfig parse_config_text(const std::string& text, bool test_mode,
                                   const std::string& base_dir)
{
    const json j = parse_json(text, "config");
    std::vector<std::string> v;
    ExperimentConfig c;
    Section top(j, "config", v);
    if (!j.is_object()) {
        throw ValidationError(v);
    }
    if (top.has("seed")) {
        std::uint64_t seed = 0;
        top.get("seed", seed);
        c.seed = seed;
    }
    top.get("workers", c.workers);
    top.get("out", c.out);
    top.get("test_mode", c.test_mode);
    c.test_mode = c.test_mode || test_mode;
    c.law = law_entry(top, "law", base_dir, v);
    c.law_b = law_entry(top, "law_b", base_dir, v);

    static const json empty = json::object();
    const auto section = [&](const char* key) -> const json& {
        return top.has(key) ? j.at(key) : empty;
    };
    {
        Section s(section("simulate"), "simulate", v);
        s.get("generations", c.simulate.generations);
        s.get("replicas", c.simulate.replicas);
        s.get("barrier", c.simulate.barrier);
        s.get("audit", c.simulate.audit);
        s.get("cap", c.simulate.cap);
        s.get("start", c.simulate.start);
        s.finish();
    }
    {
        Section s(section("renewal"), "renewal", v);
        s.get("excursions", c.renewal.excursions);
        s.get("grid_max", c.renewal.grid_max);
        s.get("cell_width", c.renewal.cell_width);
        s.get("budget", c.renewal.budget);
        s.get("table", c.renewal.table);
        s.get("linear_tail", c.renewal.linear_tail);
        s.finish();
        if (!c.renewal.table.empty() && std::filesystem::path(c.renewal.table).is_relative()) {
            c.renewal.table = (std::filesystem::path(base_dir) / c.renewal.table).string();
        }
    }
    {
        Section s(section("conditioned"), "conditioned", v);
        s.get("horizon", c.conditioned.horizon);
        s.get("paths", c.conditioned.paths);
        s.get("F", c.conditioned.f_table);
        s.get("F_power", c.conditioned.f_power);
        s.get("plateau", c.conditioned.plateau);
        s.get("divergent", c.conditioned.divergent);
        s.get("budget", c.conditioned.budget);
        s.finish();
        if (!c.conditioned.f_table.empty() &&
            std::filesystem::path(c.conditioned.f_table).is_relative()) {
            c.conditioned.f_table =
                (std::filesystem::path(base_dir) / c.conditioned.f_table).string();
        }
    }
    {
        Section s(section("spine"), "spine", v);
        s.get("horizon", c.spine.horizon);
        s.get("replicas", c.spine.replicas);
        s.get("start", c.spine.start);
        s.finish();
    }
    {
        Section s(section("criterion"), "criterion", v);
        s.get("horizon", c.criterion.horizon);
        s.get("paths", c.criterion.paths);
        s.get("draws", c.criterion.draws);
        s.get("y", c.criterion.y);
        s.get("plateau", c.criterion.plateau);
        s.get("divergent", c.criterion.divergent);
        s.get("clt_threshold", c.criterion.clt_threshold);
        s.get("importance", c.criterion.importance);
        s.finish();
    }
    {
        Section s(section("dichotomy"), "dichotomy", v);
        s.get("generations", c.dichotomy.generations);
        s.get("forest_replicas", c.dichotomy.forest_replicas);
        s.get("cap", c.dichotomy.cap);
        s.get("moment_draws", c.dichotomy.moment_draws);
        s.get("caps", c.dichotomy.caps);
        s.get("tail_y", c.dichotomy.tail_y);
        s.finish();
    }
    top.finish();
    c.canonical = j.dump();
    try {
        validate(c);
    } catch (const ValidationError& e) {
        v.insert(v.end(), e.violations.begin(), e.violations.end());
    }
    if (!v.empty()) {
        throw ValidationError(v);
    }
    return c;
}

ExperimentConfig parse_config(const std::string& path, bool test_mode)
{
    const auto base = std::filesystem::path(path).parent_path();
    return parse_config_text(read_file(path), test_mode, base.empty() ? "." : base.string());
}

void validate(const ExperimentConfig& c)
{
    std::vector<std::string> v;
    const auto at_least_one = [&](const char* name, std::uint64_t x) {
        if (x < 1) {
            v.push_back(std::string(name) + ": must be >= 1");
        }
    };
    if (c.test_mode && !c.seed) {
        v.push_back("seed: required in test mode");
    }
    at_least_one("workers", c.workers);
    at_least_one("simulate.replicas", c.simulate.replicas);
    at_least_one("simulate.cap", c.simulate.cap);
    if (c.simulate.generations < 0) {
        v.push_back("simulate.generations: must be >= 0");
    }
    if (c.simulate.barrier && *c.simulate.barrier < 0.0) {
        v.push_back("simulate.barrier: beta must be >= 0");
    }
    if (c.simulate.barrier && c.simulate.start < -*c.simulate.barrier) {
        v.push_back("simulate.start: must be >= -barrier");
    }
    at_least_one("renewal.excursions", c.renewal.excursions);
    at_least_one("renewal.budget", c.renewal.budget);
    if (c.renewal.grid_max < 0.0 || c.renewal.cell_width < 0.0) {
        v.push_back("renewal: grid_max and cell_width must be >= 0");
    }
    at_least_one("conditioned.horizon", c.conditioned.horizon);
    at_least_one("conditioned.paths", c.conditioned.paths);
    at_least_one("conditioned.budget", c.conditioned.budget);
    if (c.conditioned.f_table.empty() && !(c.conditioned.f_power >= 0.0)) {
        v.push_back("conditioned.F_power: must be >= 0");
    }
    if (!(c.conditioned.plateau > 0.0 && c.conditioned.plateau < c.conditioned.divergent)) {
        v.push_back("conditioned: need 0 < plateau < divergent");
    }
    if (c.spine.horizon < 0) {
        v.push_back("spine.horizon: must be >= 0");
    }
    at_least_one("spine.replicas", c.spine.replicas);
    if (c.spine.start < 0.0) {
        v.push_back("spine.start: must be >= 0");
    }
    if (c.criterion.horizon < 2) {
        v.push_back("criterion.horizon: must be >= 2");
    }
    at_least_one("criterion.paths", c.criterion.paths);
    at_least_one("criterion.draws", c.criterion.draws);
    if (c.criterion.y.empty()) {
        v.push_back("criterion.y: at least one threshold needed");
    }
    for (double y : c.criterion.y) {
        if (!(y > 0.0)) {
            v.push_back("criterion.y: thresholds must be > 0");
            break;
        }
    }
    if (!(c.criterion.plateau > 0.0 && c.criterion.plateau < c.criterion.divergent)) {
        v.push_back("criterion: need 0 < plateau < divergent");
    }
    if (!(c.criterion.clt_threshold >= 1.0)) {
        v.push_back("criterion.clt_threshold: must be >= 1");
    }
    at_least_one("dichotomy.forest_replicas", c.dichotomy.forest_replicas);
    at_least_one("dichotomy.cap", c.dichotomy.cap);
    if (c.dichotomy.moment_draws < 2) {
        v.push_back("dichotomy.moment_draws: must be >= 2");
    }
    if (c.dichotomy.caps.empty()) {
        v.push_back("dichotomy.caps: at least one cap needed");
    }
    for (double k : c.dichotomy.caps) {
        if (!(k >= 1.0)) {
            v.push_back("dichotomy.caps: caps must be >= 1");
            break;
        }
    }
    if (!(c.dichotomy.tail_y >= 1.0)) {
        v.push_back("dichotomy.tail_y: must be >= 1");
    }
    if (!v.empty()) {
        throw ValidationError(v);
    }
}

} // namespace brw
