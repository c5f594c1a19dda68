#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "brw/app.hpp"
#include "brw/config.hpp"
#include "brw/errors.hpp"
#include "brw/forest.hpp"
#include "brw/model.hpp"

namespace py = pybind11;

namespace {

py::dict laplace(const std::string& law_json, double t)
{
    const brw::LawSpec spec = brw::parse_law(law_json);
    const brw::LaplaceValue v = spec.law.laplace(t);
    py::dict d;
    d["phi"] = v.phi;
    d["psi"] = v.psi;
    d["psi_prime"] = v.psi_prime;
    d["psi_second"] = v.psi_second;
    return d;
}

double sigma2(const std::string& law_json) { return brw::parse_law(law_json).law.sigma2(); }

std::string run(const std::string& command, const std::string& config_json)
{
    const brw::ExperimentConfig config = brw::parse_config_text(config_json);
    brw::validate(config);
    py::gil_scoped_release release;
    return brw::run_command(command, config).to_json();
}

py::tuple selftest()
{
    std::ostringstream out;
    const int failures = brw::run_selftest(out);
    return py::make_tuple(failures, out.str());
}

py::dict martingale_means(const std::string& law_json, int generations, std::uint64_t replicas,
                          std::uint64_t seed, unsigned workers)
{
    const brw::LawSpec spec = brw::parse_law(law_json);
    brw::SuiteOptions o;
    o.generations = generations;
    o.replicas = replicas;
    o.seed = seed;
    o.workers = workers;
    std::vector<brw::MartingaleSeries> series;
    {
        py::gil_scoped_release release;
        series = brw::run_martingale_suite(spec.law, o, nullptr);
    }
    const brw::DepthMeans m = brw::martingale_means(series, generations);
    const auto column = [](const std::vector<brw::Estimate>& es) {
        py::list mean, se;
        for (const auto& e : es) {
            mean.append(e.mean);
            se.append(e.se);
        }
        return py::make_tuple(mean, se);
    };
    py::dict d;
    d["W"] = column(m.w1);
    d["D"] = column(m.d);
    return d;
}

} // namespace

PYBIND11_MODULE(_brwsim, m)
{
    m.doc() = "Branching random walk simulation in the boundary case";
    m.attr("__version__") = brw::kVersion;

    py::register_exception<brw::ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<brw::ValidationError>(m, "ValidationError", PyExc_ValueError);

    m.def("laplace", &laplace, py::arg("law_json"), py::arg("t") = 1.0,
          "Phi(t), Psi(t) and the first two derivatives of Psi for a law specification.");
    m.def("sigma2", &sigma2, py::arg("law_json"));
    m.def("run", &run, py::arg("command"), py::arg("config_json"),
          "Runs a command with a JSON configuration; returns the manifest as JSON.");
    m.def("selftest", &selftest, "Exact-enumeration checks: (failures, report).");
    m.def("martingale_means", &martingale_means, py::arg("law_json"), py::arg("generations"),
          py::arg("replicas"), py::arg("seed"), py::arg("workers") = 1,
          "Per-depth means and standard errors of W_n(1) and D_n.");
}
