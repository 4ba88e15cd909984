#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ifdyn/coupling.hpp"
#include "ifdyn/error.hpp"
#include "ifdyn/harness.hpp"
#include "ifdyn/schedule.hpp"
#include "ifdyn/sos.hpp"
#include "ifdyn/spectral.hpp"

namespace py = pybind11;
using namespace ifdyn;

namespace {

SosModel sos_model(int L, int h, std::optional<int> M, bool wall) { return {L, h, M, wall}; }

py::dict schedule_dict(const CapSchedule& s) {
  py::dict d;
  d["L"] = s.L;
  d["u"] = s.u;
  d["R"] = s.R;
  d["t"] = s.t;
  d["bound_ratio"] = s.bound_ratio;
  d["bound_ok"] = s.bound_ok;
  d["half_steps_ok"] = s.half_steps_ok;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ifdyn, m) {
  m.doc() = "Interface dynamics: SOS and monotone surface Glauber chains";
  py::register_exception<Error>(m, "IfdynError", PyExc_ValueError);

  m.def(
      "glauber_rates",
      [](int left, int eta, int right) {
        const auto r = glauber_rates(left, eta, right);
        return py::make_tuple(r.down, r.up);
      },
      py::arg("left"), py::arg("eta"), py::arg("right"), "(down, up) jump rates at a site with the given neighbors");

  m.def(
      "sos_exact_sample",
      [](int L, int h, std::optional<int> M, bool wall, std::uint64_t seed, std::uint64_t index) {
        const SosExactSampler gibbs(sos_model(L, h, M, wall).bottom());
        CounterRng rng = CounterRng::stream(seed, index);
        const auto p = gibbs.sample(rng);
        return std::vector<int>(p.interior().begin(), p.interior().end());
      },
      py::arg("L"), py::arg("h") = 0, py::arg("M") = py::none(), py::arg("wall") = false, py::arg("seed") = 0,
      py::arg("index") = 0);

  m.def(
      "sos_gap",
      [](int L, int h, std::optional<int> M) {
        const auto g = exact_gap(build_generator(enumerate_states(sos_model(L, h, M, false).bottom())));
        py::dict d;
        d["gap"] = g.gap;
        d["method"] = g.method;
        d["residual"] = g.residual;
        return d;
      },
      py::arg("L"), py::arg("h") = 0, py::arg("M") = py::none());

  m.def(
      "sos_coalescence_time",
      [](int L, int h, std::uint64_t seed, std::uint64_t replica, double horizon) {
        const auto r = coalescence_time(sos_model(L, h, std::nullopt, false), seed, replica, horizon);
        return py::make_tuple(r.time, r.censored);
      },
      py::arg("L"), py::arg("h") = 0, py::arg("seed") = 0, py::arg("replica") = 0, py::arg("horizon") = 1e7);

  m.def(
      "sos_cftp",
      [](int L, int h, std::uint64_t seed, std::uint64_t sample) {
        return cftp_sample(sos_model(L, h, std::nullopt, false), seed, sample).state;
      },
      py::arg("L"), py::arg("h") = 0, py::arg("seed") = 0, py::arg("sample") = 0);

  m.def(
      "fit_scaling",
      [](const std::vector<std::pair<double, double>>& points) {
        const auto f = fit_scaling(points);
        py::dict d;
        d["z"] = f.z;
        d["intercept"] = f.intercept;
        d["residual"] = f.residual;
        d["band"] = py::make_tuple(f.lo, f.hi);
        return d;
      },
      py::arg("points"));

  m.def(
      "schedule_sos", [](int L, const std::string& profile) { return schedule_dict(schedule_sos(L, sos_profile(profile))); },
      py::arg("L"), py::arg("profile") = "asymptotic");
  m.def(
      "schedule_surface",
      [](int L, const std::string& profile) { return schedule_dict(schedule_surface(L, surface_profile(profile))); },
      py::arg("L"), py::arg("profile") = "asymptotic");

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const auto rep = run_experiment(config_from_json(nlohmann::json::parse(config_json)));
        return py::make_tuple(rep.files, rep.summary.dump());
      },
      py::arg("config_json"), "Runs an experiment from a JSON config; returns (files, summary JSON)");
}
