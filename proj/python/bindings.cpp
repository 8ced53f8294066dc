#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "perihelion/dynamics.hpp"
#include "perihelion/fitting.hpp"
#include "perihelion/harness.hpp"
#include "perihelion/integrators.hpp"
#include "perihelion/mesh.hpp"
#include "perihelion/metrology.hpp"

namespace py = pybind11;
using namespace perihelion;

namespace {

py::tuple as_tuple(const Vec2 &v) { return py::make_tuple(v.x, v.y); }

Vec2 as_vec(const std::pair<Real, Real> &p) { return {p.first, p.second}; }

py::dict record_dict(const SweepRecord &r) {
  py::dict d;
  const auto opt = [](const std::optional<Real> &v) -> py::object {
    return v ? py::object(py::float_(static_cast<double>(*v))) : py::object(py::none());
  };
  d["sweep_id"] = r.sweep_id;
  d["scheme"] = r.scheme;
  d["method"] = r.method;
  d["h"] = opt(r.h);
  d["tol"] = opt(r.tol);
  d["dx"] = opt(r.dx);
  d["theta_deg"] = opt(r.theta_deg);
  d["beta"] = opt(r.beta);
  d["ecc"] = opt(r.ecc);
  d["shift_rad"] = opt(r.shift_rad);
  d["abs_shift_rad"] = opt(r.abs_shift_rad());
  d["predicted_advance_rad"] = opt(r.predicted_advance_rad);
  d["detectable"] = r.detectable;
  d["status"] = r.status;
  d["runtime_s"] = r.runtime_s;
  d["message"] = r.message;
  return d;
}

py::dict fit_dict(const FitResult &f) {
  py::dict d;
  d["model"] = std::string(to_string(f.model));
  for (const auto &[name, value] : f.coefficients) d[py::str(name)] = static_cast<double>(value);
  d["residual_rms"] = static_cast<double>(f.residual_rms);
  d["sample_count"] = f.sample_count;
  d["degenerate"] = f.degenerate;
  return d;
}

ForceModel force_by_name(const std::string &name, Real gm, Real r_sch) {
  if (name == "newtonian") return make_newtonian_force(gm);
  if (name == "relativistic") return make_relativistic_force(gm, r_sch);
  throw std::invalid_argument("force must be 'newtonian' or 'relativistic'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Perihelion-shift experiments for the two-body problem (C++ core).";

  m.attr("GM_SUN") = static_cast<double>(UnitSystem::gm_sun);
  m.attr("R_SCH_SUN") = static_cast<double>(UnitSystem::schwarzschild_radius_sun);
  m.attr("MERCURY_R_PER") = static_cast<double>(mercury::perihelion_distance);
  m.attr("MERCURY_V_PER") = static_cast<double>(mercury::perihelion_speed);
  m.attr("ARCSEC_PER_RADIAN") = static_cast<double>(arcsec_per_radian);
  m.attr("EXTENDED_PRECISION") = sizeof(Real) > sizeof(double);

  py::class_<OrbitState>(m, "OrbitState")
      .def(py::init([](Real t, std::pair<Real, Real> pos, std::pair<Real, Real> vel) {
             return OrbitState{t, as_vec(pos), as_vec(vel)};
           }),
           py::arg("t"), py::arg("pos"), py::arg("vel"))
      .def_readwrite("t", &OrbitState::t)
      .def_property_readonly("pos", [](const OrbitState &s) { return as_tuple(s.pos); })
      .def_property_readonly("vel", [](const OrbitState &s) { return as_tuple(s.vel); })
      .def("__repr__", [](const OrbitState &s) {
        std::ostringstream os;
        os.precision(17);
        os << "OrbitState(t=" << s.t << ", pos=(" << s.pos.x << ", " << s.pos.y << "), vel=("
           << s.vel.x << ", " << s.vel.y << "))";
        return os.str();
      });

  py::class_<ReferenceOrbit>(m, "ReferenceOrbit")
      .def_static("make", &ReferenceOrbit::make, py::arg("r_per"), py::arg("v_per"), py::arg("gm"),
                  py::arg("r_sch"))
      .def_static("mercury", &ReferenceOrbit::mercury)
      .def_readonly("r_per", &ReferenceOrbit::r_per)
      .def_readonly("v_per", &ReferenceOrbit::v_per)
      .def_readonly("ecc", &ReferenceOrbit::ecc)
      .def_readonly("upsilon", &ReferenceOrbit::upsilon);

  py::class_<OrbitSpec>(m, "OrbitSpec")
      .def_static("mercury", &OrbitSpec::mercury, py::arg("theta") = 0)
      .def_static("from_upsilon", &OrbitSpec::from_upsilon, py::arg("upsilon"), py::arg("ecc"),
                  py::arg("theta") = 0)
      .def_readwrite("beta", &OrbitSpec::beta)
      .def_readwrite("ecc", &OrbitSpec::ecc)
      .def_readwrite("theta", &OrbitSpec::theta)
      .def_readwrite("gm", &OrbitSpec::gm)
      .def_readwrite("r_sch", &OrbitSpec::r_sch)
      .def_readwrite("reference", &OrbitSpec::reference)
      .def_readwrite("retrograde", &OrbitSpec::retrograde)
      .def("upsilon", &OrbitSpec::upsilon)
      .def("perihelion_distance", &OrbitSpec::perihelion_distance)
      .def("perihelion_speed", &OrbitSpec::perihelion_speed)
      .def("semi_major_axis", &OrbitSpec::semi_major_axis)
      .def("period", &OrbitSpec::period)
      .def("validate", &OrbitSpec::validate);

  m.def("initial_conditions", &initial_conditions, py::arg("spec"));
  m.def("relativistic_advance_prediction", &relativistic_advance_prediction,
        py::arg("semi_major_axis"), py::arg("ecc"), py::arg("r_sch"));
  m.def(
      "diagnostics",
      [](const OrbitState &s, Real gm) {
        const Diagnostics d = diagnostics(s, gm);
        py::dict out;
        out["energy"] = static_cast<double>(d.energy);
        out["ang_mom"] = static_cast<double>(d.ang_mom);
        out["ecc_vector"] = as_tuple(d.ecc_vector);
        return out;
      },
      py::arg("state"), py::arg("gm"));
  m.def(
      "acceleration",
      [](const OrbitState &s, const std::string &force, Real gm, Real r_sch) {
        return as_tuple(force_by_name(force, gm, r_sch)(s));
      },
      py::arg("state"), py::arg("force") = "newtonian", py::arg("gm") = UnitSystem::gm_sun,
      py::arg("r_sch") = UnitSystem::schwarzschild_radius_sun);

  py::enum_<FixedStepMethod>(m, "FixedStepMethod")
      .value("EULER", FixedStepMethod::Euler)
      .value("LEAPFROG", FixedStepMethod::Leapfrog)
      .value("RK2", FixedStepMethod::RK2)
      .value("RK4", FixedStepMethod::RK4);
  m.def("parse_method", &parse_method, py::arg("name"));

  m.def(
      "integrate_fixed",
      [](const OrbitSpec &spec, Real h, std::size_t n_steps, FixedStepMethod method,
         const std::string &force) {
        const Trajectory traj = integrate_fixed(initial_conditions(spec), h, n_steps, method,
                                                force_by_name(force, spec.gm, spec.r_sch));
        py::array_t<double> out({traj.states.size(), std::size_t{5}});
        auto v = out.mutable_unchecked<2>();
        for (std::size_t k = 0; k < traj.states.size(); ++k) {
          const OrbitState &s = traj.states[k];
          v(k, 0) = static_cast<double>(s.t);
          v(k, 1) = static_cast<double>(s.pos.x);
          v(k, 2) = static_cast<double>(s.pos.y);
          v(k, 3) = static_cast<double>(s.vel.x);
          v(k, 4) = static_cast<double>(s.vel.y);
        }
        return out;
      },
      py::arg("spec"), py::arg("h"), py::arg("n_steps"), py::arg("method"),
      py::arg("force") = "newtonian",
      "Fixed-step trajectory as an (n_steps + 1, 5) array of t, x, y, vx, vy.");

  py::enum_<MeshScheme>(m, "MeshScheme")
      .value("LINEAR", MeshScheme::Linear)
      .value("BILINEAR", MeshScheme::Bilinear);
  py::enum_<LinearVariant>(m, "LinearVariant")
      .value("SYMMETRIC", LinearVariant::Symmetric)
      .value("AS_PRINTED", LinearVariant::AsPrinted);
  py::enum_<CellIndexing>(m, "CellIndexing")
      .value("FLOOR", CellIndexing::Floor)
      .value("TOWARD_ZERO", CellIndexing::TowardZero);

  py::class_<MeshSpec>(m, "MeshSpec")
      .def_static(
          "kepler",
          [](Real gm, Real dx, MeshScheme scheme, LinearVariant variant,
             std::pair<Real, Real> offset, CellIndexing indexing) {
            return MeshSpec::kepler(gm, dx, scheme, variant, as_vec(offset), indexing);
          },
          py::arg("gm"), py::arg("dx"), py::arg("scheme"),
          py::arg("variant") = LinearVariant::Symmetric,
          py::arg("offset") = std::pair<Real, Real>{0, 0},
          py::arg("indexing") = CellIndexing::Floor)
      .def_readwrite("dx", &MeshSpec::dx)
      .def_readwrite("scheme", &MeshSpec::scheme)
      .def_readwrite("linear_variant", &MeshSpec::linear_variant)
      .def_readwrite("indexing", &MeshSpec::indexing)
      .def("acceleration",
           [](const MeshSpec &mesh, Real x, Real y) {
             return as_tuple(mesh_acceleration({x, y}, mesh));
           })
      .def("locate", [](const MeshSpec &mesh, Real x, Real y) {
        const PlaquetteCoords c = locate({x, y}, mesh);
        return py::make_tuple(c.i, c.j, c.xi, c.eta);
      });

  py::enum_<ForceKind>(m, "ForceKind")
      .value("NEWTONIAN", ForceKind::Newtonian)
      .value("RELATIVISTIC", ForceKind::Relativistic)
      .value("MESH", ForceKind::Mesh);

  py::class_<IntegratorChoice>(m, "IntegratorChoice")
      .def_static("fixed", &IntegratorChoice::fixed, py::arg("method"), py::arg("h"))
      .def_static("adaptive", &IntegratorChoice::adaptive, py::arg("tol"))
      .def_property_readonly("name", &IntegratorChoice::name)
      .def_readonly("h", &IntegratorChoice::h)
      .def_readonly("tol", &IntegratorChoice::tol);

  py::class_<PointConfig>(m, "PointConfig")
      .def(py::init([](const OrbitSpec &orbit, ForceKind force, std::optional<MeshSpec> mesh,
                       std::optional<IntegratorChoice> integrator, int revolutions) {
             PointConfig c;
             c.orbit = orbit;
             c.force = force;
             c.mesh = std::move(mesh);
             if (integrator) c.integrator = *integrator;
             c.revolutions = revolutions;
             c.validate();
             return c;
           }),
           py::arg("orbit"), py::arg("force") = ForceKind::Newtonian, py::arg("mesh") = py::none(),
           py::arg("integrator") = py::none(), py::arg("revolutions") = 3)
      .def_readwrite("orbit", &PointConfig::orbit)
      .def_readwrite("force", &PointConfig::force)
      .def_readwrite("mesh", &PointConfig::mesh)
      .def_readwrite("integrator", &PointConfig::integrator)
      .def_readwrite("revolutions", &PointConfig::revolutions)
      .def_readwrite("max_steps", &PointConfig::max_steps)
      .def_readwrite("wall_clock_budget_s", &PointConfig::wall_clock_budget_s);

  m.def(
      "run_point",
      [](const PointConfig &config) {
        py::gil_scoped_release release;
        const PointResult r = run_point(config, "point:0");
        py::gil_scoped_acquire acquire;
        return record_dict(r.record);
      },
      py::arg("config"), "Measure one orbit; returns a CSV-shaped dict.");

  const auto rows_to_list = [](const std::vector<SweepRecord> &rows) {
    py::list out;
    for (const SweepRecord &r : rows) out.append(record_dict(r));
    return out;
  };

  m.def(
      "sweep_timestep",
      [rows_to_list](const std::vector<FixedStepMethod> &methods, const std::vector<Real> &hs,
                     const PointConfig &base, unsigned workers) {
        std::vector<SweepRecord> rows;
        {
          py::gil_scoped_release release;
          rows = sweep_timestep(methods, hs, base, {workers, {}});
        }
        return rows_to_list(rows);
      },
      py::arg("methods"), py::arg("h_values"), py::arg("base"), py::arg("workers") = 1);
  m.def(
      "sweep_beta",
      [rows_to_list](const std::vector<Real> &values, const PointConfig &base, unsigned workers) {
        std::vector<SweepRecord> rows;
        {
          py::gil_scoped_release release;
          rows = sweep_beta(values, base, {workers, {}});
        }
        return rows_to_list(rows);
      },
      py::arg("beta_values"), py::arg("base"), py::arg("workers") = 1);
  m.def(
      "sweep_ecc",
      [rows_to_list](const std::vector<Real> &values, const PointConfig &base, unsigned workers) {
        std::vector<SweepRecord> rows;
        {
          py::gil_scoped_release release;
          rows = sweep_ecc(values, base, {workers, {}});
        }
        return rows_to_list(rows);
      },
      py::arg("ecc_values"), py::arg("base"), py::arg("workers") = 1);
  m.def(
      "sweep_theta",
      [rows_to_list](int n_angles, const PointConfig &base, unsigned workers) {
        std::vector<SweepRecord> rows;
        {
          py::gil_scoped_release release;
          rows = sweep_theta(n_angles, base, {workers, {}});
        }
        return rows_to_list(rows);
      },
      py::arg("n_angles"), py::arg("base"), py::arg("workers") = 1);

  m.def(
      "fit_gaussian", [](const std::vector<Real> &xs) { return fit_dict(fit_gaussian(xs)); },
      py::arg("samples"));
  m.def(
      "fit_cosine",
      [](const std::vector<Real> &thetas, const std::vector<Real> &values) {
        return fit_dict(fit_cosine(thetas, values));
      },
      py::arg("thetas"), py::arg("values"));
  m.def(
      "fit_powerlaw",
      [](const std::vector<Real> &xs, const std::vector<Real> &ys) {
        return fit_dict(fit_powerlaw(xs, ys));
      },
      py::arg("xs"), py::arg("ys"));

  m.attr("CSV_HEADER") = std::string(csv_header);

  py::register_exception<MetrologyError>(m, "MetrologyError", PyExc_RuntimeError);
  py::register_exception<CollisionError>(m, "CollisionError", PyExc_RuntimeError);
  py::register_exception<StepSizeUnderflow>(m, "StepSizeUnderflow", PyExc_RuntimeError);
}
