#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>

#include "perihelion/mesh.hpp"
#include "support.hpp"

using namespace perihelion;
using test_support::rel_diff;
using test_support::vec_rel_diff;

namespace {

class AffinePotential final : public Potential {
 public:
  AffinePotential(Real c, Real gx, Real gy) : c_(c), gx_(gx), gy_(gy) {}
  Real value(const Vec2 &p) const override { return c_ + gx_ * p.x + gy_ * p.y; }

 private:
  Real c_, gx_, gy_;
};

// Node values set by hand; any query off the table is a test bug.
class TablePotential final : public Potential {
 public:
  TablePotential(Real dx, std::map<std::pair<int, int>, Real> nodes)
      : dx_(dx), nodes_(std::move(nodes)) {}
  Real value(const Vec2 &p) const override {
    const auto key = std::make_pair(static_cast<int>(std::lround(p.x / dx_)),
                                    static_cast<int>(std::lround(p.y / dx_)));
    const auto it = nodes_.find(key);
    if (it == nodes_.end()) throw std::logic_error("node outside the test table");
    return it->second;
  }

 private:
  Real dx_;
  std::map<std::pair<int, int>, Real> nodes_;
};

// Phi(i, j) for i, j in -1..2, row index i + 1.
std::map<std::pair<int, int>, Real> hand_table() {
  const int vals[4][4] = {{3, -1, 4, 1}, {5, -9, 2, 6}, {5, 3, -5, 8}, {9, 7, -9, 3}};
  std::map<std::pair<int, int>, Real> t;
  for (int i = -1; i <= 2; ++i)
    for (int j = -1; j <= 2; ++j) t[{i, j}] = vals[i + 1][j + 1];
  return t;
}

MeshSpec mesh_with(std::shared_ptr<const Potential> p, Real dx, MeshScheme scheme,
                   LinearVariant variant = LinearVariant::Symmetric) {
  MeshSpec m;
  m.dx = dx;
  m.potential = std::move(p);
  m.scheme = scheme;
  m.linear_variant = variant;
  m.validate();
  return m;
}

Vec2 exact_kepler_accel(const Vec2 &p, Real gm) {
  const Real r = norm(p);
  return p * (-gm / (r * r * r));
}

Vec2 random_point(std::mt19937_64 &gen, Real r_lo, Real r_hi) {
  std::uniform_real_distribution<double> radius(r_lo, r_hi);
  std::uniform_real_distribution<double> angle(-pi, pi);
  const Real r = radius(gen);
  const Real a = angle(gen);
  return {r * std::cos(a), r * std::sin(a)};
}

}  // namespace

TEST_CASE("locate splits coordinates into cell and fraction") {
  const MeshSpec m = MeshSpec::kepler(1, 1, MeshScheme::Bilinear);
  SUBCASE("interior point") {
    const auto c = locate({2.5, 3.25}, m);
    CHECK(c.i == 2);
    CHECK(c.j == 3);
    CHECK(c.xi == 0.5);
    CHECK(c.eta == 0.25);
  }
  SUBCASE("node") {
    const auto c = locate({3, -4}, m);
    CHECK(c.i == 3);
    CHECK(c.j == -4);
    CHECK(c.xi == 0);
    CHECK(c.eta == 0);
  }
  SUBCASE("negative coordinates use floor") {
    const auto c = locate({-0.25, 0}, m);
    CHECK(c.i == -1);
    CHECK(c.xi == 0.75);
    CHECK(c.j == 0);
  }
  SUBCASE("toward-zero indexing keeps the integer part") {
    const MeshSpec t = MeshSpec::kepler(1, 1, MeshScheme::Bilinear, LinearVariant::Symmetric, {},
                                        CellIndexing::TowardZero);
    const auto c = locate({-0.25, -2.5}, t);
    CHECK(c.i == 0);
    CHECK(c.xi == -0.25);
    CHECK(c.j == -2);
    CHECK(c.eta == -0.5);
    const auto p = locate({2.5, 3.25}, t);
    CHECK(p.i == 2);
    CHECK(p.xi == 0.5);
  }
  SUBCASE("offset and spacing") {
    const MeshSpec o = MeshSpec::kepler(1, 0.5, MeshScheme::Bilinear, LinearVariant::Symmetric,
                                        {0.5, 0.25});
    const auto c = locate({0, 0}, o);
    CHECK(c.i == -1);
    CHECK(c.xi == 0.5);
    CHECK(c.j == -1);
    CHECK(c.eta == 0.75);
    CHECK(o.node_position(1, 2) == Vec2{0.75, 1.125});
  }
  SUBCASE("non-finite points are rejected") {
    CHECK_THROWS_AS(locate({std::nan(""), 0}, m), std::domain_error);
    CHECK_THROWS_AS(locate({0, HUGE_VAL}, m), std::domain_error);
  }
}

TEST_CASE("locate reconstructs the point") {
  auto gen = test_support::rng(5);
  std::uniform_real_distribution<double> coord(-100, 100);
  std::uniform_real_distribution<double> frac(0, 1);
  for (int n = 0; n < 500; ++n) {
    const Real dx = std::pow(10.0, coord(gen) / 50);  // 1e-2 .. 1e2
    const MeshSpec m = MeshSpec::kepler(1, dx, MeshScheme::Bilinear, LinearVariant::Symmetric,
                                        {frac(gen), frac(gen)});
    const Vec2 p{coord(gen), coord(gen)};
    const auto c = locate(p, m);
    CHECK(c.xi >= 0);
    CHECK(c.xi < 1);
    CHECK(c.eta >= 0);
    CHECK(c.eta < 1);
    const Vec2 back{(static_cast<Real>(c.i) + c.xi + m.origin_offset.x) * dx,
                    (static_cast<Real>(c.j) + c.eta + m.origin_offset.y) * dx};
    CHECK(norm(back - p) <= 1e-12 * std::max<Real>(1, norm(p)));
  }
}

TEST_CASE("mesh spec validation") {
  CHECK_THROWS_AS(MeshSpec::kepler(1, 0, MeshScheme::Linear), std::invalid_argument);
  CHECK_THROWS_AS(MeshSpec::kepler(1, -1, MeshScheme::Linear), std::invalid_argument);
  CHECK_THROWS_AS(MeshSpec::kepler(1, 1, MeshScheme::Linear, LinearVariant::Symmetric, {1, 0}),
                  std::invalid_argument);
  MeshSpec empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
  CHECK_THROWS_AS(make_mesh_force(empty), std::invalid_argument);
  CHECK(parse_scheme("Linear") == MeshScheme::Linear);
  CHECK(parse_variant("as-printed") == LinearVariant::AsPrinted);
  CHECK(parse_indexing("truncate") == CellIndexing::TowardZero);
  CHECK_THROWS_AS(parse_scheme("cic"), std::invalid_argument);
}

TEST_CASE("central gradient of the Kepler potential") {
  const MeshSpec m = MeshSpec::kepler(1, 1, MeshScheme::Bilinear);
  const Vec2 f = nodal_gradient_central(10, 0, m);
  CHECK(f.x == doctest::Approx((-1.0 / 11 + 1.0 / 9) / 2).epsilon(1e-14));
  CHECK(f.y == 0);
  // A stencil reaching the Sun's node is a domain error.
  CHECK_THROWS_AS(nodal_gradient_central(1, 0, m), std::domain_error);
  CHECK_THROWS_AS(force_bilinear(Vec2{0.5, 0.5}, m), std::domain_error);
}

TEST_CASE("difference of nearby nodes keeps its precision") {
  const KeplerPotential phi(132733);
  const Vec2 lo{46.0, 0.001};
  const Vec2 hi{46.0 + 1e-6, 0.001};
  // d(-GM/r)/dx * dx to first order, plus the second-order term.
  const long double r = std::hypot(46.0L, 0.001L);
  const long double oracle = 132733.0L * 46.0L / (r * r * r) * 1e-6L;
  CHECK(rel_diff(phi.difference(hi, lo), static_cast<Real>(oracle)) < 1e-6);
  CHECK(rel_diff(phi.difference(hi, lo), phi.value(hi) - phi.value(lo)) < 1e-6);
}

TEST_CASE("central gradient is x/y symmetric for the radial potential") {
  const MeshSpec m = MeshSpec::kepler(132733, 0.1, MeshScheme::Bilinear);
  auto gen = test_support::rng(17);
  std::uniform_int_distribution<int> idx(-600, 600);
  for (int n = 0; n < 200; ++n) {
    const int i = idx(gen);
    const int j = idx(gen);
    if (std::abs(i) + std::abs(j) < 3) continue;
    const Vec2 a = nodal_gradient_central(i, j, m);
    const Vec2 b = nodal_gradient_central(j, i, m);
    CHECK(rel_diff(a.x, b.y) < 1e-14);
  }
}

TEST_CASE("affine potentials are reproduced exactly") {
  const auto phi = std::make_shared<AffinePotential>(0.5, 3, -2);
  auto gen = test_support::rng(3);
  std::uniform_real_distribution<double> coord(-20, 20);
  for (auto scheme : {MeshScheme::Bilinear, MeshScheme::Linear}) {
    for (auto variant : {LinearVariant::Symmetric, LinearVariant::AsPrinted}) {
      const MeshSpec m = mesh_with(phi, 0.25, scheme, variant);
      const Vec2 g = nodal_gradient_central(3, -7, m);
      CHECK(g.x == doctest::Approx(3).epsilon(1e-12));
      CHECK(g.y == doctest::Approx(-2).epsilon(1e-12));
      for (int n = 0; n < 50; ++n) {
        const Vec2 a = mesh_acceleration({coord(gen), coord(gen)}, m);
        CHECK(a.x == doctest::Approx(-3).epsilon(1e-12));
        CHECK(a.y == doctest::Approx(2).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("bilinear force on a hand-set plaquette") {
  const Real dx = 0.5;
  const auto phi = std::make_shared<TablePotential>(dx, hand_table());
  const MeshSpec m = mesh_with(phi, dx, MeshScheme::Bilinear);
  // Corner gradients on the unit mesh: a (2, -3/2), b (8, -5), c (-9/2, 15/2),
  // d (-11/2, 5/2); at xi = 1/4, eta = 3/4 the force is (43/16, -131/32) / dx.
  const Vec2 a = force_bilinear(Vec2{0.25 * dx, 0.75 * dx}, m);
  CHECK(a.x == doctest::Approx(43.0 / 16 / dx).epsilon(1e-14));
  CHECK(a.y == doctest::Approx(-131.0 / 32 / dx).epsilon(1e-14));
  // Corners reproduce the nodal gradients exactly.
  const Vec2 corner = force_bilinear(PlaquetteCoords{0, 0, 1, 0}, m);
  CHECK(corner.x == -8 / dx);
  CHECK(corner.y == 5 / dx);
  const Vec2 node = force_bilinear(Vec2{0, 0}, m);
  CHECK(node == -nodal_gradient_central(0, 0, m));
}

TEST_CASE("linear force on a hand-set 2x3 patch") {
  const Real dx = 0.5;
  const auto phi = std::make_shared<TablePotential>(dx, hand_table());
  const Vec2 p{0.25 * dx, 0.75 * dx};
  const Vec2 sym = force_linear(p, mesh_with(phi, dx, MeshScheme::Linear));
  CHECK(sym.x == doctest::Approx(9.0 / 4 / dx).epsilon(1e-14));
  CHECK(sym.y == doctest::Approx(-25.0 / 4 / dx).epsilon(1e-14));
  const Vec2 printed =
      force_linear(p, mesh_with(phi, dx, MeshScheme::Linear, LinearVariant::AsPrinted));
  CHECK(printed.x == sym.x);
  CHECK(printed.y == doctest::Approx(11.0 / 4 / dx).epsilon(1e-14));
}

TEST_CASE("bilinear node reproduction on the Kepler lattice") {
  const MeshSpec m = MeshSpec::kepler(132733, 0.1, MeshScheme::Bilinear);
  auto gen = test_support::rng(8);
  for (int n = 0; n < 100; ++n) {
    const Vec2 p = random_point(gen, 20, 80);
    const auto c = locate(p, m);
    const Vec2 grad = nodal_gradient_central(c.i, c.j, m);
    CHECK(force_bilinear(PlaquetteCoords{c.i, c.j, 0, 0}, m) == -grad);
    // Through locate the node may land on either side of a cell boundary.
    CHECK(test_support::vec_rel_diff(force_bilinear(m.node_position(c.i, c.j), m), -grad) < 1e-12);
  }
}

TEST_CASE("bilinear force is continuous across random edges") {
  auto gen = test_support::rng(1000);
  std::uniform_real_distribution<double> log_dx(-2, 0);
  std::uniform_real_distribution<double> along(0, 1);
  std::bernoulli_distribution horizontal(0.5);
  Real worst = 0;
  for (int n = 0; n < 1000; ++n) {
    const Real dx = std::pow(10.0, log_dx(gen));
    const MeshSpec m = MeshSpec::kepler(132733, dx, MeshScheme::Bilinear);
    const auto c = locate(random_point(gen, 20, 80), m);
    const Edge e{c.i, c.j,
                 horizontal(gen) ? EdgeOrientation::Horizontal : EdgeOrientation::Vertical};
    const EdgeJump j = continuity_probe(e, m, along(gen));
    worst = std::max(worst, std::hypot(j.jump_x, j.jump_y) / j.force_magnitude);
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("linear force jumps across horizontal edges") {
  const MeshSpec m = MeshSpec::kepler(132733, 0.1, MeshScheme::Linear);
  const auto c = locate({30, 35}, m);
  const EdgeJump jump = continuity_probe({c.i, c.j, EdgeOrientation::Horizontal}, m, 0.5);
  // The tangential component is continuous across the a-b edge.
  CHECK(std::abs(jump.jump_x) < 1e-12 * jump.force_magnitude);
  // The normal-interpolated one jumps by the mean second difference / dx.
  const auto second_diff = [&](std::int64_t i) {
    const KeplerPotential &phi = static_cast<const KeplerPotential &>(*m.potential);
    return phi.difference(m.node_position(i, c.j + 1), m.node_position(i, c.j)) -
           phi.difference(m.node_position(i, c.j), m.node_position(i, c.j - 1));
  };
  const Real expected = -(second_diff(c.i) + second_diff(c.i + 1)) / 2 / m.dx;
  CHECK(jump.jump_y != 0);
  CHECK(rel_diff(jump.jump_y, expected) < 1e-6);
}

TEST_CASE("linear jump halves with dx") {
  for (auto variant : {LinearVariant::Symmetric, LinearVariant::AsPrinted}) {
    for (const Vec2 where : {Vec2{30, 35}, Vec2{-40, 12}, Vec2{5, -46}}) {
      Real previous = 0;
      for (Real dx : {0.2, 0.1, 0.05}) {
        const MeshSpec m = MeshSpec::kepler(132733, dx, MeshScheme::Linear, variant);
        const auto c = locate(where, m);
        const Real jump =
            std::abs(continuity_probe({c.i, c.j, EdgeOrientation::Horizontal}, m).jump_y);
        if (previous > 0) CHECK(previous / jump == doctest::Approx(2).epsilon(0.2));
        previous = jump;
      }
    }
  }
}

TEST_CASE("linear scheme has a visible jump at dx = 1 near Mercury") {
  const MeshSpec m = MeshSpec::kepler(132733, 1, MeshScheme::Linear);
  Real best = 0;
  for (int k = 0; k < 360; ++k) {
    const Real a = two_pi * k / 360;
    const auto c = locate({46 * std::cos(a), 46 * std::sin(a)}, m);
    for (auto o : {EdgeOrientation::Horizontal, EdgeOrientation::Vertical}) {
      const EdgeJump j = continuity_probe({c.i, c.j, o}, m);
      best = std::max(best, std::hypot(j.jump_x, j.jump_y) / j.force_magnitude);
    }
  }
  CHECK(best > 1e-3);
}

TEST_CASE("mesh forces converge to the exact force") {
  const Real gm = 132733;
  auto gen = test_support::rng(50);
  std::vector<Vec2> points;
  for (int n = 0; n < 50; ++n) points.push_back(random_point(gen, 30, 60));
  for (auto scheme : {MeshScheme::Bilinear, MeshScheme::Linear}) {
    std::vector<Real> worst;
    for (Real dx : {1.0, 0.5, 0.25, 0.125}) {
      const MeshSpec m = MeshSpec::kepler(gm, dx, scheme);
      Real w = 0;
      for (const Vec2 &p : points)
        w = std::max(w, vec_rel_diff(mesh_acceleration(p, m), exact_kepler_accel(p, gm)));
      worst.push_back(w);
    }
    const Real order = std::log2(worst.front() / worst.back()) / 3;
    INFO(to_string(scheme), " order ", order);
    if (scheme == MeshScheme::Bilinear)
      CHECK(order > 1.8);
    else
      CHECK(order > 0.8);
    for (std::size_t k = 1; k < worst.size(); ++k) CHECK(worst[k] < worst[k - 1]);
  }
}

TEST_CASE("mesh force model evaluates at the state position") {
  const MeshSpec m = MeshSpec::kepler(132733, 0.1, MeshScheme::Bilinear);
  const ForceModel f = make_mesh_force(m);
  const OrbitState s{1.5, {46, 3}, {7, 8}};
  CHECK(f(s) == force_bilinear(s.pos, m));
  const MeshSpec l = MeshSpec::kepler(132733, 0.1, MeshScheme::Linear, LinearVariant::AsPrinted);
  CHECK(make_mesh_force(l)(s) == force_linear(s.pos, l));
}
