#include "perihelion/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace perihelion {

Real KeplerPotential::value(const Vec2 &p) const {
  const Real r = norm(p);
  if (!(r > 0)) throw std::domain_error("lattice stencil touches the central singularity");
  return -gm_ / r;
}

// -GM/r_hi + GM/r_lo = GM (r_hi - r_lo) / (r_hi r_lo), with r_hi - r_lo
// formed from the difference of squares so neighbouring nodes far from the
// origin do not cancel.
Real KeplerPotential::difference(const Vec2 &hi, const Vec2 &lo) const {
  const Real r_hi = norm(hi);
  const Real r_lo = norm(lo);
  if (!(r_hi > 0) || !(r_lo > 0))
    throw std::domain_error("lattice stencil touches the central singularity");
  const Real sq_diff = (hi.x - lo.x) * (hi.x + lo.x) + (hi.y - lo.y) * (hi.y + lo.y);
  return gm_ * sq_diff / ((r_hi + r_lo) * r_hi * r_lo);
}

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(MeshScheme scheme) {
  return scheme == MeshScheme::Linear ? "linear" : "bilinear";
}

std::string_view to_string(LinearVariant variant) {
  return variant == LinearVariant::Symmetric ? "symmetric" : "as-printed";
}

std::string_view to_string(CellIndexing indexing) {
  return indexing == CellIndexing::Floor ? "floor" : "toward-zero";
}

MeshScheme parse_scheme(std::string_view name) {
  const std::string s = lowercase(name);
  if (s == "linear") return MeshScheme::Linear;
  if (s == "bilinear") return MeshScheme::Bilinear;
  throw std::invalid_argument(fmt::format("unknown mesh scheme '{}'", name));
}

LinearVariant parse_variant(std::string_view name) {
  const std::string s = lowercase(name);
  if (s == "symmetric") return LinearVariant::Symmetric;
  if (s == "as-printed" || s == "asprinted" || s == "as_printed") return LinearVariant::AsPrinted;
  throw std::invalid_argument(fmt::format("unknown linear-scheme variant '{}'", name));
}

CellIndexing parse_indexing(std::string_view name) {
  const std::string s = lowercase(name);
  if (s == "floor") return CellIndexing::Floor;
  if (s == "toward-zero" || s == "toward_zero" || s == "truncate") return CellIndexing::TowardZero;
  throw std::invalid_argument(fmt::format("unknown cell indexing '{}'", name));
}

MeshSpec MeshSpec::kepler(Real gm, Real dx, MeshScheme scheme, LinearVariant variant,
                          Vec2 offset, CellIndexing indexing) {
  MeshSpec mesh;
  mesh.dx = dx;
  mesh.origin_offset = offset;
  mesh.potential = std::make_shared<KeplerPotential>(gm);
  mesh.scheme = scheme;
  mesh.linear_variant = variant;
  mesh.indexing = indexing;
  mesh.validate();
  return mesh;
}

void MeshSpec::validate() const {
  if (!(dx > 0) || !std::isfinite(dx)) throw std::invalid_argument("lattice spacing must be positive");
  const auto in_unit = [](Real v) { return v >= 0 && v < 1; };
  if (!in_unit(origin_offset.x) || !in_unit(origin_offset.y))
    throw std::invalid_argument("lattice offset must lie in [0, 1)");
  if (!potential) throw std::invalid_argument("mesh has no potential");
}

Vec2 MeshSpec::node_position(std::int64_t i, std::int64_t j) const {
  return {(static_cast<Real>(i) + origin_offset.x) * dx,
          (static_cast<Real>(j) + origin_offset.y) * dx};
}

PlaquetteCoords locate(const Vec2 &point, const MeshSpec &mesh) {
  const bool toward_zero = mesh.indexing == CellIndexing::TowardZero;
  const auto split = [toward_zero](Real u, std::int64_t &index, Real &frac) {
    if (!std::isfinite(u)) throw std::domain_error("cannot locate a non-finite point on the lattice");
    const Real base = toward_zero ? std::trunc(u) : std::floor(u);
    index = static_cast<std::int64_t>(base);
    frac = u - base;
    // u just below an integer can round to frac == 1 (or -1 toward zero).
    if (frac >= 1) {
      ++index;
      frac = 0;
    } else if (frac <= -1) {
      --index;
      frac = 0;
    }
  };
  PlaquetteCoords c;
  split(point.x / mesh.dx - mesh.origin_offset.x, c.i, c.xi);
  split(point.y / mesh.dx - mesh.origin_offset.y, c.j, c.eta);
  return c;
}

namespace {

Real phi_diff(const MeshSpec &m, std::int64_t i1, std::int64_t j1, std::int64_t i0,
              std::int64_t j0) {
  return m.potential->difference(m.node_position(i1, j1), m.node_position(i0, j0));
}

}  // namespace

Vec2 nodal_gradient_central(std::int64_t i, std::int64_t j, const MeshSpec &mesh) {
  const Real inv = 1 / (2 * mesh.dx);
  return {phi_diff(mesh, i + 1, j, i - 1, j) * inv, phi_diff(mesh, i, j + 1, i, j - 1) * inv};
}

Vec2 nodal_gradient_forward(std::int64_t i, std::int64_t j, const MeshSpec &mesh) {
  const Real inv = 1 / mesh.dx;
  return {phi_diff(mesh, i + 1, j, i, j) * inv, phi_diff(mesh, i, j + 1, i, j) * inv};
}

Vec2 force_bilinear(const PlaquetteCoords &c, const MeshSpec &mesh) {
  const Vec2 fa = nodal_gradient_central(c.i, c.j, mesh);
  const Vec2 fb = nodal_gradient_central(c.i + 1, c.j, mesh);
  const Vec2 fc = nodal_gradient_central(c.i, c.j + 1, mesh);
  const Vec2 fd = nodal_gradient_central(c.i + 1, c.j + 1, mesh);
  const Real xi = c.xi;
  const Real eta = c.eta;
  // The roles of corners b and c swap between the two components.
  const Real fx = (fa.x * (1 - xi) + fb.x * xi) * (1 - eta) + (fc.x * (1 - xi) + fd.x * xi) * eta;
  const Real fy = (fa.y * (1 - eta) + fc.y * eta) * (1 - xi) + (fb.y * (1 - eta) + fd.y * eta) * xi;
  return {-fx, -fy};
}

Vec2 force_bilinear(const Vec2 &point, const MeshSpec &mesh) {
  return force_bilinear(locate(point, mesh), mesh);
}

Vec2 force_linear(const PlaquetteCoords &c, const MeshSpec &mesh) {
  const Real inv = 1 / mesh.dx;
  const std::int64_t i = c.i;
  const std::int64_t j = c.j;
  const Real gx_a = phi_diff(mesh, i + 1, j, i, j) * inv;
  const Real gx_c = phi_diff(mesh, i + 1, j + 1, i, j + 1) * inv;
  const Real gx = gx_a * (1 - c.eta) + gx_c * c.eta;
  Real gy;
  if (mesh.linear_variant == LinearVariant::Symmetric) {
    const Real gy_a = phi_diff(mesh, i, j + 1, i, j) * inv;
    const Real gy_b = phi_diff(mesh, i + 1, j + 1, i + 1, j) * inv;
    gy = gy_a * (1 - c.xi) + gy_b * c.xi;
  } else {
    const Real gy_b = phi_diff(mesh, i + 1, j + 1, i + 1, j) * inv;
    const Real gy_d = phi_diff(mesh, i + 1, j + 2, i + 1, j + 1) * inv;
    gy = gy_b * (1 - c.xi) + gy_d * c.xi;
  }
  return {-gx, -gy};
}

Vec2 force_linear(const Vec2 &point, const MeshSpec &mesh) {
  return force_linear(locate(point, mesh), mesh);
}

Vec2 mesh_acceleration(const Vec2 &point, const MeshSpec &mesh) {
  return mesh.scheme == MeshScheme::Linear ? force_linear(point, mesh)
                                           : force_bilinear(point, mesh);
}

ForceModel make_mesh_force(MeshSpec mesh) {
  mesh.validate();
  if (mesh.scheme == MeshScheme::Linear)
    return [mesh](const OrbitState &s) { return force_linear(s.pos, mesh); };
  return [mesh](const OrbitState &s) { return force_bilinear(s.pos, mesh); };
}

EdgeJump continuity_probe(const Edge &edge, const MeshSpec &mesh, Real along) {
  PlaquetteCoords first;
  PlaquetteCoords second;
  if (edge.orientation == EdgeOrientation::Horizontal) {
    first = {edge.i, edge.j, along, 0};
    second = {edge.i, edge.j - 1, along, 1};
  } else {
    first = {edge.i, edge.j, 0, along};
    second = {edge.i - 1, edge.j, 1, along};
  }
  const auto eval = [&](const PlaquetteCoords &c) {
    return mesh.scheme == MeshScheme::Linear ? force_linear(c, mesh) : force_bilinear(c, mesh);
  };
  const Vec2 f1 = eval(first);
  const Vec2 f2 = eval(second);
  return {f1.x - f2.x, f1.y - f2.y, norm(f1)};
}

}  // namespace perihelion
