#pragma once

#include <cstdint>
#include <memory>
#include <string_view>

#include "perihelion/dynamics.hpp"

namespace perihelion {

/// Scalar potential sampled at lattice nodes.
class Potential {
 public:
  virtual ~Potential() = default;
  virtual Real value(const Vec2 &p) const = 0;
  /// value(hi) - value(lo). Implementations may override with a formula
  /// that avoids cancellation between nearby nodes.
  virtual Real difference(const Vec2 &hi, const Vec2 &lo) const { return value(hi) - value(lo); }
};

/// Phi = -GM / r. Throws std::domain_error at the origin.
class KeplerPotential final : public Potential {
 public:
  explicit KeplerPotential(Real gm) : gm_(gm) {}
  Real value(const Vec2 &p) const override;
  Real difference(const Vec2 &hi, const Vec2 &lo) const override;
  Real gm() const { return gm_; }

 private:
  Real gm_;
};

enum class MeshScheme { Linear, Bilinear };

/// Which corners the linear scheme uses for the y component.
enum class LinearVariant {
  /// Left and right edge gradients (corners a, b), mirroring the x component.
  Symmetric,
  /// Corners b and d with weights (1 - xi, xi).
  AsPrinted,
};

/// How a coordinate is split into a cell index and a fraction.
enum class CellIndexing {
  /// i = floor(u); the fraction lies in [0, 1) everywhere.
  Floor,
  /// i = integer part of u rounded toward zero, as Fortran INT or a C cast
  /// would give. For u < 0 the fraction is in (-1, 0], so the plaquette on
  /// the origin side of the point is extrapolated rather than interpolated.
  TowardZero,
};

std::string_view to_string(MeshScheme scheme);
std::string_view to_string(LinearVariant variant);
std::string_view to_string(CellIndexing indexing);
MeshScheme parse_scheme(std::string_view name);
LinearVariant parse_variant(std::string_view name);
CellIndexing parse_indexing(std::string_view name);

struct MeshSpec {
  Real dx = 1;
  /// Node (i, j) sits at ((i + offset.x) dx, (j + offset.y) dx).
  Vec2 origin_offset{};
  std::shared_ptr<const Potential> potential;
  MeshScheme scheme = MeshScheme::Bilinear;
  LinearVariant linear_variant = LinearVariant::Symmetric;
  CellIndexing indexing = CellIndexing::Floor;

  static MeshSpec kepler(Real gm, Real dx, MeshScheme scheme,
                         LinearVariant variant = LinearVariant::Symmetric, Vec2 offset = {},
                         CellIndexing indexing = CellIndexing::Floor);

  /// Throws std::invalid_argument on dx <= 0, offsets outside [0, 1) or a
  /// missing potential.
  void validate() const;
  Vec2 node_position(std::int64_t i, std::int64_t j) const;
};

/// Position of a point inside its plaquette. With floor indexing `locate`
/// returns xi, eta in [0, 1); interpolation formulas accept any value.
struct PlaquetteCoords {
  std::int64_t i = 0;
  std::int64_t j = 0;
  Real xi = 0;
  Real eta = 0;
};

PlaquetteCoords locate(const Vec2 &point, const MeshSpec &mesh);

/// Central-difference gradient of the potential at node (i, j).
Vec2 nodal_gradient_central(std::int64_t i, std::int64_t j, const MeshSpec &mesh);

/// Forward-difference gradient at node (i, j): the x component lives on the
/// edge (i, j)-(i+1, j), the y component on (i, j)-(i, j+1).
Vec2 nodal_gradient_forward(std::int64_t i, std::int64_t j, const MeshSpec &mesh);

/// Acceleration (negative interpolated gradient) from the bilinear scheme.
Vec2 force_bilinear(const Vec2 &point, const MeshSpec &mesh);
Vec2 force_bilinear(const PlaquetteCoords &cell, const MeshSpec &mesh);

/// Acceleration from the staggered linear scheme.
Vec2 force_linear(const Vec2 &point, const MeshSpec &mesh);
Vec2 force_linear(const PlaquetteCoords &cell, const MeshSpec &mesh);

/// Dispatches on mesh.scheme.
Vec2 mesh_acceleration(const Vec2 &point, const MeshSpec &mesh);

ForceModel make_mesh_force(MeshSpec mesh);

enum class EdgeOrientation {
  /// Edge from node (i, j) to (i+1, j).
  Horizontal,
  /// Edge from node (i, j) to (i, j+1).
  Vertical,
};

struct Edge {
  std::int64_t i = 0;
  std::int64_t j = 0;
  EdgeOrientation orientation = EdgeOrientation::Horizontal;
};

struct EdgeJump {
  Real jump_x = 0;
  Real jump_y = 0;
  /// Magnitude of the force on the edge (one-sided), for relative checks.
  Real force_magnitude = 0;
};

/// Difference of the two one-sided limits of the acceleration at the edge
/// midpoint, evaluated with each adjacent plaquette's own formula.
EdgeJump continuity_probe(const Edge &edge, const MeshSpec &mesh, Real along = Real(0.5));

}  // namespace perihelion
