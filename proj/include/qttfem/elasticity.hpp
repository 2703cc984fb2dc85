#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qttfem
{
  enum class StressMode { plane_stress, plane_strain };
  enum class Quadrature { midpoint, gauss2 };

  struct MaterialModel
  {
    double youngs_modulus = 64;
    double poisson_ratio = 0;
    StressMode mode = StressMode::plane_stress;

    double lame_lambda() const;
    double lame_mu() const;
    Eigen::Matrix3d C() const;
  };

  Eigen::Matrix3d constitutive_matrix(double E, double nu, StressMode mode);

  // reference corners in counterclockwise order
  // 0: (-1,-1)  1: (1,-1)  2: (1,1)  3: (-1,1)
  constexpr std::array<std::array<int, 2>, 4> reference_corners = {{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};

  struct ShapeValues
  {
    std::array<double, 4> value;
    std::array<Eigen::Vector2d, 4> gradient;  // d/dxi, d/deta
  };

  ShapeValues shape_functions(double xi, double eta);

  enum class Side { bottom = 0, right = 1, top = 2, left = 3 };
  enum class SideTag { free, roller_x, roller_y, clamped, traction };

  std::string to_string(Side s);
  std::string to_string(SideTag t);

  struct SideCondition
  {
    SideTag tag = SideTag::free;
    Eigen::Vector2d traction = Eigen::Vector2d::Zero();  // only for SideTag::traction
    bool constrains_x() const { return tag == SideTag::clamped || tag == SideTag::roller_x; }
    bool constrains_y() const { return tag == SideTag::clamped || tag == SideTag::roller_y; }
  };

  //! bilinear quadrilateral subdomain with 2^d x 2^d nodes
  struct SubdomainMesh
  {
    std::array<Eigen::Vector2d, 4> corners;  // counterclockwise, matching reference_corners
    int d = 2;
    std::array<SideCondition, 4> sides;
    Eigen::Vector2d body_force = Eigen::Vector2d::Zero();

    int nodes_per_side() const { return 1 << d; }
    //! physical point of reference coordinates (xi, eta) in [-1,1]^2 of the whole subdomain
    Eigen::Vector2d map(double xi, double eta) const;
    Eigen::Vector2d node(long i, long j) const;
    double diameter() const;
    //! grid index (i,j) of the k-th node along a side, in increasing index order
    std::array<long, 2> side_node(Side s, long k) const;
  };

  //! J = [[dx/dxi, dy/dxi], [dx/deta, dy/deta]] and derived quantities
  struct JacobianData
  {
    Eigen::Matrix2d J;
    Eigen::Matrix2d inverse;  // [[dxi/dx, deta/dx], [dxi/dy, deta/dy]]
    double det = 0;
    // B(r, c) = grad(Phi) . jhat[r][c]
    std::array<std::array<Eigen::Vector2d, 2>, 3> jhat;
  };

  JacobianData jacobian_data(const Eigen::Matrix2d& J, double det);
  //! element (i,j) Jacobian by direct differentiation of the subdomain map
  Eigen::Matrix2d element_jacobian(const SubdomainMesh& mesh, long i, long j, double xi, double eta);
  //! J^(i,j) = J^(0,0) + i (J^(1,0) - J^(0,0)) + j (J^(0,1) - J^(0,0)); det from the expanded
  //! entries, or from the per-difference determinant sum when paper_determinant is set
  JacobianData jacobian_expansion(const SubdomainMesh& mesh, long i, long j, double xi, double eta, bool paper_determinant = false);

  //! 3x2 strain-displacement block of corner c
  Eigen::Matrix<double, 3, 2> strain_block(const Eigen::Vector2d& grad_ref, const JacobianData& jac);

  struct QuadratureRule
  {
    std::vector<std::array<double, 3>> points;  // xi, eta, weight
  };

  QuadratureRule quadrature_rule(Quadrature q);

  //! per-element values over the padded 2^d x 2^d element grid; entry (i,j) of each grid
  struct ElementBlocks
  {
    int d = 0;
    // stiffness[c1][c2][ab] with ab = 0 xx, 1 xy, 2 yx, 3 yy
    std::array<std::array<std::array<Eigen::MatrixXd, 4>, 4>, 4> stiffness;
    std::array<std::array<Eigen::MatrixXd, 4>, 4> load;
  };

  struct ElementPairGrids
  {
    std::array<Eigen::MatrixXd, 4> stiffness;  // xx, xy, yx, yy
    Eigen::MatrixXd load;
  };

  ElementPairGrids element_pair(const SubdomainMesh& mesh, const MaterialModel& material, int c1, int c2, Quadrature q, bool paper_determinant = false);
  ElementBlocks element_blocks(const SubdomainMesh& mesh, const MaterialModel& material, Quadrature q, bool paper_determinant = false);
  //! 2x2 blocks of pair (c1, c2) as four grids
  std::array<Eigen::MatrixXd, 4> element_stiffness_block(const SubdomainMesh& mesh, const MaterialModel& material, int c1, int c2, Quadrature q, bool paper_determinant = false);
  Eigen::MatrixXd element_load_block(const SubdomainMesh& mesh, int c1, int c2, Quadrature q, bool paper_determinant = false);

  //! 8x8 stiffness of one quadrilateral with the given corners, DOFs (x0,y0,x1,y1,...)
  Eigen::Matrix<double, 8, 8> element_stiffness_matrix(const std::array<Eigen::Vector2d, 4>& corners, const MaterialModel& material, Quadrature q);
  //! 4x4 scalar mass matrix of one quadrilateral
  Eigen::Matrix4d element_mass_matrix(const std::array<Eigen::Vector2d, 4>& corners, Quadrature q);

  //! consistent nodal forces along a traction side, one entry per side node
  std::vector<Eigen::Vector2d> traction_load(const SubdomainMesh& mesh, Side side, const Eigen::Vector2d& t);
}
