#pragma once

#include <array>

#include "qttfem/elasticity.hpp"
#include "qttfem/indexing.hpp"
#include "qttfem/tt.hpp"

namespace qttfem
{
  //! n x n lower shift over 2^d points: S(i+1, i) = 1, rank 2
  TTMatrix shift_1d(int d);
  //! 1D selectors and constants along one grid axis
  TTVector unit_1d(int d, std::int64_t k);

  //! combine a slow (j) and a fast (i) axis factor into a 2D grid operator
  TTMatrix grid_product(const TTMatrix& j_factor, const TTMatrix& i_factor, Ordering ordering);
  TTVector grid_product(const TTVector& j_factor, const TTVector& i_factor, Ordering ordering);

  //! grid (i,j) flattened in the given node ordering
  Eigen::VectorXd flatten_grid(const Eigen::MatrixXd& grid, Ordering ordering);
  Eigen::MatrixXd unflatten_grid(const Eigen::VectorXd& v, int d, Ordering ordering);
  TTVector grid_to_tt(const Eigen::MatrixXd& grid, Ordering ordering, double epsilon);

  struct ShiftOperator
  {
    int corner = 0;
    Ordering ordering = Ordering::zorder;
    //! node x element; element (i,j) to node (i+a, j+b) with (a,b) the corner offset
    TTMatrix V;
  };

  ShiftOperator build_shift_operator(int corner, int d, Ordering ordering);

  TTMatrix diag_tt(const Eigen::MatrixXd& grid, Ordering ordering, double epsilon = 0);

  struct AssemblyOptions
  {
    Ordering ordering = Ordering::zorder;
    double epsilon = 1e-10;
    Quadrature quadrature = Quadrature::gauss2;
    bool paper_determinant = false;
  };

  struct SubdomainSystem
  {
    int d = 0;
    Ordering ordering = Ordering::zorder;
    std::array<TTMatrix, 4> K;  // xx, xy, yx, yy
    std::array<TTVector, 2> f;  // x, y

    const TTMatrix& Kab(int a, int b) const { return K[2 * a + b]; }
  };

  //! nodal forces of all traction sides of the mesh, per component
  std::array<TTVector, 2> traction_tt(const SubdomainMesh& mesh, Ordering ordering, double epsilon);

  SubdomainSystem assemble_subdomain(const SubdomainMesh& mesh, const MaterialModel& material, const AssemblyOptions& options = {});
}
