#pragma once

#include <Eigen/Sparse>

#include "qttfem/topology.hpp"

namespace qttfem
{
  //! conforming mesh of all subdomains at level d with coincident nodes merged
  struct ReferenceMesh
  {
    int d = 0;
    std::vector<Eigen::Vector2d> nodes;
    //! per subdomain, grid node i + 2^d j -> merged node
    std::vector<std::vector<long>> node_map;
    //! first (subdomain, i, j) that produced each merged node
    std::vector<std::array<long, 3>> origin;
    std::vector<std::array<long, 4>> elements;  // merged node ids, counterclockwise

    long node_count() const { return static_cast<long>(nodes.size()); }
  };

  ReferenceMesh build_reference_mesh(const DomainTopology& topo, int d);

  //! assembled conforming system; DOFs 2k (x) and 2k+1 (y) of merged node k
  struct DenseSystem
  {
    ReferenceMesh mesh;
    Eigen::SparseMatrix<double> K;  // unconstrained stiffness
    Eigen::SparseMatrix<double> M;  // vector mass matrix, same DOF layout
    Eigen::VectorXd f;
    std::vector<char> constrained;  // per DOF
  };

  DenseSystem assemble_reference(const DomainTopology& topo, const MaterialModel& material, int d, Quadrature q = Quadrature::gauss2);

  //! solves with constrained DOFs eliminated; constrained entries of the result are zero
  Eigen::VectorXd conforming_solve(const DenseSystem& sys);
  Eigen::VectorXd conforming_solve(const DomainTopology& topo, const MaterialModel& material, int d_ref, Quadrature q = Quadrature::gauss2);

  //! evaluates per-subdomain displacement grids (x, y) at the nodes of a finer (or equal) mesh
  Eigen::VectorXd interpolate_to_mesh(const std::vector<std::array<Eigen::MatrixXd, 2>>& coarse, const ReferenceMesh& fine);

  //! per-subdomain grids of a conforming solution
  std::vector<std::array<Eigen::MatrixXd, 2>> subdomain_grids(const Eigen::VectorXd& u, const ReferenceMesh& mesh, int q);

  double energy_norm(const DenseSystem& sys, const Eigen::VectorXd& v);
  double l2_norm(const DenseSystem& sys, const Eigen::VectorXd& v);
  //! absolute errors a(e,e)^(1/2) and (e,e)^(1/2) of e = u_test - u_ref on the reference mesh
  double energy_error(const DenseSystem& sys, const Eigen::VectorXd& u_test, const Eigen::VectorXd& u_ref);
  double l2_error(const DenseSystem& sys, const Eigen::VectorXd& u_test, const Eigen::VectorXd& u_ref);
}
