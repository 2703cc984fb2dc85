#pragma once

#include <map>

#include <Eigen/Sparse>

#include "qttfem/assembly.hpp"
#include "qttfem/topology.hpp"

namespace qttfem
{
  //! node-space 0/1 operator: (Pi)_{ab} = 1 iff node a of m coincides with node b of p
  struct ConnectivityOperator
  {
    int m = 0, p = 0;
    TTMatrix Pi;
    bool empty = true;
  };

  ConnectivityOperator build_connectivity(const DomainTopology& topo, int m, int p, int d, Ordering ordering);
  //! Pi^(mm): diagonal, entry = number of partner copies of the node
  ConnectivityOperator build_self_connectivity(const DomainTopology& topo, int m, int d, Ordering ordering);

  //! all nonempty Pi^(mp), m != p, plus the diagonal Pi^(mm) under key (m, m)
  using ConnectivityTable = std::map<std::pair<int, int>, ConnectivityOperator>;
  ConnectivityTable build_connectivity_table(const DomainTopology& topo, int d, Ordering ordering);

  //! reorders a Z-ordered node operator (cores i1 j1 i2 j2 ...) to canonical (i1..id j1..jd)
  TTMatrix zorder_to_canonical(const TTMatrix& A);

  //! x/y mask per subdomain, zero at constrained DOFs
  struct BoundaryMask
  {
    std::array<TTVector, 2> component;
  };

  //! mask from the subdomain's own side tags
  BoundaryMask build_boundary_mask(const std::array<SideCondition, 4>& sides, int d, Ordering ordering);
  //! mask including constraints inherited by coincident corner copies
  BoundaryMask build_boundary_mask(const DomainTopology& topo, int m, int d, Ordering ordering);

  //! [1 0; 0 0] (x) K_xx + ... with the component as the leading (fastest) core
  TTMatrix stack_components(const TTMatrix& Kxx, const TTMatrix& Kxy, const TTMatrix& Kyx, const TTMatrix& Kyy);
  TTVector stack_components(const TTVector& fx, const TTVector& fy);

  //! modes: [component] + [2d node cores] + [subdomain bits], global dof = comp + 2 (node + 4^d m)
  struct GlobalSystem
  {
    TTMatrix K;
    TTVector f;
    TTVector mask;  // empty until apply_dirichlet
    int d = 0, q = 0, subdomain_bits = 0;
    double gamma = 0;
    Ordering ordering = Ordering::zorder;
  };

  int subdomain_bits(int q);
  std::int64_t global_dof(int component, std::int64_t node, int m, int d);

  double default_gamma(const std::vector<SubdomainSystem>& systems);

  //! g^(m) = f^(m) + sum_p Pi^(mp) f^(p), per component
  std::vector<std::array<TTVector, 2>> accumulate_interface_forces(const std::vector<SubdomainSystem>& systems, const ConnectivityTable& pi, double epsilon);

  //! coupled block operator and accumulated right-hand side, before boundary conditions
  GlobalSystem concat_blocks(const std::vector<SubdomainSystem>& systems, const ConnectivityTable& pi, double gamma, double epsilon);

  //! K' = M K M + gamma (I - M), f' = M f; padded subdomain slots are fully masked
  GlobalSystem apply_dirichlet(const GlobalSystem& global, const std::vector<BoundaryMask>& masks, double epsilon);

  struct BuildOptions
  {
    AssemblyOptions assembly;
    double gamma = 0;  // 0 selects default_gamma
  };

  struct BuiltProblem
  {
    DomainTopology topology;
    std::vector<SubdomainSystem> subsystems;
    ConnectivityTable connectivity;
    GlobalSystem system;  // masked
  };

  BuiltProblem build_global_system(const DomainTopology& topo, int d, const MaterialModel& material, const BuildOptions& options);
  //! same, with a caller-supplied connectivity table
  BuiltProblem build_global_system(const DomainTopology& topo, int d, const MaterialModel& material, const BuildOptions& options, ConnectivityTable connectivity);

  //! node-space block (m, p) of a global operator, dense 2*4^d square
  Eigen::MatrixXd global_block(const GlobalSystem& g, int m, int p);
  //! segment m of a global vector
  Eigen::VectorXd global_segment(const GlobalSystem& g, int m);
  //! sparse copy of the global operator over the first q subdomains; blocks with norm below
  //! drop_tol * ||K|| are skipped, entries below drop_tol * max|K| are dropped
  Eigen::SparseMatrix<double> global_sparse(const GlobalSystem& g, double drop_tol = 1e-13);

  //! displacement grids (x, y) of subdomain m from a dense global vector
  std::array<Eigen::MatrixXd, 2> displacement_grids(const Eigen::VectorXd& u, int d, int m, Ordering ordering);
}
