#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qttfem/elasticity.hpp"
#include "qttfem/indexing.hpp"

namespace qttfem
{
  struct SubdomainSpec
  {
    std::array<Eigen::Vector2d, 4> corners;  // counterclockwise
    std::array<SideCondition, 4> sides;      // bottom, right, top, left
    Eigen::Vector2d body_force = Eigen::Vector2d::Zero();
  };

  struct SolverSettings
  {
    int max_sweeps = 60;
    int kick_rank = 4;
    std::uint64_t seed = 1;
  };

  //! everything needed to run one benchmark; plain-text format, see write_config
  struct ProblemConfig
  {
    std::string name = "problem";
    int d = 3;
    MaterialModel material;
    Quadrature quadrature = Quadrature::gauss2;
    Ordering ordering = Ordering::zorder;
    bool paper_determinant = false;
    double epsilon = 1e-3;
    double gamma = 0;  // 0 selects the mean diagonal
    SolverSettings solver;
    int d_ref = 8;
    double expected_alpha = 1;
    std::vector<SubdomainSpec> subdomains;

    bool operator==(const ProblemConfig&) const;
  };

  ProblemConfig parse_config(std::istream& is);
  ProblemConfig load_config(const std::string& path);
  void write_config(std::ostream& os, const ProblemConfig& cfg);

  SideCondition parse_side(const std::string& token);
  std::string format_side(const SideCondition& s);

  //! two full sides with coincident endpoints
  struct Interface
  {
    int m = 0, side_m = 0, p = 0, side_p = 0;
    bool reversed = false;  // side parameter of p runs opposite to that of m
  };

  //! corners touching without a shared side
  struct CornerLink
  {
    int m = 0, corner_m = 0, p = 0, corner_p = 0;
  };

  struct DomainTopology
  {
    std::vector<SubdomainSpec> subdomains;
    std::vector<Interface> interfaces;
    std::vector<CornerLink> corner_links;

    int q() const { return static_cast<int>(subdomains.size()); }
    bool is_interface_side(int m, int side) const;
    SubdomainMesh mesh(int m, int d) const;
  };

  //! detects interfaces from coordinates (tolerance 1e-12 x diameter); rejects partial overlaps
  DomainTopology build_topology(const std::vector<SubdomainSpec>& subdomains);

  //! node pairs ((i_m, j_m), (i_p, j_p)) with equal coordinates, by brute-force boundary matching
  std::vector<std::pair<std::array<long, 2>, std::array<long, 2>>> coincident_nodes(const DomainTopology& topo, int m, int p, int d);

  //! node index of corner c on a 2^d grid
  std::array<long, 2> corner_node(int c, int d);

  // benchmark geometries
  ProblemConfig cantilever_config();
  ProblemConfig sen_config();
  ProblemConfig lshape_config();
  ProblemConfig builtin_config(const std::string& name);
}
