#include "qttfem/elasticity.hpp"

#include <cmath>

#include "qttfem/errors.hpp"

namespace qttfem
{
  Eigen::Matrix3d constitutive_matrix(double E, double nu, StressMode mode)
  {
    if (!(E > 0)) throw ArgumentError("Young's modulus must be positive");
    if (!(nu > -1 && nu < 0.5)) throw ArgumentError("Poisson ratio must lie in (-1, 0.5)");
    Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
    if (mode == StressMode::plane_stress)
    {
      const double s = E / (1 - nu * nu);
      C << s, s * nu, 0, s * nu, s, 0, 0, 0, s * (1 - nu) / 2;
    }
    else
    {
      const double s = E / ((1 + nu) * (1 - 2 * nu));
      C << s * (1 - nu), s * nu, 0, s * nu, s * (1 - nu), 0, 0, 0, s * (1 - 2 * nu) / 2;
    }
    return C;
  }

  double MaterialModel::lame_lambda() const
  {
    return youngs_modulus * poisson_ratio / ((1 + poisson_ratio) * (1 - 2 * poisson_ratio));
  }

  double MaterialModel::lame_mu() const { return youngs_modulus / (2 * (1 + poisson_ratio)); }

  Eigen::Matrix3d MaterialModel::C() const { return constitutive_matrix(youngs_modulus, poisson_ratio, mode); }

  ShapeValues shape_functions(double xi, double eta)
  {
    ShapeValues s;
    for (int c = 0; c < 4; ++c)
    {
      const double a = reference_corners[c][0], b = reference_corners[c][1];
      s.value[c] = 0.25 * (1 + a * xi) * (1 + b * eta);
      s.gradient[c] = Eigen::Vector2d(0.25 * a * (1 + b * eta), 0.25 * b * (1 + a * xi));
    }
    return s;
  }

  std::string to_string(Side s)
  {
    switch (s)
    {
      case Side::bottom: return "bottom";
      case Side::right: return "right";
      case Side::top: return "top";
      case Side::left: return "left";
    }
    return "?";
  }

  std::string to_string(SideTag t)
  {
    switch (t)
    {
      case SideTag::free: return "free";
      case SideTag::roller_x: return "roller-x";
      case SideTag::roller_y: return "roller-y";
      case SideTag::clamped: return "clamped";
      case SideTag::traction: return "traction";
    }
    return "?";
  }

  Eigen::Vector2d SubdomainMesh::map(double xi, double eta) const
  {
    const auto s = shape_functions(xi, eta);
    Eigen::Vector2d p = Eigen::Vector2d::Zero();
    for (int c = 0; c < 4; ++c) p += s.value[c] * corners[c];
    return p;
  }

  Eigen::Vector2d SubdomainMesh::node(long i, long j) const
  {
    const double h = 2.0 / (nodes_per_side() - 1);
    return map(-1 + h * i, -1 + h * j);
  }

  double SubdomainMesh::diameter() const
  {
    double r = 0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) r = std::max(r, (corners[a] - corners[b]).norm());
    return r;
  }

  std::array<long, 2> SubdomainMesh::side_node(Side s, long k) const
  {
    const long last = nodes_per_side() - 1;
    switch (s)
    {
      case Side::bottom: return {k, 0};
      case Side::right: return {last, k};
      case Side::top: return {k, last};
      case Side::left: return {0, k};
    }
    return {0, 0};
  }

  JacobianData jacobian_data(const Eigen::Matrix2d& J, double det)
  {
    JacobianData r;
    r.J = J;
    r.det = det;
    const double dd = J.determinant();
    if (!(dd > 0)) throw DegenerateElementError("non-positive Jacobian determinant");
    r.inverse = J.inverse();
    const Eigen::Vector2d dx = r.inverse.row(0).transpose();  // (dxi/dx, deta/dx)
    const Eigen::Vector2d dy = r.inverse.row(1).transpose();
    const Eigen::Vector2d z = Eigen::Vector2d::Zero();
    r.jhat = {{{dx, z}, {z, dy}, {dy, dx}}};
    return r;
  }

  namespace
  {
    Eigen::Matrix2d jacobian_from_corners(const std::array<Eigen::Vector2d, 4>& P, double xi, double eta)
    {
      const auto s = shape_functions(xi, eta);
      Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
      for (int c = 0; c < 4; ++c) J += s.gradient[c] * P[c].transpose();
      return J;
    }

    std::array<Eigen::Vector2d, 4> element_corners(const SubdomainMesh& mesh, long i, long j)
    {
      std::array<Eigen::Vector2d, 4> P;
      for (int c = 0; c < 4; ++c)
        P[c] = mesh.node(i + (reference_corners[c][0] + 1) / 2, j + (reference_corners[c][1] + 1) / 2);
      return P;
    }

    // Jacobian of element (i,j) from the subdomain map, chain rule through the element-to-subdomain scaling
    Eigen::Matrix2d subdomain_jacobian(const SubdomainMesh& mesh, long i, long j, double xi, double eta)
    {
      const double n1 = mesh.nodes_per_side() - 1;
      const double xs = -1 + (2 * i + 1 + xi) / n1, es = -1 + (2 * j + 1 + eta) / n1;
      return jacobian_from_corners(mesh.corners, xs, es) / n1;
    }

    void check_element(const SubdomainMesh& mesh, long i, long j)
    {
      const long n = mesh.nodes_per_side();
      if (i < 0 || j < 0 || i >= n - 1 || j >= n - 1) throw ArgumentError("element index out of range");
    }
  }

  Eigen::Matrix2d element_jacobian(const SubdomainMesh& mesh, long i, long j, double xi, double eta)
  {
    check_element(mesh, i, j);
    return jacobian_from_corners(element_corners(mesh, i, j), xi, eta);
  }

  JacobianData jacobian_expansion(const SubdomainMesh& mesh, long i, long j, double xi, double eta, bool paper_determinant)
  {
    check_element(mesh, i, j);
    const Eigen::Matrix2d J00 = subdomain_jacobian(mesh, 0, 0, xi, eta);
    const Eigen::Matrix2d D10 = subdomain_jacobian(mesh, 1, 0, xi, eta) - J00;
    const Eigen::Matrix2d D01 = subdomain_jacobian(mesh, 0, 1, xi, eta) - J00;
    const Eigen::Matrix2d J = J00 + double(i) * D10 + double(j) * D01;
    const double det = paper_determinant ? J00.determinant() + i * D10.determinant() + j * D01.determinant() : J.determinant();
    return jacobian_data(J, det);
  }

  Eigen::Matrix<double, 3, 2> strain_block(const Eigen::Vector2d& g, const JacobianData& jac)
  {
    Eigen::Matrix<double, 3, 2> B;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 2; ++c) B(r, c) = g.dot(jac.jhat[r][c]);
    return B;
  }

  QuadratureRule quadrature_rule(Quadrature q)
  {
    QuadratureRule r;
    if (q == Quadrature::midpoint)
      r.points.push_back({0, 0, 4});
    else
    {
      const double g = 1 / std::sqrt(3.0);
      for (double b : {-g, g})
        for (double a : {-g, g}) r.points.push_back({a, b, 1});
    }
    return r;
  }

  ElementPairGrids element_pair(const SubdomainMesh& mesh, const MaterialModel& material, int c1, int c2, Quadrature q, bool paper_determinant)
  {
    if (c1 < 0 || c1 > 3 || c2 < 0 || c2 > 3) throw ArgumentError("corner index out of range");
    if (mesh.d < 1) throw ArgumentError("subdomain level must be at least 1");
    const long n = mesh.nodes_per_side();
    const Eigen::Matrix3d C = material.C();
    const auto rule = quadrature_rule(q);

    ElementPairGrids out;
    for (auto& g : out.stiffness) g = Eigen::MatrixXd::Zero(n, n);
    out.load = Eigen::MatrixXd::Zero(n, n);

    std::vector<ShapeValues> shapes;
    for (const auto& p : rule.points) shapes.push_back(shape_functions(p[0], p[1]));

    for (long j = 0; j < n - 1; ++j)
      for (long i = 0; i < n - 1; ++i)
        for (std::size_t g = 0; g < rule.points.size(); ++g)
        {
          const auto& p = rule.points[g];
          const auto jac = jacobian_expansion(mesh, i, j, p[0], p[1], paper_determinant);
          const double w = p[2] * jac.det;
          const auto B1 = strain_block(shapes[g].gradient[c1], jac);
          const auto B2 = strain_block(shapes[g].gradient[c2], jac);
          const Eigen::Matrix2d k = w * B1.transpose() * C * B2;
          out.stiffness[0](i, j) += k(0, 0);
          out.stiffness[1](i, j) += k(0, 1);
          out.stiffness[2](i, j) += k(1, 0);
          out.stiffness[3](i, j) += k(1, 1);
          out.load(i, j) += w * shapes[g].value[c1] * shapes[g].value[c2];
        }
    return out;
  }

  ElementBlocks element_blocks(const SubdomainMesh& mesh, const MaterialModel& material, Quadrature q, bool paper_determinant)
  {
    ElementBlocks out;
    out.d = mesh.d;
    for (int c1 = 0; c1 < 4; ++c1)
      for (int c2 = 0; c2 < 4; ++c2)
      {
        auto g = element_pair(mesh, material, c1, c2, q, paper_determinant);
        out.stiffness[c1][c2] = std::move(g.stiffness);
        out.load[c1][c2] = std::move(g.load);
      }
    return out;
  }

  std::array<Eigen::MatrixXd, 4> element_stiffness_block(const SubdomainMesh& mesh, const MaterialModel& material, int c1, int c2, Quadrature q, bool paper_determinant)
  {
    return element_pair(mesh, material, c1, c2, q, paper_determinant).stiffness;
  }

  Eigen::MatrixXd element_load_block(const SubdomainMesh& mesh, int c1, int c2, Quadrature q, bool paper_determinant)
  {
    return element_pair(mesh, MaterialModel{}, c1, c2, q, paper_determinant).load;
  }

  Eigen::Matrix<double, 8, 8> element_stiffness_matrix(const std::array<Eigen::Vector2d, 4>& corners, const MaterialModel& material, Quadrature q)
  {
    const Eigen::Matrix3d C = material.C();
    Eigen::Matrix<double, 8, 8> K = Eigen::Matrix<double, 8, 8>::Zero();
    for (const auto& p : quadrature_rule(q).points)
    {
      const Eigen::Matrix2d J = jacobian_from_corners(corners, p[0], p[1]);
      const auto jac = jacobian_data(J, J.determinant());
      const auto s = shape_functions(p[0], p[1]);
      Eigen::Matrix<double, 3, 8> B;
      for (int c = 0; c < 4; ++c) B.middleCols<2>(2 * c) = strain_block(s.gradient[c], jac);
      K += p[2] * jac.det * B.transpose() * C * B;
    }
    return K;
  }

  Eigen::Matrix4d element_mass_matrix(const std::array<Eigen::Vector2d, 4>& corners, Quadrature q)
  {
    Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
    for (const auto& p : quadrature_rule(q).points)
    {
      const Eigen::Matrix2d J = jacobian_from_corners(corners, p[0], p[1]);
      const auto s = shape_functions(p[0], p[1]);
      Eigen::Vector4d v(s.value[0], s.value[1], s.value[2], s.value[3]);
      M += p[2] * J.determinant() * v * v.transpose();
    }
    return M;
  }

  std::vector<Eigen::Vector2d> traction_load(const SubdomainMesh& mesh, Side side, const Eigen::Vector2d& t)
  {
    const long n = mesh.nodes_per_side();
    const auto a = mesh.side_node(side, 0), b = mesh.side_node(side, n - 1);
    const double L = (mesh.node(b[0], b[1]) - mesh.node(a[0], a[1])).norm();
    const double h = L / (n - 1);
    std::vector<Eigen::Vector2d> f(n, t * h);
    f.front() *= 0.5;
    f.back() *= 0.5;
    return f;
  }
}
