#include "qttfem/reference.hpp"

#include <cmath>
#include <map>

#include "qttfem/errors.hpp"

#ifdef QTTFEM_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif
#include <Eigen/SparseCholesky>

namespace qttfem
{
  ReferenceMesh build_reference_mesh(const DomainTopology& topo, int d)
  {
    if (d < 1) throw ArgumentError("reference level must be at least 1");
    ReferenceMesh mesh;
    mesh.d = d;
    const long n = 1L << d;
    mesh.node_map.assign(topo.q(), std::vector<long>(n * n, -1));
    for (int m = 0; m < topo.q(); ++m)
    {
      // inherit boundary nodes already created by earlier subdomains
      for (int p = 0; p < m; ++p)
        for (const auto& [a, b] : coincident_nodes(topo, m, p, d))
          mesh.node_map[m][a[0] + n * a[1]] = mesh.node_map[p][b[0] + n * b[1]];
      const auto sm = topo.mesh(m, d);
      for (long j = 0; j < n; ++j)
        for (long i = 0; i < n; ++i)
        {
          long& id = mesh.node_map[m][i + n * j];
          if (id >= 0) continue;
          id = mesh.node_count();
          mesh.nodes.push_back(sm.node(i, j));
          mesh.origin.push_back({m, i, j});
        }
      for (long j = 0; j + 1 < n; ++j)
        for (long i = 0; i + 1 < n; ++i)
        {
          const auto& map = mesh.node_map[m];
          mesh.elements.push_back({map[i + n * j], map[i + 1 + n * j], map[i + 1 + n * (j + 1)], map[i + n * (j + 1)]});
        }
    }
    return mesh;
  }

  namespace
  {
    // column-wise insertion with a fixed per-column reservation keeps memory at the final size
    // (reserved in place: a returned uncompressed matrix loses its reservation)
    void reserve_dofs(Eigen::SparseMatrix<double>& A, long dofs)
    {
      A.resize(dofs, dofs);
      A.reserve(Eigen::VectorXi::Constant(dofs, 18));
    }
  }

  DenseSystem assemble_reference(const DomainTopology& topo, const MaterialModel& material, int d, Quadrature q)
  {
    DenseSystem s;
    s.mesh = build_reference_mesh(topo, d);
    const long N = s.mesh.node_count(), n = 1L << d;
    reserve_dofs(s.K, 2 * N);
    reserve_dofs(s.M, 2 * N);
    s.f = Eigen::VectorXd::Zero(2 * N);
    s.constrained.assign(2 * N, 0);

    long e = 0;
    for (int m = 0; m < topo.q(); ++m)
    {
      const auto& sub = topo.subdomains[m];
      for (long j = 0; j + 1 < n; ++j)
        for (long i = 0; i + 1 < n; ++i, ++e)
        {
          const auto& ids = s.mesh.elements[e];
          std::array<Eigen::Vector2d, 4> P;
          for (int c = 0; c < 4; ++c) P[c] = s.mesh.nodes[ids[c]];
          const auto Ke = element_stiffness_matrix(P, material, q);
          const auto Me = element_mass_matrix(P, q);
          for (int c2 = 0; c2 < 4; ++c2)
            for (int b = 0; b < 2; ++b)
            {
              const long col = 2 * ids[c2] + b;
              for (int c1 = 0; c1 < 4; ++c1)
              {
                for (int a = 0; a < 2; ++a) s.K.coeffRef(2 * ids[c1] + a, col) += Ke(2 * c1 + a, 2 * c2 + b);
                s.M.coeffRef(2 * ids[c1] + b, col) += Me(c1, c2);
              }
            }
          const Eigen::Vector4d load = Me * Eigen::Vector4d::Ones();
          for (int c = 0; c < 4; ++c)
            for (int a = 0; a < 2; ++a) s.f(2 * ids[c] + a) += load(c) * sub.body_force(a);
        }

      const auto mesh = topo.mesh(m, d);
      for (int side = 0; side < 4; ++side)
      {
        const auto& cond = sub.sides[side];
        for (long k = 0; k < n; ++k)
        {
          const auto ij = mesh.side_node(Side(side), k);
          const long id = s.mesh.node_map[m][ij[0] + n * ij[1]];
          if (cond.constrains_x()) s.constrained[2 * id] = 1;
          if (cond.constrains_y()) s.constrained[2 * id + 1] = 1;
        }
        if (cond.tag == SideTag::traction)
        {
          const auto w = traction_load(mesh, Side(side), cond.traction);
          for (long k = 0; k < n; ++k)
          {
            const auto ij = mesh.side_node(Side(side), k);
            const long id = s.mesh.node_map[m][ij[0] + n * ij[1]];
            s.f(2 * id) += w[k].x();
            s.f(2 * id + 1) += w[k].y();
          }
        }
      }
    }
    s.K.makeCompressed();
    s.M.makeCompressed();
    return s;
  }

  namespace
  {
    // rigid motions with zero values at every constrained DOF, empty if none
    std::string missing_constraint(const DenseSystem& sys)
    {
      const long N = sys.mesh.node_count();
      Eigen::Vector2d centre = Eigen::Vector2d::Zero();
      for (const auto& x : sys.mesh.nodes) centre += x;
      centre /= double(N);
      double scale = 0;
      for (const auto& x : sys.mesh.nodes) scale = std::max(scale, (x - centre).norm());
      std::vector<Eigen::RowVector3d> rows;
      for (long k = 0; k < N; ++k)
      {
        const Eigen::Vector2d x = (sys.mesh.nodes[k] - centre) / scale;
        if (sys.constrained[2 * k]) rows.push_back(Eigen::RowVector3d(1, 0, -x.y()));
        if (sys.constrained[2 * k + 1]) rows.push_back(Eigen::RowVector3d(0, 1, x.x()));
      }
      Eigen::MatrixXd R(rows.size(), 3);
      for (std::size_t r = 0; r < rows.size(); ++r) R.row(r) = rows[r];
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(R.rows() ? R : Eigen::MatrixXd::Zero(1, 3), Eigen::ComputeFullV);
      std::string out;
      for (int k = 0; k < 3; ++k)
      {
        const double s = k < svd.singularValues().size() ? svd.singularValues()(k) : 0;
        if (s > 1e-10 * std::sqrt(double(std::max<Eigen::Index>(R.rows(), 1)))) continue;
        const Eigen::Vector3d v = svd.matrixV().col(k);
        std::string what;
        if (std::abs(v(2)) < 1e-8) what = std::abs(v(1)) < 1e-8 ? "rigid translation in x (add a u_x constraint)" : std::abs(v(0)) < 1e-8 ? "rigid translation in y (add a u_y constraint)" : "rigid translation (add u_x and u_y constraints)";
        else what = "rigid rotation (constraints do not fix rotation)";
        out += (out.empty() ? "" : "; ") + what;
      }
      return out;
    }
  }

  Eigen::VectorXd conforming_solve(const DenseSystem& sys)
  {
    const long D = sys.K.rows();
    std::vector<long> free_index(D, -1);
    long nf = 0;
    for (long k = 0; k < D; ++k)
      if (!sys.constrained[k]) free_index[k] = nf++;
    Eigen::SparseMatrix<double> Kf(nf, nf);
    {
      std::vector<Eigen::Triplet<double>> t;
      t.reserve(sys.K.nonZeros());
      for (long c = 0; c < D; ++c)
        if (free_index[c] >= 0)
          for (Eigen::SparseMatrix<double>::InnerIterator it(sys.K, c); it; ++it)
            if (free_index[it.row()] >= 0) t.emplace_back(free_index[it.row()], free_index[c], it.value());
      Kf.setFromTriplets(t.begin(), t.end());
    }
    Eigen::VectorXd ff(nf);
    for (long k = 0; k < D; ++k)
      if (free_index[k] >= 0) ff(free_index[k]) = sys.f(k);

    const std::string what = missing_constraint(sys);
    if (!what.empty()) throw SingularSystemError("singular reference system: " + what);

#ifdef QTTFEM_HAVE_CHOLMOD
    Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>> solver;
#else
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> solver;
#endif
    solver.compute(Kf);
    if (solver.info() != Eigen::Success) throw SingularSystemError("singular reference system: factorization failed");
    const Eigen::VectorXd uf = solver.solve(ff);
    if (solver.info() != Eigen::Success || !uf.allFinite()) throw SingularSystemError("singular reference system: solve failed");

    Eigen::VectorXd u = Eigen::VectorXd::Zero(D);
    for (long k = 0; k < D; ++k)
      if (free_index[k] >= 0) u(k) = uf(free_index[k]);
    return u;
  }

  Eigen::VectorXd conforming_solve(const DomainTopology& topo, const MaterialModel& material, int d_ref, Quadrature q)
  {
    return conforming_solve(assemble_reference(topo, material, d_ref, q));
  }

  Eigen::VectorXd interpolate_to_mesh(const std::vector<std::array<Eigen::MatrixXd, 2>>& coarse, const ReferenceMesh& fine)
  {
    Eigen::VectorXd u(2 * fine.node_count());
    const double nf1 = double((1L << fine.d) - 1);
    for (long k = 0; k < fine.node_count(); ++k)
    {
      const auto [m, I, J] = fine.origin[k];
      if (m >= long(coarse.size())) throw ArgumentError("coarse field has fewer subdomains than the mesh");
      const auto& g = coarse[m];
      const long nc = g[0].rows();
      if (nc > (1L << fine.d)) throw ArgumentError("coarse field is finer than the reference mesh");
      // subdomain parameter of the fine node in coarse grid units
      const double x = I / nf1 * double(nc - 1), y = J / nf1 * double(nc - 1);
      const long i0 = std::min<long>(static_cast<long>(std::floor(x)), nc - 2), j0 = std::min<long>(static_cast<long>(std::floor(y)), nc - 2);
      const double s = x - i0, t = y - j0;
      for (int a = 0; a < 2; ++a)
        u(2 * k + a) = (1 - s) * (1 - t) * g[a](i0, j0) + s * (1 - t) * g[a](i0 + 1, j0) + s * t * g[a](i0 + 1, j0 + 1) + (1 - s) * t * g[a](i0, j0 + 1);
    }
    return u;
  }

  std::vector<std::array<Eigen::MatrixXd, 2>> subdomain_grids(const Eigen::VectorXd& u, const ReferenceMesh& mesh, int q)
  {
    const long n = 1L << mesh.d;
    std::vector<std::array<Eigen::MatrixXd, 2>> out(q);
    for (int m = 0; m < q; ++m)
    {
      out[m] = {Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
      for (long j = 0; j < n; ++j)
        for (long i = 0; i < n; ++i)
          for (int a = 0; a < 2; ++a) out[m][a](i, j) = u(2 * mesh.node_map[m][i + n * j] + a);
    }
    return out;
  }

  double energy_norm(const DenseSystem& sys, const Eigen::VectorXd& v) { return std::sqrt(std::max(0.0, v.dot(sys.K * v))); }
  double l2_norm(const DenseSystem& sys, const Eigen::VectorXd& v) { return std::sqrt(std::max(0.0, v.dot(sys.M * v))); }

  double energy_error(const DenseSystem& sys, const Eigen::VectorXd& u_test, const Eigen::VectorXd& u_ref)
  {
    if (u_test.size() != u_ref.size() || u_ref.size() != sys.K.rows()) throw ArgumentError("fields are not on the reference mesh");
    return energy_norm(sys, u_test - u_ref);
  }

  double l2_error(const DenseSystem& sys, const Eigen::VectorXd& u_test, const Eigen::VectorXd& u_ref)
  {
    if (u_test.size() != u_ref.size() || u_ref.size() != sys.M.rows()) throw ArgumentError("fields are not on the reference mesh");
    return l2_norm(sys, u_test - u_ref);
  }
}
