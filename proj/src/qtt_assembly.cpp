#include "qttfem/assembly.hpp"

#include "qttfem/errors.hpp"

namespace qttfem
{
  TTMatrix shift_1d(int d)
  {
    if (d < 1) throw ArgumentError("level must be at least 1");
    // binary increment, least significant bit first; bond index is the carry
    Core4 step(2, 2, 2, 2);
    step.setZero();
    for (int cin = 0; cin < 2; ++cin)
      for (int bit = 0; bit < 2; ++bit) step(cin, bit ^ cin, bit, bit & cin) = 1;
    std::vector<Core4> cores(d, step);
    Eigen::array<Eigen::Index, 4> off{1, 0, 0, 0}, ext{1, 2, 2, 2};
    cores.front() = Core4(step.slice(off, ext));
    Eigen::array<Eigen::Index, 4> off2{0, 0, 0, 0}, ext2{cores.back().dimension(0), 2, 2, 1};
    cores.back() = Core4(cores.back().slice(off2, ext2));
    return TTMatrix(std::move(cores));
  }

  TTVector unit_1d(int d, std::int64_t k) { return tt_unit(d, k); }

  TTMatrix grid_product(const TTMatrix& j_factor, const TTMatrix& i_factor, Ordering ordering)
  {
    return ordering == Ordering::zorder ? tt_zkron(j_factor, i_factor) : tt_kron(j_factor, i_factor);
  }

  TTVector grid_product(const TTVector& j_factor, const TTVector& i_factor, Ordering ordering)
  {
    return ordering == Ordering::zorder ? tt_zkron(j_factor, i_factor) : tt_kron(j_factor, i_factor);
  }

  namespace
  {
    int grid_level(const Eigen::MatrixXd& grid)
    {
      const auto n = grid.rows();
      if (n != grid.cols() || n < 2 || (n & (n - 1)) != 0) throw SizeError("grid must be 2^d x 2^d");
      int d = 0;
      while ((1L << d) < n) ++d;
      return d;
    }
  }

  Eigen::VectorXd flatten_grid(const Eigen::MatrixXd& grid, Ordering ordering)
  {
    const int d = grid_level(grid);
    const long n = grid.rows();
    Eigen::VectorXd v(n * n);
    for (long j = 0; j < n; ++j)
      for (long i = 0; i < n; ++i) v(node_index(i, j, d, ordering)) = grid(i, j);
    return v;
  }

  Eigen::MatrixXd unflatten_grid(const Eigen::VectorXd& v, int d, Ordering ordering)
  {
    const long n = 1L << d;
    if (v.size() != n * n) throw SizeError("vector length does not match level");
    Eigen::MatrixXd g(n, n);
    for (long j = 0; j < n; ++j)
      for (long i = 0; i < n; ++i) g(i, j) = v(node_index(i, j, d, ordering));
    return g;
  }

  TTVector grid_to_tt(const Eigen::MatrixXd& grid, Ordering ordering, double epsilon)
  {
    return tt_decompose(flatten_grid(grid, ordering), epsilon);
  }

  ShiftOperator build_shift_operator(int corner, int d, Ordering ordering)
  {
    if (corner < 0 || corner > 3) throw ArgumentError("corner index out of range");
    if (d < 1) throw ArgumentError("level must be at least 1");
    const int a = (reference_corners[corner][0] + 1) / 2, b = (reference_corners[corner][1] + 1) / 2;
    const std::vector<int> modes(d, 2);
    const TTMatrix Si = a ? shift_1d(d) : tt_identity(modes);
    const TTMatrix Sj = b ? shift_1d(d) : tt_identity(modes);
    return {corner, ordering, grid_product(Sj, Si, ordering)};
  }

  TTMatrix diag_tt(const Eigen::MatrixXd& grid, Ordering ordering, double epsilon)
  {
    return tt_diag(grid_to_tt(grid, ordering, epsilon));
  }

  std::array<TTVector, 2> traction_tt(const SubdomainMesh& mesh, Ordering ordering, double epsilon)
  {
    const int d = mesh.d;
    const long n = mesh.nodes_per_side();
    std::array<TTVector, 2> f = {tt_zeros(std::vector<int>(2 * d, 2)), tt_zeros(std::vector<int>(2 * d, 2))};
    for (int s = 0; s < 4; ++s)
    {
      const auto& cond = mesh.sides[s];
      if (cond.tag != SideTag::traction) continue;
      const auto w = traction_load(mesh, Side(s), Eigen::Vector2d(1, 1));
      // unit-traction weights along the side: h * (1 - e_0/2 - e_{n-1}/2)
      const double h = w[1].x();
      TTVector along = tt_scale(tt_ones(std::vector<int>(d, 2)), h);
      along = tt_axpy(along, -h / 2, unit_1d(d, 0));
      along = tt_round(tt_axpy(along, -h / 2, unit_1d(d, n - 1)), 0);
      const bool varies_i = Side(s) == Side::bottom || Side(s) == Side::top;
      const auto fixed = mesh.side_node(Side(s), 0);
      const TTVector sel = unit_1d(d, varies_i ? fixed[1] : fixed[0]);
      const TTVector side = varies_i ? grid_product(sel, along, ordering) : grid_product(along, sel, ordering);
      for (int a = 0; a < 2; ++a)
        if (cond.traction(a) != 0) f[a] = tt_round(tt_axpy(f[a], cond.traction(a), side), epsilon);
    }
    return f;
  }

  SubdomainSystem assemble_subdomain(const SubdomainMesh& mesh, const MaterialModel& material, const AssemblyOptions& options)
  {
    if (options.epsilon < 0) throw ArgumentError("negative tolerance");
    const int d = mesh.d;
    const double eps = options.epsilon / 16;
    const std::vector<int> node_modes(2 * d, 2);

    std::array<ShiftOperator, 4> V;
    std::array<TTMatrix, 4> Vt;
    for (int c = 0; c < 4; ++c)
    {
      V[c] = build_shift_operator(c, d, options.ordering);
      Vt[c] = tt_transpose(V[c].V);
    }

    SubdomainSystem sys;
    sys.d = d;
    sys.ordering = options.ordering;
    std::array<std::vector<TTMatrix>, 4> terms;
    std::vector<TTVector> load_terms;
    const bool has_body = mesh.body_force.squaredNorm() > 0;
    const TTVector ones = tt_ones(node_modes);

    // fixed term order (c1 outer, c2 inner), summed pairwise
    for (int c1 = 0; c1 < 4; ++c1)
      for (int c2 = 0; c2 < 4; ++c2)
      {
        const auto grids = element_pair(mesh, material, c1, c2, options.quadrature, options.paper_determinant);
        for (int ab = 0; ab < 4; ++ab)
        {
          if (grids.stiffness[ab].cwiseAbs().maxCoeff() == 0) continue;
          const TTMatrix D = diag_tt(grids.stiffness[ab], options.ordering, eps);
          terms[ab].push_back(tt_matmat(tt_matmat(V[c1].V, D), Vt[c2]));
        }
        if (has_body)
        {
          const TTVector G = grid_to_tt(grids.load, options.ordering, eps);
          const TTVector spread = tt_hadamard(G, tt_round(tt_matvec(Vt[c2], ones), 0));
          load_terms.push_back(tt_matvec(V[c1].V, spread));
        }
      }

    for (int ab = 0; ab < 4; ++ab) sys.K[ab] = terms[ab].empty() ? tt_zeros(node_modes, node_modes) : tt_sum(std::move(terms[ab]), eps);
    const TTVector load = load_terms.empty() ? tt_zeros(node_modes) : tt_sum(std::move(load_terms), eps);

    const auto traction = traction_tt(mesh, options.ordering, eps);
    for (int a = 0; a < 2; ++a)
    {
      TTVector f = traction[a];
      if (has_body && mesh.body_force(a) != 0) f = tt_axpy(f, mesh.body_force(a), load);
      sys.f[a] = tt_round(f, eps);
    }
    return sys;
  }
}
