#include "qttfem/coupling.hpp"

#include "qttfem/errors.hpp"

namespace qttfem
{
  namespace
  {
    // how one grid coordinate of a matched node depends on the side parameter k
    enum class Coord { zero, last, param, reversed };

    int coord_bit(Coord c, int b)
    {
      switch (c)
      {
        case Coord::zero: return 0;
        case Coord::last: return 1;
        case Coord::param: return b;
        case Coord::reversed: return 1 - b;
      }
      return 0;
    }

    std::array<Coord, 2> side_coords(int side, bool reversed)
    {
      const Coord k = reversed ? Coord::reversed : Coord::param;
      switch (Side(side))
      {
        case Side::bottom: return {k, Coord::zero};
        case Side::right: return {Coord::last, k};
        case Side::top: return {k, Coord::last};
        case Side::left: return {Coord::zero, k};
      }
      return {Coord::zero, Coord::zero};
    }

    std::array<Coord, 2> corner_coords(int c)
    {
      return {reference_corners[c][0] < 0 ? Coord::zero : Coord::last, reference_corners[c][1] < 0 ? Coord::zero : Coord::last};
    }

    // identical 4x4 factor on every level; row index ri + 2 rj, column index ci + 2 cj
    TTMatrix level_product(const std::array<Coord, 2>& row, const std::array<Coord, 2>& col, int d)
    {
      const bool param = row[0] >= Coord::param || row[1] >= Coord::param || col[0] >= Coord::param || col[1] >= Coord::param;
      // one rank term per value of the side bit, each a product of unit i- and j-factors
      const int r = param ? 2 : 1;
      Core4 ci(1, 2, 2, r), cj(r, 2, 2, 1);
      ci.setZero();
      cj.setZero();
      for (int b = 0; b < r; ++b)
      {
        ci(0, coord_bit(row[0], b), coord_bit(col[0], b), b) = 1;
        cj(b, coord_bit(row[1], b), coord_bit(col[1], b), 0) = 1;
      }
      std::vector<Core4> cores;
      for (int l = 0; l < d; ++l)
      {
        cores.push_back(ci);
        cores.push_back(cj);
      }
      return TTMatrix(std::move(cores));
    }

    TTMatrix unit_matrix(int bits, std::int64_t row, std::int64_t col)
    {
      std::vector<Core4> cores;
      for (int l = 0; l < bits; ++l)
      {
        Core4 c(1, 2, 2, 1);
        c.setZero();
        c(0, (row >> l) & 1, (col >> l) & 1, 0) = 1;
        cores.push_back(std::move(c));
      }
      return TTMatrix(std::move(cores));
    }

    TTMatrix with_subdomain(const TTMatrix& inner, int bits, int m, int p)
    {
      return bits == 0 ? inner : tt_kron(unit_matrix(bits, m, p), inner);
    }

    TTVector with_subdomain(const TTVector& inner, int bits, int m)
    {
      return bits == 0 ? inner : tt_kron(tt_unit(bits, m), inner);
    }

    TTMatrix accumulate(const TTMatrix& acc, const TTMatrix& term, double eps)
    {
      return acc.order() == 0 ? term : tt_round(tt_add(acc, term), eps);
    }

    TTVector accumulate(const TTVector& acc, const TTVector& term, double eps)
    {
      return acc.order() == 0 ? tt_round(term, eps) : tt_round(tt_add(acc, term), eps);
    }

    constexpr std::array<std::array<int, 2>, 4> corner_sides = {{{0, 3}, {0, 1}, {1, 2}, {2, 3}}};

    // stiffness and loads do not change under translation
    bool same_up_to_translation(const SubdomainSpec& a, const SubdomainSpec& b)
    {
      for (int c = 1; c < 4; ++c)
        if (a.corners[c] - a.corners[0] != b.corners[c] - b.corners[0]) return false;
      for (int k = 0; k < 4; ++k)
      {
        const bool ta = a.sides[k].tag == SideTag::traction, tb = b.sides[k].tag == SideTag::traction;
        if (ta != tb || (ta && a.sides[k].traction != b.sides[k].traction)) return false;
      }
      return a.body_force == b.body_force;
    }

    bool side_constrains(const SideCondition& s, int a) { return a == 0 ? s.constrains_x() : s.constrains_y(); }
  }

  TTMatrix zorder_to_canonical(const TTMatrix& A)
  {
    const int D = A.order();
    if (D % 2) throw SizeError("node operator needs an even number of cores");
    const int d = D / 2;
    // label l: i-bit l, label d + l: j-bit l
    std::vector<int> cur(D);
    for (int l = 0; l < d; ++l)
    {
      cur[2 * l] = l;
      cur[2 * l + 1] = d + l;
    }
    TTMatrix out = A;
    for (int t = 0; t < D; ++t)
    {
      int s = static_cast<int>(std::find(cur.begin(), cur.end(), t) - cur.begin());
      for (; s > t; --s)
      {
        out = tt_swap_modes(out, s - 1);
        std::swap(cur[s - 1], cur[s]);
      }
    }
    return out;
  }

  ConnectivityOperator build_connectivity(const DomainTopology& topo, int m, int p, int d, Ordering ordering)
  {
    if (m < 0 || p < 0 || m >= topo.q() || p >= topo.q()) throw ArgumentError("subdomain index out of range");
    if (m == p) return build_self_connectivity(topo, m, d, ordering);
    ConnectivityOperator op{m, p, {}, true};
    TTMatrix acc;
    for (const auto& f : topo.interfaces)
    {
      if (f.m == m && f.p == p)
        acc = accumulate(acc, level_product(side_coords(f.side_m, false), side_coords(f.side_p, f.reversed), d), 1e-14);
      else if (f.m == p && f.p == m)
        acc = accumulate(acc, level_product(side_coords(f.side_p, false), side_coords(f.side_m, f.reversed), d), 1e-14);
    }
    for (const auto& c : topo.corner_links)
    {
      if (c.m == m && c.p == p) acc = accumulate(acc, level_product(corner_coords(c.corner_m), corner_coords(c.corner_p), d), 1e-14);
      else if (c.m == p && c.p == m) acc = accumulate(acc, level_product(corner_coords(c.corner_p), corner_coords(c.corner_m), d), 1e-14);
    }
    // reversed side parameters: the side matched in reverse runs n-1-k; by symmetry of the
    // pattern it does not matter which partner carries the reversal
    if (acc.order() == 0)
    {
      const std::vector<int> modes(2 * d, 2);
      op.Pi = tt_zeros(modes, modes);
      return op;
    }
    op.empty = false;
    op.Pi = ordering == Ordering::zorder ? acc : zorder_to_canonical(acc);
    return op;
  }

  ConnectivityOperator build_self_connectivity(const DomainTopology& topo, int m, int d, Ordering ordering)
  {
    ConnectivityOperator op{m, m, {}, true};
    TTMatrix acc;
    for (int p = 0; p < topo.q(); ++p)
    {
      if (p == m) continue;
      const auto a = build_connectivity(topo, m, p, d, ordering), b = build_connectivity(topo, p, m, d, ordering);
      if (a.empty) continue;
      acc = accumulate(acc, tt_matmat(a.Pi, b.Pi), 1e-14);
    }
    if (acc.order() == 0)
    {
      const std::vector<int> modes(2 * d, 2);
      op.Pi = tt_zeros(modes, modes);
      return op;
    }
    op.empty = false;
    op.Pi = acc;
    return op;
  }

  ConnectivityTable build_connectivity_table(const DomainTopology& topo, int d, Ordering ordering)
  {
    ConnectivityTable t;
    for (int m = 0; m < topo.q(); ++m)
      for (int p = 0; p < topo.q(); ++p)
      {
        auto op = build_connectivity(topo, m, p, d, ordering);
        if (!op.empty) t[{m, p}] = std::move(op);
      }
    return t;
  }

  BoundaryMask build_boundary_mask(const std::array<SideCondition, 4>& sides, int d, Ordering ordering)
  {
    const long n = 1L << d;
    BoundaryMask mask;
    for (int a = 0; a < 2; ++a)
    {
      TTVector along_i = tt_ones(std::vector<int>(d, 2)), along_j = along_i;
      if (side_constrains(sides[int(Side::left)], a)) along_i = tt_axpy(along_i, -1, tt_unit(d, 0));
      if (side_constrains(sides[int(Side::right)], a)) along_i = tt_axpy(along_i, -1, tt_unit(d, n - 1));
      if (side_constrains(sides[int(Side::bottom)], a)) along_j = tt_axpy(along_j, -1, tt_unit(d, 0));
      if (side_constrains(sides[int(Side::top)], a)) along_j = tt_axpy(along_j, -1, tt_unit(d, n - 1));
      mask.component[a] = tt_round(grid_product(tt_round(along_j, 0), tt_round(along_i, 0), ordering), 0);
    }
    return mask;
  }

  BoundaryMask build_boundary_mask(const DomainTopology& topo, int m, int d, Ordering ordering)
  {
    const auto& sub = topo.subdomains.at(m);
    BoundaryMask mask = build_boundary_mask(sub.sides, d, ordering);
    const double tol = 1e-12 * topo.mesh(m, d).diameter();
    for (int c = 0; c < 4; ++c)
      for (int a = 0; a < 2; ++a)
      {
        const auto own = [&](const SubdomainSpec& s, int corner) {
          return side_constrains(s.sides[corner_sides[corner][0]], a) || side_constrains(s.sides[corner_sides[corner][1]], a);
        };
        if (own(sub, c)) continue;
        bool inherited = false;
        for (int p = 0; p < topo.q(); ++p)
          for (int cp = 0; cp < 4; ++cp)
            if (p != m && (topo.subdomains[p].corners[cp] - sub.corners[c]).norm() <= tol && own(topo.subdomains[p], cp)) inherited = true;
        if (!inherited) continue;
        const auto node = corner_node(c, d);
        const TTVector e = grid_product(tt_unit(d, node[1]), tt_unit(d, node[0]), ordering);
        mask.component[a] = tt_round(tt_axpy(mask.component[a], -1, e), 0);
      }
    return mask;
  }

  TTMatrix stack_components(const TTMatrix& Kxx, const TTMatrix& Kxy, const TTMatrix& Kyx, const TTMatrix& Kyy)
  {
    const std::array<const TTMatrix*, 4> K = {&Kxx, &Kxy, &Kyx, &Kyy};
    for (const auto* k : K)
      if (k->row_modes() != Kxx.row_modes() || k->col_modes() != Kxx.col_modes()) throw SizeError("component blocks differ in shape");
    TTMatrix out;
    for (int ab = 0; ab < 4; ++ab)
    {
      const TTMatrix term = tt_kron(*K[ab], unit_matrix(1, ab / 2, ab % 2));
      out = out.order() == 0 ? term : tt_add(out, term);
    }
    return out;
  }

  TTVector stack_components(const TTVector& fx, const TTVector& fy)
  {
    if (fx.modes() != fy.modes()) throw SizeError("component vectors differ in shape");
    return tt_add(tt_kron(fx, tt_unit(1, 0)), tt_kron(fy, tt_unit(1, 1)));
  }

  int subdomain_bits(int q)
  {
    int b = 0;
    while ((1 << b) < q) ++b;
    return b;
  }

  std::int64_t global_dof(int component, std::int64_t node, int m, int d)
  {
    return component + 2 * (node + (std::int64_t(1) << (2 * d)) * m);
  }

  double default_gamma(const std::vector<SubdomainSystem>& systems)
  {
    if (systems.empty()) throw ArgumentError("no subdomain systems");
    double sum = 0, count = 0;
    for (const auto& s : systems)
      for (int ab : {0, 3})
      {
        const TTVector diag = tt_diagonal(s.K[ab]);
        sum += tt_dot(diag, tt_ones(diag.modes()));
        count += double(diag.size());
      }
    return sum / count;
  }

  std::vector<std::array<TTVector, 2>> accumulate_interface_forces(const std::vector<SubdomainSystem>& systems, const ConnectivityTable& pi, double epsilon)
  {
    std::vector<std::array<TTVector, 2>> g;
    for (const auto& s : systems) g.push_back(s.f);
    for (const auto& [key, op] : pi)
    {
      const auto [m, p] = key;
      if (m == p) continue;
      for (int a = 0; a < 2; ++a) g[m][a] = tt_round(tt_add(g[m][a], tt_matvec(op.Pi, systems[p].f[a])), epsilon);
    }
    return g;
  }

  GlobalSystem concat_blocks(const std::vector<SubdomainSystem>& systems, const ConnectivityTable& pi, double gamma, double epsilon)
  {
    if (systems.empty()) throw ArgumentError("no subdomain systems");
    if (!(gamma > 0)) throw ArgumentError("gamma must be positive");
    const int d = systems.front().d;
    for (const auto& s : systems)
      if (s.d != d || s.ordering != systems.front().ordering) throw ArgumentError("subdomain systems differ in level or ordering");

    GlobalSystem g;
    g.d = d;
    g.q = static_cast<int>(systems.size());
    g.subdomain_bits = subdomain_bits(g.q);
    g.gamma = gamma;
    g.ordering = systems.front().ordering;

    std::vector<TTMatrix> blocks;
    for (int m = 0; m < g.q; ++m)
    {
      std::array<TTMatrix, 4> block = systems[m].K;
      const auto self = pi.find({m, m});
      if (self != pi.end())
        for (int ab : {0, 3}) block[ab] = tt_round(tt_axpy(block[ab], gamma, self->second.Pi), epsilon);
      blocks.push_back(with_subdomain(stack_components(block[0], block[1], block[2], block[3]), g.subdomain_bits, m, m));
    }
    for (const auto& [key, op] : pi)
    {
      const auto [m, p] = key;
      if (m == p) continue;
      std::array<TTMatrix, 4> block;
      for (int ab = 0; ab < 4; ++ab)
      {
        block[ab] = tt_matmat(op.Pi, systems[p].K[ab]);
        if (ab == 0 || ab == 3) block[ab] = tt_axpy(block[ab], -gamma, op.Pi);
        block[ab] = tt_round(block[ab], epsilon);
      }
      blocks.push_back(with_subdomain(stack_components(block[0], block[1], block[2], block[3]), g.subdomain_bits, m, p));
    }
    g.K = tt_sum(std::move(blocks), epsilon);

    const auto forces = accumulate_interface_forces(systems, pi, epsilon);
    std::vector<TTVector> loads;
    for (int m = 0; m < g.q; ++m) loads.push_back(with_subdomain(stack_components(forces[m][0], forces[m][1]), g.subdomain_bits, m));
    g.f = tt_sum(std::move(loads), epsilon);
    return g;
  }

  GlobalSystem apply_dirichlet(const GlobalSystem& global, const std::vector<BoundaryMask>& masks, double epsilon)
  {
    if (int(masks.size()) != global.q) throw ArgumentError("one mask per subdomain required");
    GlobalSystem out = global;
    TTVector mask;
    for (int m = 0; m < global.q; ++m)
      mask = accumulate(mask, with_subdomain(stack_components(masks[m].component[0], masks[m].component[1]), global.subdomain_bits, m), 0);
    if (mask.modes() != global.f.modes()) throw SizeError("mask does not match the global mode structure");
    const TTMatrix M = tt_diag(mask);
    TTMatrix K = tt_round(tt_matmat(M, global.K), epsilon);
    K = tt_round(tt_matmat(K, M), epsilon);
    const TTMatrix free = tt_round(tt_axpy(tt_identity(mask.modes()), -1, M), 0);
    out.K = tt_round(tt_axpy(K, global.gamma, free), epsilon);
    out.f = tt_round(tt_hadamard(mask, global.f), epsilon);
    out.mask = mask;
    return out;
  }

  BuiltProblem build_global_system(const DomainTopology& topo, int d, const MaterialModel& material, const BuildOptions& options)
  {
    return build_global_system(topo, d, material, options, build_connectivity_table(topo, d, options.assembly.ordering));
  }

  BuiltProblem build_global_system(const DomainTopology& topo, int d, const MaterialModel& material, const BuildOptions& options, ConnectivityTable connectivity)
  {
    BuiltProblem b;
    b.topology = topo;
    b.connectivity = std::move(connectivity);
    for (int m = 0; m < topo.q(); ++m)
    {
      int twin = 0;
      while (twin < m && !same_up_to_translation(topo.subdomains[twin], topo.subdomains[m])) ++twin;
      b.subsystems.push_back(twin < m ? b.subsystems[twin] : assemble_subdomain(topo.mesh(m, d), material, options.assembly));
    }
    const double gamma = options.gamma > 0 ? options.gamma : default_gamma(b.subsystems);
    const double eps = options.assembly.epsilon;
    const GlobalSystem raw = concat_blocks(b.subsystems, b.connectivity, gamma, eps);
    std::vector<BoundaryMask> masks;
    for (int m = 0; m < topo.q(); ++m) masks.push_back(build_boundary_mask(topo, m, d, options.assembly.ordering));
    b.system = apply_dirichlet(raw, masks, eps);
    return b;
  }

  std::array<Eigen::MatrixXd, 2> displacement_grids(const Eigen::VectorXd& u, int d, int m, Ordering ordering)
  {
    const long n = 1L << d;
    std::array<Eigen::MatrixXd, 2> g = {Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
    for (long j = 0; j < n; ++j)
      for (long i = 0; i < n; ++i)
      {
        const auto node = node_index(i, j, d, ordering);
        for (int a = 0; a < 2; ++a)
        {
          const auto k = global_dof(a, node, m, d);
          if (k >= u.size()) throw SizeError("global vector too short for subdomain");
          g[a](i, j) = u(k);
        }
      }
    return g;
  }

  namespace
  {
    // fixes the subdomain-bit cores at (m, p) and folds them into the last node core
    TTMatrix node_part(const GlobalSystem& g, int m, int p)
    {
      const int nodes = 1 + 2 * g.d;
      if (m < 0 || p < 0 || m >= (1 << g.subdomain_bits) || p >= (1 << g.subdomain_bits)) throw ArgumentError("subdomain index out of range");
      Eigen::MatrixXd tail = Eigen::MatrixXd::Identity(1, 1);
      for (int l = g.subdomain_bits - 1; l >= 0; --l)
      {
        const auto& c = g.K.core(nodes + l);
        Eigen::MatrixXd s(c.dimension(0), c.dimension(3));
        for (Eigen::Index a = 0; a < s.rows(); ++a)
          for (Eigen::Index b = 0; b < s.cols(); ++b) s(a, b) = c(a, (m >> l) & 1, (p >> l) & 1, b);
        tail = (s * tail).eval();
      }
      std::vector<Core4> cores(g.K.cores().begin(), g.K.cores().begin() + nodes);
      auto& last = cores.back();
      Core4 folded(last.dimension(0), last.dimension(1), last.dimension(2), 1);
      folded.setZero();
      for (Eigen::Index a = 0; a < last.dimension(0); ++a)
        for (Eigen::Index i = 0; i < last.dimension(1); ++i)
          for (Eigen::Index j = 0; j < last.dimension(2); ++j)
            for (Eigen::Index b = 0; b < last.dimension(3); ++b) folded(a, i, j, 0) += last(a, i, j, b) * tail(b, 0);
      last = std::move(folded);
      return TTMatrix(std::move(cores));
    }
  }

  Eigen::MatrixXd global_block(const GlobalSystem& g, int m, int p) { return tt_contract(node_part(g, m, p)); }

  Eigen::VectorXd global_segment(const GlobalSystem& g, int m)
  {
    const Eigen::Index n = 2L << (2 * g.d);
    const Eigen::VectorXd f = tt_contract(g.f);
    return f.segment(m * n, n);
  }

  Eigen::SparseMatrix<double> global_sparse(const GlobalSystem& g, double drop_tol)
  {
    const Eigen::Index n = 2L << (2 * g.d);
    const double total = tt_norm(g.K);
    std::vector<Eigen::Triplet<double>> entries;
    std::vector<std::pair<int, int>> kept;
    std::vector<Eigen::MatrixXd> blocks;
    double amax = 0;
    for (int m = 0; m < g.q; ++m)
      for (int p = 0; p < g.q; ++p)
      {
        const TTMatrix part = node_part(g, m, p);
        if (tt_norm(part) <= drop_tol * total) continue;
        blocks.push_back(tt_contract(part));
        kept.emplace_back(m, p);
        amax = std::max(amax, blocks.back().cwiseAbs().maxCoeff());
      }
    for (std::size_t k = 0; k < blocks.size(); ++k)
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
          if (std::abs(blocks[k](i, j)) > drop_tol * amax) entries.emplace_back(kept[k].first * n + i, kept[k].second * n + j, blocks[k](i, j));
    Eigen::SparseMatrix<double> S(g.q * n, g.q * n);
    S.setFromTriplets(entries.begin(), entries.end());
    return S;
  }
}
