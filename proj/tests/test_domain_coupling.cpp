#include <gtest/gtest.h>

#include "qttfem/coupling.hpp"
#include "qttfem/errors.hpp"
#include "qttfem/reference.hpp"

using namespace qttfem;

namespace
{
  SubdomainSpec box(double x0, double y0, double x1, double y1)
  {
    SubdomainSpec s;
    s.corners = {Eigen::Vector2d(x0, y0), Eigen::Vector2d(x1, y0), Eigen::Vector2d(x1, y1), Eigen::Vector2d(x0, y1)};
    return s;
  }

  // second square listed with its corners rotated: its left side is stored as "bottom",
  // so the interface couples a j-parameterised side with an i-parameterised one in reverse
  SubdomainSpec rotated_box(double x0, double y0, double x1, double y1)
  {
    SubdomainSpec s;
    s.corners = {Eigen::Vector2d(x0, y1), Eigen::Vector2d(x0, y0), Eigen::Vector2d(x1, y0), Eigen::Vector2d(x1, y1)};
    return s;
  }

  DomainTopology two_squares(bool rotated = false)
  {
    auto a = box(0, 0, 1, 1);
    auto b = rotated ? rotated_box(1, 0, 2, 1) : box(1, 0, 2, 1);
    a.sides[int(Side::left)] = {SideTag::clamped};
    a.body_force = b.body_force = Eigen::Vector2d(0, -1);
    return build_topology({a, b});
  }

  Eigen::MatrixXd coordinate_oracle(const DomainTopology& t, int m, int p, int d, Ordering o)
  {
    const long N = 1L << (2 * d);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
    for (const auto& [a, b] : coincident_nodes(t, m, p, d)) P(node_index(a[0], a[1], d, o), node_index(b[0], b[1], d, o)) = 1;
    return P;
  }

  Eigen::VectorXd dense_solve(const GlobalSystem& g)
  {
    const Eigen::MatrixXd K = tt_contract(g.K);
    return K.partialPivLu().solve(tt_contract(g.f));
  }

  // max relative difference between the coupled solution and the conforming one over all node copies
  double conforming_mismatch(const DomainTopology& topo, const MaterialModel& mat, int d, const Eigen::VectorXd& u, Ordering o)
  {
    const auto ref = assemble_reference(topo, mat, d);
    const Eigen::VectorXd uref = conforming_solve(ref);
    const long n = 1L << d;
    double diff = 0;
    for (int m = 0; m < topo.q(); ++m)
    {
      const auto g = displacement_grids(u, d, m, o);
      for (long j = 0; j < n; ++j)
        for (long i = 0; i < n; ++i)
          for (int a = 0; a < 2; ++a)
          {
            const double e = g[a](i, j) - uref(2 * ref.mesh.node_map[m][i + n * j] + a);
            diff += e * e;
          }
    }
    Eigen::VectorXd copies(2 * topo.q() * n * n);
    long k = 0;
    for (int m = 0; m < topo.q(); ++m)
      for (long idx = 0; idx < n * n; ++idx)
        for (int a = 0; a < 2; ++a) copies(k++) = uref(2 * ref.mesh.node_map[m][idx] + a);
    return std::sqrt(diff) / copies.norm();
  }
}

TEST(Connectivity, LevelOneSidePair)
{
  const auto t = two_squares();
  ASSERT_EQ(t.interfaces.size(), 1u);
  const auto pi = build_connectivity(t, 0, 1, 1, Ordering::zorder);
  const Eigen::MatrixXd P = tt_contract(pi.Pi);
  EXPECT_EQ(P.sum(), 2);
  for (long j = 0; j < 2; ++j) EXPECT_EQ(P(z_index(1, j, 1), z_index(0, j, 1)), 1);
}

TEST(Connectivity, MatchesCoordinateOracle)
{
  std::vector<DomainTopology> tops = {two_squares(), two_squares(true)};
  for (auto name : {"cantilever", "sen", "lshape"}) tops.push_back(build_topology(builtin_config(name).subdomains));
  for (const auto& t : tops)
    for (int d : {1, 2, 3})
      for (auto o : {Ordering::zorder, Ordering::canonical})
        for (int m = 0; m < std::min(t.q(), 4); ++m)
          for (int p = 0; p < std::min(t.q(), 4); ++p)
          {
            if (m == p) continue;
            const auto pi = build_connectivity(t, m, p, d, o);
            const Eigen::MatrixXd P = tt_contract(pi.Pi);
            EXPECT_LT((P - coordinate_oracle(t, m, p, d, o)).norm(), 1e-12) << "m=" << m << " p=" << p << " d=" << d;
            EXPECT_EQ(pi.empty, P.sum() == 0);
          }
}

TEST(Connectivity, TransposeDualityExhaustive)
{
  for (auto name : {"sen", "lshape"})
  {
    const auto t = build_topology(builtin_config(name).subdomains);
    for (int d = 1; d <= 4; ++d)
      for (int m = 0; m < t.q(); ++m)
        for (int p = 0; p < t.q(); ++p)
        {
          const Eigen::MatrixXd A = tt_contract(build_connectivity(t, m, p, d, Ordering::zorder).Pi);
          const Eigen::MatrixXd B = tt_contract(build_connectivity(t, p, m, d, Ordering::zorder).Pi);
          EXPECT_LT((A - B.transpose()).norm(), 1e-12);
        }
  }
  const auto r = two_squares(true);
  const Eigen::MatrixXd A = tt_contract(build_connectivity(r, 0, 1, 3, Ordering::canonical).Pi);
  const Eigen::MatrixXd B = tt_contract(build_connectivity(r, 1, 0, 3, Ordering::canonical).Pi);
  EXPECT_LT((A - B.transpose()).norm(), 1e-12);
}

TEST(Connectivity, SelfOperatorCountsPartners)
{
  const auto t = two_squares();
  const Eigen::MatrixXd S = tt_contract(build_self_connectivity(t, 0, 3, Ordering::zorder).Pi);
  EXPECT_LT((S - Eigen::MatrixXd(S.diagonal().asDiagonal())).norm(), 1e-14);
  EXPECT_NEAR(S.trace(), 8, 1e-13);

  const auto l = build_topology(lshape_config().subdomains);
  const Eigen::MatrixXd S1 = tt_contract(build_self_connectivity(l, 0, 2, Ordering::zorder).Pi);
  EXPECT_NEAR(S1(z_index(3, 3, 2), z_index(3, 3, 2)), 2, 1e-13);
  EXPECT_NEAR(S1.trace(), 4 + 4, 1e-13);

  const auto c = build_topology(cantilever_config().subdomains);
  EXPECT_TRUE(build_connectivity(c, 0, 5, 2, Ordering::zorder).empty);
  EXPECT_FALSE(build_connectivity(c, 4, 5, 2, Ordering::zorder).empty);
}

TEST(Topology, DetectsInterfacesAndRejectsBadGeometry)
{
  const auto l = build_topology(lshape_config().subdomains);
  EXPECT_EQ(l.interfaces.size(), 2u);
  ASSERT_EQ(l.corner_links.size(), 1u);
  EXPECT_EQ(l.corner_links[0].m, 1);
  EXPECT_EQ(l.corner_links[0].p, 2);

  EXPECT_EQ(build_topology(cantilever_config().subdomains).interfaces.size(), 19u);

  // half-overlapping sides
  EXPECT_THROW(build_topology({box(0, 0, 1, 1), box(1, 0.5, 2, 1.5)}), TopologyError);
  auto cw = box(0, 0, 1, 1);
  std::reverse(cw.corners.begin(), cw.corners.end());
  EXPECT_THROW(build_topology({cw, box(1, 0, 2, 1)}), TopologyError);
  // boundary condition on an interface side
  auto a = box(0, 0, 1, 1), b = box(1, 0, 2, 1);
  a.sides[int(Side::right)] = {SideTag::clamped};
  EXPECT_THROW(build_topology({a, b}), TopologyError);
}

TEST(Mask, SideTagsSelectDofs)
{
  std::array<SideCondition, 4> free{};
  auto m = build_boundary_mask(free, 2, Ordering::zorder);
  EXPECT_NEAR(tt_contract(m.component[0]).sum(), 16, 1e-13);

  std::array<SideCondition, 4> clamp{};
  clamp[int(Side::left)] = {SideTag::clamped};
  m = build_boundary_mask(clamp, 1, Ordering::zorder);
  const Eigen::VectorXd mx = tt_contract(m.component[0]), my = tt_contract(m.component[1]);
  EXPECT_NEAR(mx.sum() + my.sum(), 4, 1e-14);
  for (long j = 0; j < 2; ++j)
  {
    EXPECT_EQ(mx(z_index(0, j, 1)), 0);
    EXPECT_EQ(my(z_index(0, j, 1)), 0);
  }

  std::array<SideCondition, 4> roller{};
  roller[int(Side::right)] = {SideTag::roller_x};
  m = build_boundary_mask(roller, 3, Ordering::canonical);
  const Eigen::MatrixXd gx = unflatten_grid(tt_contract(m.component[0]), 3, Ordering::canonical);
  const Eigen::MatrixXd gy = unflatten_grid(tt_contract(m.component[1]), 3, Ordering::canonical);
  EXPECT_NEAR(gy.sum(), 64, 1e-13);
  EXPECT_NEAR(gx.row(7).sum(), 0, 1e-13);
  EXPECT_NEAR(gx.sum(), 56, 1e-13);
}

TEST(Mask, IdempotentAndBinaryExhaustive)
{
  for (int tag_bits = 0; tag_bits < 256; tag_bits += 7)
  {
    std::array<SideCondition, 4> sides{};
    const SideTag options[4] = {SideTag::free, SideTag::clamped, SideTag::roller_x, SideTag::roller_y};
    for (int s = 0; s < 4; ++s) sides[s].tag = options[(tag_bits >> (2 * s)) & 3];
    for (int d = 1; d <= 3; ++d)
    {
      const auto m = build_boundary_mask(sides, d, Ordering::zorder);
      for (int a = 0; a < 2; ++a)
      {
        const Eigen::VectorXd v = tt_contract(m.component[a]);
        for (long k = 0; k < v.size(); ++k) EXPECT_TRUE(std::abs(v(k)) < 1e-13 || std::abs(v(k) - 1) < 1e-13);
        EXPECT_LT((tt_contract(tt_hadamard(m.component[a], m.component[a])) - v).norm(), 1e-13);
      }
    }
  }
}

TEST(Mask, HarmonisedAcrossCopies)
{
  const auto t = build_topology(sen_config().subdomains);
  const auto m0 = build_boundary_mask(t, 0, 3, Ordering::zorder);
  const Eigen::MatrixXd gy = unflatten_grid(tt_contract(m0.component[1]), 3, Ordering::zorder);
  // bottom-right corner of the left square coincides with the roller-y corner of the right square
  EXPECT_NEAR(gy(7, 0), 0, 1e-13);
  EXPECT_NEAR(gy.sum(), 63, 1e-13);
}

TEST(Dirichlet, MaskingIsIdempotentAndNoOpWithoutConstraints)
{
  const auto t = two_squares();
  std::vector<SubdomainSystem> sys;
  for (int m = 0; m < 2; ++m) sys.push_back(assemble_subdomain(t.mesh(m, 2), MaterialModel{64, 0}));
  const auto table = build_connectivity_table(t, 2, Ordering::zorder);
  const auto raw = concat_blocks(sys, table, 10, 1e-12);

  std::vector<BoundaryMask> none = {build_boundary_mask(std::array<SideCondition, 4>{}, 2, Ordering::zorder), build_boundary_mask(std::array<SideCondition, 4>{}, 2, Ordering::zorder)};
  const auto same = apply_dirichlet(raw, none, 1e-12);
  EXPECT_LT((tt_contract(same.K) - tt_contract(raw.K)).norm(), 1e-10 * tt_norm(raw.K));

  std::vector<BoundaryMask> masks = {build_boundary_mask(t, 0, 2, Ordering::zorder), build_boundary_mask(t, 1, 2, Ordering::zorder)};
  const auto once = apply_dirichlet(raw, masks, 1e-12);
  const auto twice = apply_dirichlet(once, masks, 1e-12);
  EXPECT_LT((tt_contract(twice.K) - tt_contract(once.K)).norm(), 1e-10 * tt_norm(once.K));
  EXPECT_LT((tt_contract(twice.f) - tt_contract(once.f)).norm(), 1e-12);
}

TEST(Stacking, DenseBlockEquality)
{
  std::mt19937_64 rng(2);
  const std::vector<int> modes(3, 2);
  std::array<TTMatrix, 4> K;
  for (auto& k : K) k = tt_random(modes, modes, 2, rng);
  const Eigen::MatrixXd S = tt_contract(stack_components(K[0], K[1], K[2], K[3]));
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
    {
      const Eigen::MatrixXd blk = tt_contract(K[2 * a + b]);
      for (long i = 0; i < 8; ++i)
        for (long j = 0; j < 8; ++j) EXPECT_NEAR(S(a + 2 * i, b + 2 * j), blk(i, j), 1e-13);
    }
  const auto fx = tt_random(modes, 2, rng), fy = tt_random(modes, 2, rng);
  const Eigen::VectorXd f = tt_contract(stack_components(fx, fy));
  EXPECT_LT((f(Eigen::seq(0, 15, 2)) - tt_contract(fx)).norm(), 1e-13);
  EXPECT_LT((f(Eigen::seq(1, 15, 2)) - tt_contract(fy)).norm(), 1e-13);
  EXPECT_THROW(stack_components(fx, tt_random(std::vector<int>(4, 2), 1, rng)), SizeError);
}

TEST(InterfaceForces, MatchConformingAssembly)
{
  const auto t = two_squares();
  const int d = 3;
  const long n = 8;
  std::vector<SubdomainSystem> sys;
  for (int m = 0; m < 2; ++m) sys.push_back(assemble_subdomain(t.mesh(m, d), MaterialModel{64, 0}, {Ordering::zorder, 1e-13}));
  const auto g = accumulate_interface_forces(sys, build_connectivity_table(t, d, Ordering::zorder), 1e-13);
  const auto ref = assemble_reference(t, MaterialModel{64, 0}, d);
  for (int m = 0; m < 2; ++m)
  {
    const Eigen::MatrixXd gy = unflatten_grid(tt_contract(g[m][1]), d, Ordering::zorder);
    const Eigen::MatrixXd fy = unflatten_grid(tt_contract(sys[m].f[1]), d, Ordering::zorder);
    for (long j = 0; j < n; ++j)
      for (long i = 0; i < n; ++i)
      {
        EXPECT_NEAR(gy(i, j), ref.f(2 * ref.mesh.node_map[m][i + n * j] + 1), 1e-12);
        const bool on_interface = (m == 0 && i == n - 1) || (m == 1 && i == 0);
        if (!on_interface) EXPECT_NEAR(gy(i, j), fy(i, j), 1e-13);
      }
  }

  std::vector<SubdomainSystem> unloaded;
  for (int m = 0; m < 2; ++m)
  {
    auto mesh = t.mesh(m, 2);
    mesh.body_force.setZero();
    unloaded.push_back(assemble_subdomain(mesh, MaterialModel{64, 0}));
  }
  const auto z = accumulate_interface_forces(unloaded, build_connectivity_table(t, 2, Ordering::zorder), 0);
  for (const auto& gm : z) EXPECT_EQ(tt_norm(gm[0]) + tt_norm(gm[1]), 0);
}

TEST(Concat, SingleSubdomainUnchangedAndArgumentChecks)
{
  const auto t = build_topology({box(0, 0, 1, 1)});
  const auto s = assemble_subdomain(t.mesh(0, 2), MaterialModel{64, 0});
  const auto g = concat_blocks({s}, build_connectivity_table(t, 2, Ordering::zorder), 5, 1e-12);
  EXPECT_EQ(g.subdomain_bits, 0);
  EXPECT_LT((tt_contract(g.K) - tt_contract(stack_components(s.K[0], s.K[1], s.K[2], s.K[3]))).norm(), 1e-10);
  EXPECT_THROW(concat_blocks({s}, {}, 0, 1e-12), ArgumentError);
  const auto s3 = assemble_subdomain(t.mesh(0, 3), MaterialModel{64, 0});
  EXPECT_THROW(concat_blocks({s, s3}, {}, 1, 1e-12), ArgumentError);
}

TEST(Coupled, ConformingEquivalenceOnBenchmarks)
{
  for (auto [name, d] : {std::pair{"cantilever", 2}, std::pair{"sen", 2}, std::pair{"sen", 3}, std::pair{"lshape", 2}, std::pair{"lshape", 3}})
    for (auto o : {Ordering::zorder, Ordering::canonical})
    {
      const auto cfg = builtin_config(name);
      const auto topo = build_topology(cfg.subdomains);
      BuildOptions opt;
      opt.assembly.ordering = o;
      opt.assembly.epsilon = 1e-12;
      const auto built = build_global_system(topo, d, cfg.material, opt);
      const Eigen::VectorXd u = dense_solve(built.system);
      EXPECT_LT(conforming_mismatch(topo, cfg.material, d, u, o), 1e-7) << name << " d=" << d;
    }
}

TEST(Coupled, PenaltyInsensitivityAndDuplicateConsistency)
{
  const auto t = two_squares(true);
  const MaterialModel mat{64, 0.3};
  BuildOptions opt;
  opt.assembly.epsilon = 1e-12;
  const auto a = build_global_system(t, 2, mat, opt);
  opt.gamma = 10 * a.system.gamma;
  const auto b = build_global_system(t, 2, mat, opt);
  const Eigen::VectorXd ua = dense_solve(a.system), ub = dense_solve(b.system);
  EXPECT_LT((ua - ub).norm(), 1e-8 * ua.norm());
  for (const auto& [x, y] : coincident_nodes(t, 0, 1, 2))
    for (int c = 0; c < 2; ++c)
    {
      const double u0 = ua(global_dof(c, z_index(x[0], x[1], 2), 0, 2)), u1 = ua(global_dof(c, z_index(y[0], y[1], 2), 1, 2));
      EXPECT_LT(std::abs(u0 - u1), 1e-8 * ua.norm());
    }
  EXPECT_LT(conforming_mismatch(t, mat, 2, ua, Ordering::zorder), 1e-8);
}

namespace
{
  double clamp_reaction(const ProblemConfig& cfg, int d)
  {
    const auto topo = build_topology(cfg.subdomains);
    BuildOptions opt;
    opt.assembly.epsilon = 1e-12;
    const auto built = build_global_system(topo, d, cfg.material, opt);
    const Eigen::VectorXd u = dense_solve(built.system);
    // reaction at the clamped DOFs of the first subdomain from its own unconstrained equations
    const auto& s0 = built.subsystems[0];
    const Eigen::MatrixXd K0 = tt_contract(stack_components(s0.K[0], s0.K[1], s0.K[2], s0.K[3]));
    const Eigen::VectorXd f0 = tt_contract(stack_components(s0.f[0], s0.f[1]));
    const long n = 2L << (2 * d);
    const Eigen::VectorXd r = K0 * u.head(n) - f0;
    double reaction = 0;
    for (long j = 0; j < (1L << d); ++j) reaction += r(1 + 2 * z_index(0, j, d));
    return reaction;
  }
}

TEST(Coupled, ClampReactionBalancesLoad)
{
  auto shortbeam = cantilever_config();
  shortbeam.subdomains.resize(4);
  EXPECT_NEAR(clamp_reaction(shortbeam, 2), 4, 1e-8);
  // the 20:1 beam amplifies operator round-off by its condition number
  EXPECT_NEAR(clamp_reaction(cantilever_config(), 2), 20, 20 * 1e-7);
}
