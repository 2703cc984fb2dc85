// Acceptance run: one PASS/FAIL line per criterion, detail lines indented above it.
// Usage: acceptance [criterion ...]   (default: all eight)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "qttfem/bench.hpp"
#include "qttfem/errors.hpp"
#include "support/dense_oracles.hpp"

using namespace qttfem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace
{
  using Clock = std::chrono::steady_clock;

  double seconds_since(Clock::time_point t0)
  {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  }

  template <class... A>
  std::string fmt(const char* f, A... a)
  {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
  }

  void detail(const std::string& s)
  {
    std::printf("    %s\n", s.c_str());
    std::fflush(stdout);
  }

  struct Verdict
  {
    bool pass = true;
    std::string summary;
  };

  // ---------------------------------------------------------------- 1

  Verdict tt_properties()
  {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> pick_d(1, 5), pick_r(1, 4);
    int instances = 0, failures = 0;
    std::map<std::string, int> failed_by_kind;
    auto check = [&](bool ok, const char* kind) {
      ++instances;
      if (!ok)
      {
        ++failures;
        ++failed_by_kind[kind];
      }
    };

    for (int k = 0; k < 60; ++k)
    {
      const int d = pick_d(rng);
      const std::vector<int> modes(d, 2);
      // round trip: exact decomposition of a dense vector
      const VectorXd v = oracle::random_vector(std::int64_t(1) << d, rng);
      check(oracle::rel(tt_contract(tt_decompose(v, 0.0)), v) <= 1e-12, "round trip");

      // rounding contract on a redundant-rank train
      const auto t = tt_add(tt_random(modes, pick_r(rng), rng), tt_scale(tt_random(modes, pick_r(rng), rng), 1e-4));
      const VectorXd full = tt_contract(t);
      for (double eps : {1e-2, 1e-4, 1e-8})
      {
        const auto r = tt_round(t, eps);
        check((tt_contract(r) - full).norm() <= eps * full.norm() * (1 + 1e-10) + 1e-300, "rounding");
      }
    }

    for (int k = 0; k < 60; ++k)
    {
      const int d = pick_d(rng);
      const std::vector<int> modes(d, 2);
      const auto a = tt_random(modes, pick_r(rng), rng), b = tt_random(modes, pick_r(rng), rng);
      const VectorXd A = tt_contract(a), B = tt_contract(b);
      const double s = std::normal_distribution<double>()(rng);
      check(oracle::rel(tt_contract(tt_add(a, b)), A + B) <= 1e-12, "add");
      check(oracle::rel(tt_contract(tt_scale(a, s)), s * A) <= 1e-12, "scale");
      check(oracle::rel(tt_contract(tt_hadamard(a, b)), A.cwiseProduct(B)) <= 1e-12, "hadamard");
      check(std::abs(tt_dot(a, b) - A.dot(B)) <= 1e-11 * A.norm() * B.norm(), "dot");

      const auto M = tt_random(modes, modes, pick_r(rng), rng), N = tt_random(modes, modes, pick_r(rng), rng);
      const MatrixXd Md = tt_contract(M), Nd = tt_contract(N);
      check(oracle::rel(tt_contract(tt_matvec(M, a)), Md * A) <= 1e-12, "matvec");
      check(oracle::rel(tt_contract(tt_matmat(M, N)), Md * Nd) <= 1e-12, "matmat");
      check(oracle::rel(tt_contract(tt_transpose(M)), Md.transpose()) <= 1e-14, "transpose");
    }

    for (int k = 0; k < 40; ++k)
    {
      const int d = 1 + k % 2;  // dense Kronecker oracle up to 16 x 16
      const std::vector<int> modes(d, 2);
      const auto A = tt_random(modes, modes, pick_r(rng), rng), B = tt_random(modes, modes, pick_r(rng), rng);
      const MatrixXd P = oracle::zorder_matrix(d);
      const MatrixXd expect = P.transpose() * oracle::kron(tt_contract(A), tt_contract(B)) * P;
      check(oracle::rel(tt_contract(tt_zkron(A, B)), expect) <= 1e-12, "zkron matrix");

      const int dv = 1 + k % 3;
      const std::vector<int> mv(dv, 2);
      const auto a = tt_random(mv, pick_r(rng), rng), b = tt_random(mv, pick_r(rng), rng);
      const VectorXd z = tt_contract(tt_zkron(a, b)), kr = oracle::kron(tt_contract(a), tt_contract(b));
      const auto perm = zorder_permutation(dv);
      double err = 0;
      for (std::size_t Z = 0; Z < perm.size(); ++Z) err = std::max(err, std::abs(z(Z) - kr(perm[Z])));
      check(err <= 1e-12 * kr.cwiseAbs().maxCoeff(), "zkron vector");
    }

    const double secs = seconds_since(t0);
    for (const auto& [kind, n] : failed_by_kind) detail(fmt("%s: %d failures", kind.c_str(), n));
    Verdict v;
    v.pass = failures == 0 && instances >= 200 && secs < 60;
    v.summary = fmt("TT property suite: %d instances, %d failures, %.1f s (need >= 200, 0, < 60 s)", instances, failures, secs);
    return v;
  }

  // ---------------------------------------------------------------- 2

  Verdict assembly_equivalence()
  {
    const auto t0 = Clock::now();
    bool ok = true;
    int runs = 0;
    for (const auto& cfg : {cantilever_config(), sen_config(), lshape_config()})
      for (int d = 2; d <= 4; ++d)
      {
        const auto rep = verify_case(cfg, d);
        ++runs;
        const bool pass = rep.stiffness_error <= 1e-10 && rep.solution_error <= 1e-7 && rep.connectivity_error == 0;
        ok = ok && pass;
        detail(fmt("%-10s d=%d  stiffness %.2e  solution %.2e  %s", cfg.name.c_str(), d, rep.stiffness_error, rep.solution_error, pass ? "ok" : "FAIL"));
      }
    const double secs = seconds_since(t0);
    Verdict v;
    v.pass = ok && secs < 300;
    v.summary = fmt("assembly equivalence: %d runs, stiffness <= 1e-10 and solution <= 1e-7, %.0f s (limit 300 s)", runs, secs);
    return v;
  }

  // ---------------------------------------------------------------- 3-6

  struct TargetSeries
  {
    double E2;
    double R6;
    std::map<int, long> Nd;
  };

  const std::map<std::string, TargetSeries>& target_series()
  {
    static const std::map<std::string, TargetSeries> s = {
      {"cantilever", {0.230071426451362, 39, {{2, 52}, {3, 356}, {4, 2264}, {5, 5988}, {6, 16676}}}},
      {"sen", {0.482606177929383, 38, {{2, 52}, {3, 356}, {4, 1652}, {5, 5412}, {6, 10756}}}},
      {"lshape", {0.254675605730967, 41, {{2, 52}, {3, 356}, {4, 2196}, {5, 7096}, {6, 14116}}}},
    };
    return s;
  }

  struct SweepData
  {
    std::vector<SolveReport> rows;
    std::map<std::string, SweepFit> fits;
    std::map<std::string, double> seconds;
    std::map<std::string, int> d_ref;
  };

  //! cantilever d=2..6 against d_ref=8; SEN and L-shape d=2..8 against d_ref=9
  const SweepData& sweeps()
  {
    static std::optional<SweepData> data;
    if (data) return *data;
    data.emplace();
    struct Plan { ProblemConfig cfg; int d_hi; int d_ref; };
    for (const auto& p : {Plan{cantilever_config(), 6, 8}, Plan{sen_config(), 8, 9}, Plan{lshape_config(), 8, 9}})
    {
      const auto t0 = Clock::now();
      ReferenceCache refs;
      auto rows = sweep(p.cfg, 2, p.d_hi, {1e-3}, refs, p.d_ref, [](const SolveReport& r) {
        detail(fmt("%-10s d=%d  E=%.4e  E_L2=%.4e  Rd=%d  Nd=%ld  erank K %.2f f %.2f  %s  %.1f s", r.case_name.c_str(), r.d, r.energy_error,
                   r.l2_error, r.Rd, long(r.Nd), r.erank_K, r.erank_f, r.converged ? "conv" : "NOT CONVERGED", r.wall_ms / 1e3));
      });
      data->seconds[p.cfg.name] = seconds_since(t0);
      data->d_ref[p.cfg.name] = p.d_ref;
      for (const auto& r : rows)
        if (r.drift) detail(fmt("%-10s d=%d marked as drift", r.case_name.c_str(), r.d));
      for (const auto& f : fit_sweep(rows)) data->fits[f.case_name] = f;
      data->rows.insert(data->rows.end(), rows.begin(), rows.end());
    }
    return *data;
  }

  std::vector<const SolveReport*> rows_of(const SweepData& s, const std::string& name)
  {
    std::vector<const SolveReport*> out;
    for (const auto& r : s.rows)
      if (r.case_name == name) out.push_back(&r);
    return out;
  }

  Verdict convergence_exponents()
  {
    const auto& s = sweeps();
    const std::map<std::string, double> expected = {{"cantilever", 1.0}, {"sen", 0.5}, {"lshape", 0.9}};
    bool ok = true;
    double total = 0;
    for (const auto& [name, alpha] : expected)
    {
      total += s.seconds.at(name);
      const auto& f = s.fits.at(name);
      const bool fit_ok = std::abs(f.alpha - alpha) <= 0.15;
      const double E2 = rows_of(s, name).front()->energy_error;
      const double target = target_series().at(name).E2;
      const bool decade_ok = std::abs(std::log10(E2 / target)) <= 1;
      ok = ok && fit_ok && decade_ok && f.points >= 3;
      detail(fmt("%-10s alpha %.3f (expected %.1f +- 0.15, %d points, d_ref %d)  %s", name.c_str(), f.alpha, alpha, f.points, s.d_ref.at(name),
                 fit_ok ? "ok" : "FAIL"));
      detail(fmt("%-10s E(d=2) %.4f vs target %.4f: within a decade %s", name.c_str(), E2, target, decade_ok ? "ok" : "FAIL"));
    }
    Verdict v;
    v.pass = ok && total < 1800;
    v.summary = fmt("convergence exponents at eps=1e-3 within +-0.15, d=2 errors within a decade, %.0f s (limit 1800 s)", total);
    return v;
  }

  Verdict rank_growth()
  {
    const auto& s = sweeps();
    bool ok = true;
    for (const auto& [name, target] : target_series())
    {
      const auto& f = s.fits.at(name);
      int R6 = 0;
      for (const auto* r : rows_of(s, name))
        if (r->d == 6) R6 = r->Rd;
      const bool theta_ok = f.theta <= 1.2;
      const bool r6_ok = R6 > 0 && R6 <= 2 * target.R6 && 2 * R6 >= target.R6;
      ok = ok && theta_ok && r6_ok;
      detail(fmt("%-10s theta %.3f (<= 1.2) %s;  R_6 %d vs target %.0f (factor 2) %s", name.c_str(), f.theta, theta_ok ? "ok" : "FAIL", R6, target.R6,
                 r6_ok ? "ok" : "FAIL"));
    }
    return {ok, "rank growth: theta <= 1.2 and R_6 within factor 2 of the target series"};
  }

  Verdict parameter_count()
  {
    const auto& s = sweeps();
    int checked = 0, inside = 0;
    for (const auto& [name, target] : target_series())
      for (const auto* r : rows_of(s, name))
      {
        auto it = target.Nd.find(r->d);
        if (it == target.Nd.end()) continue;
        const double ratio = double(r->Nd) / double(it->second);
        const bool in = ratio <= 2 && ratio >= 0.5;
        ++checked;
        inside += in;
        detail(fmt("%-10s d=%d  N_d %ld vs target %ld (ratio %.2f) %s", name.c_str(), r->d, long(r->Nd), it->second, ratio, in ? "ok" : "FAIL"));
      }
    return {checked > 0 && inside == checked, fmt("parameter count N_d within factor 2 of the target series for d <= 6: %d of %d points", inside, checked)};
  }

  //! sublinear: every consecutive log-log slope against dofs below 1, and slopes non-increasing up to noise
  bool sublinear(const std::vector<std::pair<double, double>>& pts, double& max_slope, double& last_slope)
  {
    max_slope = -1e300;
    double first = 0;
    for (std::size_t k = 1; k < pts.size(); ++k)
    {
      const double sl = (std::log(pts[k].second) - std::log(pts[k - 1].second)) / (std::log(pts[k].first) - std::log(pts[k - 1].first));
      if (k == 1) first = sl;
      max_slope = std::max(max_slope, sl);
      last_slope = sl;
    }
    return pts.size() >= 3 && max_slope < 1 && last_slope <= first + 0.05;
  }

  Verdict erank_asymptote()
  {
    const auto& s = sweeps();
    bool ok = true;
    for (const auto& [name, target] : target_series())
    {
      std::vector<std::pair<double, double>> K, f;
      for (const auto* r : rows_of(s, name))
      {
        K.emplace_back(double(r->dofs), r->erank_K);
        f.emplace_back(double(r->dofs), r->erank_f);
      }
      double mK = 0, lK = 0, mf = 0, lf = 0;
      const bool okK = sublinear(K, mK, lK), okf = sublinear(f, mf, lf);
      ok = ok && okK && okf;
      detail(fmt("%-10s erank K: max slope %.3f last %.3f %s;  erank f: max slope %.3f last %.3f %s", name.c_str(), mK, lK, okK ? "ok" : "FAIL", mf,
                 lf, okf ? "ok" : "FAIL"));
    }
    return {ok, "effective ranks of K and f sublinear in dofs with flattening log-log slope"};
  }

  // ---------------------------------------------------------------- 7

  Verdict solver_contract()
  {
    const auto t0 = Clock::now();
    int runs = 0, good = 0;
    bool deterministic = true;
    for (const auto& cfg : {cantilever_config(), sen_config(), lshape_config()})
    {
      const auto topo = build_topology(cfg.subdomains);
      for (int d = 2; d <= 5; ++d)
      {
        BuildOptions bo;
        bo.assembly.ordering = cfg.ordering;
        const auto built = build_global_system(topo, d, cfg.material, bo);
        for (double eps : {1e-3, 1e-5, 1e-7})
        {
          SolverConfig sc;
          sc.epsilon = eps;
          sc.seed = cfg.solver.seed;
          const auto out = solve(built.system.K, built.system.f, sc);
          const double res = residual(built.system.K, out.u, built.system.f);
          const bool ok = out.converged && res <= eps;
          ++runs;
          good += ok;
          detail(fmt("%-10s d=%d eps=%.0e  residual %.3e  sweeps %d  rank %d  %.1f s  %s", cfg.name.c_str(), d, eps, res, out.sweeps, out.u.max_rank(),
                     out.wall_ms / 1e3, ok ? "ok" : (out.converged ? "FAIL" : "FAIL (not converged)")));
          if (d == 4 && eps == 1e-5)
          {
            const auto again = solve(built.system.K, built.system.f, sc);
            const bool same = again.u.ranks() == out.u.ranks() && tt_contract(again.u) == tt_contract(out.u) && again.residual_history == out.residual_history;
            deterministic = deterministic && same;
            detail(fmt("%-10s d=4 eps=1e-5 repeated with the same seed: %s", cfg.name.c_str(), same ? "bit-identical" : "DIFFERENT"));
          }
        }
      }
    }
    Verdict v;
    v.pass = good == runs && deterministic;
    v.summary = fmt("solver contract: %d of %d runs converged with residual <= eps, determinism %s, %.0f s", good, runs,
                    deterministic ? "ok" : "broken", seconds_since(t0));
    return v;
  }

  // ---------------------------------------------------------------- 8

  Verdict structural_invariants()
  {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(-1, 1);
    int failures = 0, checks = 0;
    auto check = [&](bool ok, const std::string& what) {
      ++checks;
      if (!ok)
      {
        if (++failures <= 10) detail("FAIL " + what);
      }
    };

    // rigid-body kernel of element stiffness on perturbed quadrilaterals
    for (int k = 0; k < 50; ++k)
    {
      std::array<Eigen::Vector2d, 4> c;
      for (int a = 0; a < 4; ++a)
        c[a] = Eigen::Vector2d(reference_corners[a][0], reference_corners[a][1]) * (0.5 + 0.1 * (k % 3)) + 0.2 * Eigen::Vector2d(U(rng), U(rng));
      MaterialModel mat{1 + 100 * std::abs(U(rng)), 0.3 * std::abs(U(rng))};
      for (auto q : {Quadrature::gauss2, Quadrature::midpoint})
      {
        const Eigen::Matrix<double, 8, 8> Ke = element_stiffness_matrix(c, mat, q);
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 8, 8>> es(Ke);
        const auto ev = es.eigenvalues();
        int zero = 0;
        for (int i = 0; i < 8; ++i) zero += std::abs(ev(i)) <= 1e-10 * ev.cwiseAbs().maxCoeff();
        // one-point quadrature adds hourglass modes; only the full rule must have exactly three
        if (q == Quadrature::gauss2) check(zero == 3, fmt("element %d: kernel dimension %d", k, zero));
        else check(zero >= 3, fmt("element %d midpoint: kernel dimension %d", k, zero));
        Eigen::Matrix<double, 8, 3> rigid;
        for (int a = 0; a < 4; ++a)
        {
          rigid.row(2 * a) << 1, 0, -c[a].y();
          rigid.row(2 * a + 1) << 0, 1, c[a].x();
        }
        check((Ke * rigid).norm() <= 1e-11 * Ke.norm(), fmt("element %d: rigid motion not in kernel", k));
      }
    }

    // partition of unity
    for (int k = 0; k < 200; ++k)
    {
      const auto s = shape_functions(U(rng), U(rng));
      double sum = 0;
      Eigen::Vector2d g = Eigen::Vector2d::Zero();
      for (int a = 0; a < 4; ++a)
      {
        sum += s.value[a];
        g += s.gradient[a];
      }
      check(std::abs(sum - 1) <= 1e-15 && g.norm() <= 1e-15, "partition of unity");
    }

    // boundary masks: binary and idempotent for every combination of side tags
    const std::array<SideTag, 5> tags = {SideTag::free, SideTag::roller_x, SideTag::roller_y, SideTag::clamped, SideTag::traction};
    for (int d = 1; d <= 3; ++d)
      for (auto ord : {Ordering::canonical, Ordering::zorder})
        for (int combo = 0; combo < 625; ++combo)
        {
          std::array<SideCondition, 4> sides;
          for (int s = 0, c = combo; s < 4; ++s, c /= 5) sides[s].tag = tags[c % 5];
          const auto mask = build_boundary_mask(sides, d, ord);
          for (int a = 0; a < 2; ++a)
          {
            const VectorXd m = tt_contract(mask.component[a]);
            const VectorXd mm = tt_contract(tt_hadamard(mask.component[a], mask.component[a]));
            const bool binary = ((m.array().abs() <= 1e-13) || ((m.array() - 1).abs() <= 1e-13)).all();
            check(binary && (mm - m).cwiseAbs().maxCoeff() <= 1e-13, fmt("mask d=%d combo %d component %d", d, combo, a));
          }
        }

    // connectivity transpose duality, exhaustive over ordered pairs
    for (const auto& cfg : {cantilever_config(), sen_config(), lshape_config()})
    {
      const auto topo = build_topology(cfg.subdomains);
      for (int d = 1; d <= 3; ++d)
        for (auto ord : {Ordering::canonical, Ordering::zorder})
        {
          const auto table = build_connectivity_table(topo, d, ord);
          for (const auto& [key, op] : table)
          {
            if (key.first == key.second) continue;
            auto back = table.find({key.second, key.first});
            const bool ok = back != table.end() && (MatrixXd(tt_contract(op.Pi).transpose()) - tt_contract(back->second.Pi)).cwiseAbs().maxCoeff() <= 1e-12;
            check(ok, fmt("%s d=%d Pi(%d,%d)^T != Pi(%d,%d)", cfg.name.c_str(), d, key.first, key.second, key.second, key.first));
          }
        }
    }
    return {failures == 0, fmt("structural invariants: %d checks, %d failures", checks, failures)};
  }
}

int main(int argc, char** argv)
{
  std::set<int> want;
  for (int k = 1; k < argc; ++k) want.insert(std::atoi(argv[k]));
  if (want.empty()) want = {1, 2, 3, 4, 5, 6, 7, 8};

  const std::map<int, std::function<Verdict()>> criteria = {
    {1, tt_properties}, {2, assembly_equivalence}, {3, convergence_exponents}, {4, rank_growth},
    {5, parameter_count}, {6, erank_asymptote}, {7, solver_contract}, {8, structural_invariants},
  };

  int failed = 0;
  for (const auto& [n, run] : criteria)
  {
    if (!want.count(n)) continue;
    Verdict v;
    try
    {
      v = run();
    }
    catch (const std::exception& e)
    {
      v = {false, std::string("aborted: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", n, v.summary.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
