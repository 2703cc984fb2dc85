#include "qttfem/bench.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "qttfem/errors.hpp"

namespace qttfem
{
  namespace
  {
    using Clock = std::chrono::steady_clock;

    double ms_since(Clock::time_point t0)
    {
      return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    }

    BuildOptions build_options(const ProblemConfig& cfg)
    {
      BuildOptions o;
      o.assembly.ordering = cfg.ordering;
      o.assembly.quadrature = cfg.quadrature;
      o.assembly.paper_determinant = cfg.paper_determinant;
      o.gamma = cfg.gamma;
      return o;
    }

    std::string cache_key(const ProblemConfig& cfg, int d_ref)
    {
      std::ostringstream os;
      write_config(os, cfg);
      os << "#ref " << d_ref;
      return os.str();
    }

    //! y = a + b x
    struct LineFit { double a = 0, b = 0; };

    LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y)
    {
      const double n = static_cast<double>(x.size());
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t k = 0; k < x.size(); ++k)
      {
        sx += x[k]; sy += y[k]; sxx += x[k] * x[k]; sxy += x[k] * y[k];
      }
      const double den = n * sxx - sx * sx;
      if (den == 0) return {n > 0 ? sy / n : 0, 0};
      const double b = (n * sxy - sx * sy) / den;
      return {(sy - b * sx) / n, b};
    }

    std::vector<std::string> split(const std::string& line, char sep)
    {
      std::vector<std::string> out;
      std::string item;
      std::istringstream is(line);
      while (std::getline(is, item, sep)) out.push_back(item);
      if (!line.empty() && line.back() == sep) out.emplace_back();
      return out;
    }

    std::string fmt(double v)
    {
      std::ostringstream os;
      os << std::setprecision(17) << v;
      return os.str();
    }

    //! full dense Pi^(mp) from coordinate matching
    Eigen::MatrixXd coordinate_pi(const DomainTopology& topo, int m, int p, int d, Ordering ordering)
    {
      const long n = 1L << (2 * d);
      Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
      for (const auto& [a, b] : coincident_nodes(topo, m, p, d))
        P(node_index(a[0], a[1], d, ordering), node_index(b[0], b[1], d, ordering)) = 1;
      return P;
    }
  }

  std::int64_t dof_count(int q, int d)
  {
    return 2 * static_cast<std::int64_t>(q) << (2 * d);
  }

  const ReferenceSolution& ReferenceCache::get(const ProblemConfig& cfg, int d_ref)
  {
    auto& slot = cache_[cache_key(cfg, d_ref)];
    if (!slot)
    {
      auto ref = std::make_unique<ReferenceSolution>();
      ref->d_ref = d_ref;
      ref->system = assemble_reference(build_topology(cfg.subdomains), cfg.material, d_ref, cfg.quadrature);
      ref->u = conforming_solve(ref->system);
      ref->energy_norm = energy_norm(ref->system, ref->u);
      ref->l2_norm = l2_norm(ref->system, ref->u);
      slot = std::move(ref);
    }
    return *slot;
  }

  SolveReport run_case(const ProblemConfig& cfg, int d, double eps, ReferenceCache& refs, int d_ref)
  {
    if (d_ref <= 0) d_ref = cfg.d_ref;
    if (d < 1 || d > 12) throw ArgumentError("d must lie in [1, 12]");
    if (!(eps > 0)) throw ArgumentError("eps must be positive");
    if (d > d_ref) throw ArgumentError("reference level " + std::to_string(d_ref) + " is coarser than d = " + std::to_string(d));

    const auto& ref = refs.get(cfg, d_ref);
    const auto topo = build_topology(cfg.subdomains);

    SolveReport r;
    r.case_name = cfg.name;
    r.d = d;
    r.eps = eps;
    r.dofs = dof_count(topo.q(), d);

    const auto t0 = Clock::now();
    const auto built = build_global_system(topo, d, cfg.material, build_options(cfg));
    SolverConfig sc;
    sc.epsilon = eps;
    sc.max_sweeps = cfg.solver.max_sweeps;
    sc.kick_rank = cfg.solver.kick_rank;
    sc.seed = cfg.solver.seed;
    const auto out = solve(built.system.K, built.system.f, sc);
    r.wall_ms = ms_since(t0);
    r.converged = out.converged;

    const auto pu = rank_profile(out.u);
    const auto pK = rank_profile(built.system.K);
    const auto pf = rank_profile(built.system.f);
    r.Rd = pu.max_rank;
    r.Nd = pu.param_count;
    r.erank_u = pu.effective_rank;
    r.erank_K = pK.effective_rank;
    r.erank_f = pf.effective_rank;
    r.storage_K = pK.storage_count;
    r.storage_f = pf.storage_count;

    const Eigen::VectorXd u = tt_contract(out.u);
    std::vector<std::array<Eigen::MatrixXd, 2>> grids;
    for (int m = 0; m < topo.q(); ++m) grids.push_back(displacement_grids(u, d, m, cfg.ordering));
    const Eigen::VectorXd uf = interpolate_to_mesh(grids, ref.system.mesh);
    r.energy_error = energy_error(ref.system, uf, ref.u) / ref.energy_norm;
    r.l2_error = l2_error(ref.system, uf, ref.u) / ref.l2_norm;
    return r;
  }

  void mark_drift(std::vector<SolveReport>& rows)
  {
    std::map<std::pair<std::string, double>, int> best_d;
    std::map<std::pair<std::string, double>, double> best_e;
    for (const auto& r : rows)
    {
      const auto key = std::make_pair(r.case_name, r.eps);
      auto it = best_e.find(key);
      if (it == best_e.end() || r.energy_error < it->second || (r.energy_error == it->second && r.d < best_d[key]))
      {
        best_e[key] = r.energy_error;
        best_d[key] = r.d;
      }
    }
    for (auto& r : rows) r.drift = r.d > best_d[{r.case_name, r.eps}];
  }

  std::vector<SweepFit> fit_sweep(const std::vector<SolveReport>& rows)
  {
    std::vector<std::pair<std::string, double>> order;
    std::map<std::pair<std::string, double>, std::vector<const SolveReport*>> groups;
    for (const auto& r : rows)
    {
      if (r.drift || !(r.energy_error > 0) || r.Rd <= 0 || r.Nd <= 0) continue;
      const auto key = std::make_pair(r.case_name, r.eps);
      if (!groups.count(key)) order.push_back(key);
      groups[key].push_back(&r);
    }
    std::vector<SweepFit> fits;
    for (const auto& key : order)
    {
      const auto& g = groups[key];
      if (g.size() < 2) continue;
      std::vector<double> d, logd, logE, logR, logN;
      for (const auto* r : g)
      {
        d.push_back(r->d);
        logd.push_back(std::log(double(r->d)));
        logE.push_back(std::log2(r->energy_error));
        logR.push_back(std::log(double(r->Rd)));
        logN.push_back(std::log(double(r->Nd)));
      }
      SweepFit f;
      f.case_name = key.first;
      f.eps = key.second;
      f.points = static_cast<int>(g.size());
      const auto fe = least_squares(d, logE);
      f.alpha = -fe.b;
      f.C_alpha = std::exp2(fe.a);
      const auto fr = least_squares(logd, logR);
      f.theta = fr.b;
      f.c_theta = std::exp(fr.a);
      const auto fn = least_squares(logd, logN);
      f.kappa = fn.b;
      f.C_kappa = std::exp(fn.a);
      fits.push_back(f);
    }
    return fits;
  }

  std::vector<SolveReport> sweep(const ProblemConfig& cfg, int d_lo, int d_hi, const std::vector<double>& eps_list, ReferenceCache& refs, int d_ref, const ProgressFn& progress)
  {
    if (d_lo > d_hi) throw ArgumentError("empty d range");
    std::vector<SolveReport> rows;
    for (double eps : eps_list)
      for (int d = d_lo; d <= d_hi; ++d)
      {
        rows.push_back(run_case(cfg, d, eps, refs, d_ref));
        if (progress) progress(rows.back());
      }
    mark_drift(rows);
    return rows;
  }

  std::string csv_header()
  {
    return "case,d,eps,dofs,energy_error,l2_error,Rd,Nd,erank_K,erank_f,erank_u,storage_K,storage_f,wall_ms,converged,drift";
  }

  void write_csv(std::ostream& os, const std::vector<SolveReport>& rows, const std::vector<SweepFit>& fits)
  {
    os << csv_header() << '\n';
    for (const auto& r : rows)
    {
      os << r.case_name << ',' << r.d << ',' << fmt(r.eps) << ',' << r.dofs << ',' << fmt(r.energy_error) << ','
         << fmt(r.l2_error) << ',' << r.Rd << ',' << r.Nd << ',' << fmt(r.erank_K) << ',' << fmt(r.erank_f) << ','
         << fmt(r.erank_u) << ',' << r.storage_K << ',' << r.storage_f << ',' << fmt(r.wall_ms) << ','
         << int(r.converged) << ',' << int(r.drift) << '\n';
    }
    for (const auto& f : fits)
    {
      os << "# fit case=" << f.case_name << " eps=" << fmt(f.eps) << " points=" << f.points
         << " alpha=" << fmt(f.alpha) << " C_alpha=" << fmt(f.C_alpha)
         << " theta=" << fmt(f.theta) << " c_theta=" << fmt(f.c_theta)
         << " kappa=" << fmt(f.kappa) << " C_kappa=" << fmt(f.C_kappa) << '\n';
    }
  }

  std::vector<SolveReport> parse_csv(std::istream& is)
  {
    std::vector<SolveReport> rows;
    std::string line;
    bool header = false;
    int lineno = 0;
    while (std::getline(is, line))
    {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      if (!header)
      {
        if (line != csv_header()) throw ArgumentError("unexpected CSV header: " + line);
        header = true;
        continue;
      }
      const auto f = split(line, ',');
      if (f.size() != 16) throw ArgumentError("line " + std::to_string(lineno) + ": expected 16 fields, got " + std::to_string(f.size()));
      try
      {
        SolveReport r;
        r.case_name = f[0];
        r.d = std::stoi(f[1]);
        r.eps = std::stod(f[2]);
        r.dofs = std::stoll(f[3]);
        r.energy_error = std::stod(f[4]);
        r.l2_error = std::stod(f[5]);
        r.Rd = std::stoi(f[6]);
        r.Nd = std::stoll(f[7]);
        r.erank_K = std::stod(f[8]);
        r.erank_f = std::stod(f[9]);
        r.erank_u = std::stod(f[10]);
        r.storage_K = std::stoll(f[11]);
        r.storage_f = std::stoll(f[12]);
        r.wall_ms = std::stod(f[13]);
        r.converged = std::stoi(f[14]) != 0;
        r.drift = std::stoi(f[15]) != 0;
        rows.push_back(r);
      }
      catch (const std::logic_error&)
      {
        throw ArgumentError("line " + std::to_string(lineno) + ": malformed number");
      }
    }
    return rows;
  }

  VerifyReport verify_case(const ProblemConfig& cfg, int d, const ConnectivityTable* connectivity)
  {
    if (d < 1 || d > 4) throw ArgumentError("verify needs 1 <= d <= 4");
    VerifyReport rep;
    auto line = [&](bool ok, const std::string& what) {
      rep.lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
      rep.pass = rep.pass && ok;
    };
    auto sci = [](double v) {
      std::ostringstream os;
      os << std::scientific << std::setprecision(2) << v;
      return os.str();
    };

    const auto topo = build_topology(cfg.subdomains);
    const int q = topo.q();
    const auto opts = build_options(cfg);
    const auto built = connectivity ? build_global_system(topo, d, cfg.material, opts, *connectivity)
                                    : build_global_system(topo, d, cfg.material, opts);

    // connectivity against coordinate matching
    double bad_total = 0;
    for (int m = 0; m < q; ++m)
      for (int p = 0; p < q; ++p)
      {
        if (m == p) continue;
        const Eigen::MatrixXd expect = coordinate_pi(topo, m, p, d, cfg.ordering);
        auto it = built.connectivity.find({m, p});
        const bool have = it != built.connectivity.end() && !it->second.empty;
        const Eigen::MatrixXd got = have ? tt_contract(it->second.Pi) : Eigen::MatrixXd::Zero(expect.rows(), expect.cols());
        const long bad = ((got - expect).array().abs() > 1e-12).count();
        bad_total += bad;
        if (bad > 0)
          line(false, "interface mismatch between subdomains " + std::to_string(m) + " and " + std::to_string(p) + ": " +
                          std::to_string(bad) + " entries of Pi differ from coordinate matching (" +
                          std::to_string(long(expect.sum())) + " coincident node pairs)");
      }
    rep.connectivity_error = bad_total;
    if (bad_total == 0) line(true, "connectivity matches coincident nodes for all " + std::to_string(q * (q - 1)) + " ordered pairs");

    // duplicate-node reduction of the subdomain operators
    const auto ref = assemble_reference(topo, cfg.material, d, cfg.quadrature);
    const long nn = 1L << d;
    const long nodes = nn * nn;
    std::vector<Eigen::Triplet<double>> trip;
    for (int m = 0; m < q; ++m)
    {
      std::vector<long> merged(nodes);
      for (long j = 0; j < nn; ++j)
        for (long i = 0; i < nn; ++i) merged[node_index(i, j, d, cfg.ordering)] = ref.mesh.node_map[m][i + nn * j];
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
        {
          const Eigen::MatrixXd B = tt_contract(built.subsystems[m].Kab(a, b));
          for (long c = 0; c < nodes; ++c)
            for (long r = 0; r < nodes; ++r)
              if (B(r, c) != 0) trip.emplace_back(2 * merged[r] + a, 2 * merged[c] + b, B(r, c));
        }
    }
    Eigen::SparseMatrix<double> Kred(ref.K.rows(), ref.K.cols());
    Kred.setFromTriplets(trip.begin(), trip.end());
    rep.stiffness_error = (Kred - ref.K).norm() / ref.K.norm();
    line(rep.stiffness_error <= 1e-10, "duplicate-reduced stiffness vs conforming K: relative Frobenius " + sci(rep.stiffness_error) + " (limit 1e-10)");

    // coupled solve against the conforming solution
    const Eigen::SparseMatrix<double> S = global_sparse(built.system);
    const long n = 2 * nodes;
    Eigen::VectorXd f(S.rows());
    for (int m = 0; m < q; ++m) f.segment(m * n, n) = global_segment(built.system, m);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(S);
    if (lu.info() != Eigen::Success)
    {
      line(false, "coupled system could not be factorized");
      return rep;
    }
    const Eigen::VectorXd u = lu.solve(f);
    const Eigen::VectorXd ur = conforming_solve(ref);
    double diff = 0, norm = 0;
    for (int m = 0; m < q; ++m)
      for (long j = 0; j < nn; ++j)
        for (long i = 0; i < nn; ++i)
          for (int a = 0; a < 2; ++a)
          {
            const double v = ur(2 * ref.mesh.node_map[m][i + nn * j] + a);
            const double e = u(global_dof(a, node_index(i, j, d, cfg.ordering), m, d)) - v;
            diff += e * e;
            norm += v * v;
          }
    rep.solution_error = norm > 0 ? std::sqrt(diff / norm) : std::sqrt(diff);
    line(rep.solution_error <= 1e-7, "coupled solution vs conforming solution: relative L2 " + sci(rep.solution_error) + " (limit 1e-7)");

    // copies of one physical node carry one displacement
    double gap = 0;
    for (int m = 0; m < q; ++m)
      for (int p = m + 1; p < q; ++p)
        for (const auto& [x, y] : coincident_nodes(topo, m, p, d))
          for (int a = 0; a < 2; ++a)
            gap = std::max(gap, std::abs(u(global_dof(a, node_index(x[0], x[1], d, cfg.ordering), m, d)) -
                                         u(global_dof(a, node_index(y[0], y[1], d, cfg.ordering), p, d))));
    const double umax = u.cwiseAbs().maxCoeff();
    rep.duplicate_gap = umax > 0 ? gap / umax : gap;
    line(rep.duplicate_gap <= 1e-7, "duplicated interface DOFs agree: max gap " + sci(rep.duplicate_gap) + " of max |u| (limit 1e-7)");
    return rep;
  }
}
