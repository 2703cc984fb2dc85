#include "qttfem/solver.hpp"

#include <chrono>
#include <cmath>

#include "qttfem/errors.hpp"

namespace qttfem
{
  namespace
  {
    using T2 = Eigen::Tensor<double, 2>;
    using T3 = Eigen::Tensor<double, 3>;
    using IP = Eigen::IndexPair<int>;
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    template <int N>
    using Pairs = Eigen::array<IP, N>;

    // frame conventions: operator frames (bra, op, ket), vector frames (bra, rhs)

    T3 left_op_frame(const T3& F, const Core3& P, const Core4& A, const Core3& X)
    {
      const Eigen::Tensor<double, 4> t1 = F.contract(X, Pairs<1>{IP(2, 0)});                    // (a, ra, j, b')
      const Eigen::Tensor<double, 4> t2 = t1.contract(A, Pairs<2>{IP(1, 0), IP(2, 2)});         // (a, b', i, ra')
      const T3 t3 = P.contract(t2, Pairs<2>{IP(0, 0), IP(1, 2)});                                // (a', b', ra')
      return t3.shuffle(Eigen::array<int, 3>{0, 2, 1});
    }

    T3 right_op_frame(const T3& F, const Core3& P, const Core4& A, const Core3& X)
    {
      const Eigen::Tensor<double, 4> t1 = X.contract(F, Pairs<1>{IP(2, 2)});                    // (b, j, a', ra')
      const Eigen::Tensor<double, 4> t2 = A.contract(t1, Pairs<2>{IP(2, 1), IP(3, 3)});         // (ra, i, b, a')
      return P.contract(t2, Pairs<2>{IP(1, 1), IP(2, 3)});                                       // (a, ra, b)
    }

    T2 left_vec_frame(const T2& F, const Core3& P, const Core3& B)
    {
      const T3 t1 = F.contract(B, Pairs<1>{IP(1, 0)});    // (a, i, rb')
      return P.contract(t1, Pairs<2>{IP(0, 0), IP(1, 1)});  // (a', rb')
    }

    T2 right_vec_frame(const T2& F, const Core3& P, const Core3& B)
    {
      const T3 t1 = B.contract(F, Pairs<1>{IP(2, 1)});    // (rb, i, a')
      return P.contract(t1, Pairs<2>{IP(1, 1), IP(2, 2)});  // (a, rb)
    }

    T3 local_apply(const T3& FL, const Core4& A, const T3& FR, const T3& x)
    {
      const Eigen::Tensor<double, 4> t1 = FL.contract(x, Pairs<1>{IP(2, 0)});               // (a', ra, j, b)
      const Eigen::Tensor<double, 4> t2 = t1.contract(A, Pairs<2>{IP(1, 0), IP(2, 2)});     // (a', b, i, ra')
      return t2.contract(FR, Pairs<2>{IP(1, 2), IP(3, 1)});                                 // (a', i, b')
    }

    T3 local_rhs(const T2& GL, const Core3& B, const T2& GR)
    {
      const T3 t1 = GL.contract(B, Pairs<1>{IP(1, 0)});  // (a', i, rb')
      return t1.contract(GR, Pairs<1>{IP(2, 1)});         // (a', i, b')
    }

    Eigen::Map<const VectorXd> flat(const T3& t) { return {t.data(), t.size()}; }
    Eigen::Map<VectorXd> flat(T3& t) { return {t.data(), t.size()}; }

    T3 shaped(const VectorXd& v, Eigen::Index r0, Eigen::Index n, Eigen::Index r1)
    {
      T3 t(r0, n, r1);
      std::copy(v.data(), v.data() + v.size(), t.data());
      return t;
    }

    T3 ones3() { T3 t(1, 1, 1); t.setConstant(1); return t; }
    T2 ones2() { T2 t(1, 1); t.setConstant(1); return t; }

    // local operator FL (x) A (x) FR with dense and preconditioned iterative solves
    struct LocalProblem
    {
      const T3& FL;
      const Core4& A;
      const T3& FR;
      Eigen::Index r0, n, r1;

      long size() const { return r0 * n * r1; }

      VectorXd apply(const VectorXd& v) const
      {
        const T3 y = local_apply(FL, A, FR, shaped(v, r0, n, r1));
        return flat(y);
      }

      // (a', a, i, j, ra')
      Eigen::Tensor<double, 5> left_part() const { return FL.contract(A, Pairs<1>{IP(1, 0)}); }

      MatrixXd dense() const
      {
        const Eigen::Tensor<double, 6> t2 = left_part().contract(FR, Pairs<1>{IP(4, 1)});  // (a', a, i, j, b', b)
        const Eigen::Tensor<double, 6> s = t2.shuffle(Eigen::array<int, 6>{0, 2, 4, 1, 3, 5});
        return Eigen::Map<const MatrixXd>(s.data(), size(), size());
      }

      // one LU per right-rank index
      std::vector<Eigen::PartialPivLU<MatrixXd>> block_jacobi() const
      {
        const auto L = left_part();
        std::vector<Eigen::PartialPivLU<MatrixXd>> blocks;
        const Eigen::Index m = r0 * n;
        for (Eigen::Index b = 0; b < r1; ++b)
        {
          Eigen::Tensor<double, 1> fr(FR.dimension(1));
          for (Eigen::Index k = 0; k < fr.size(); ++k) fr(k) = FR(b, k, b);
          const Eigen::Tensor<double, 4> t = L.contract(fr, Pairs<1>{IP(4, 0)});  // (a', a, i, j)
          const Eigen::Tensor<double, 4> s = t.shuffle(Eigen::array<int, 4>{0, 2, 1, 3});
          blocks.emplace_back(Eigen::Map<const MatrixXd>(s.data(), m, m));
        }
        return blocks;
      }
    };

    struct GmresResult
    {
      VectorXd x;
      double rel_residual;
    };

    // restarted GMRES, right preconditioned
    template <class Apply, class Precond>
    GmresResult gmres(const Apply& A, const Precond& M, const VectorXd& b, VectorXd x, double tol, int restart, int max_iter)
    {
      const double bn = b.norm();
      if (bn == 0) return {VectorXd::Zero(b.size()), 0};
      VectorXd r = b - A(x);
      double rn = r.norm();
      int it = 0;
      while (rn > tol * bn && it < max_iter)
      {
        const int m = std::min(restart, max_iter - it);
        MatrixXd V(b.size(), m + 1), Z(b.size(), m), H = MatrixXd::Zero(m + 1, m);
        VectorXd g = VectorXd::Zero(m + 1), cs(m), sn(m);
        V.col(0) = r / rn;
        g(0) = rn;
        int k = 0;
        for (; k < m; ++k, ++it)
        {
          Z.col(k) = M(V.col(k));
          VectorXd w = A(Z.col(k));
          for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i <= k; ++i)
            {
              const double h = V.col(i).dot(w);
              H(i, k) += h;
              w -= h * V.col(i);
            }
          H(k + 1, k) = w.norm();
          if (H(k + 1, k) > 0) V.col(k + 1) = w / H(k + 1, k);
          for (int i = 0; i < k; ++i)
          {
            const double t = cs(i) * H(i, k) + sn(i) * H(i + 1, k);
            H(i + 1, k) = -sn(i) * H(i, k) + cs(i) * H(i + 1, k);
            H(i, k) = t;
          }
          const double den = std::hypot(H(k, k), H(k + 1, k));
          cs(k) = den == 0 ? 1 : H(k, k) / den;
          sn(k) = den == 0 ? 0 : H(k + 1, k) / den;
          H(k, k) = den;
          H(k + 1, k) = 0;
          g(k + 1) = -sn(k) * g(k);
          g(k) = cs(k) * g(k);
          if (std::abs(g(k + 1)) <= tol * bn || H(k + 1, k) == 0 && den == 0)
          {
            ++k;
            ++it;
            break;
          }
        }
        const VectorXd y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        x += Z.leftCols(k) * y;
        r = b - A(x);
        const double prev = rn;
        rn = r.norm();
        if (rn >= prev * (1 - 1e-12) && k < m) break;  // stagnation
      }
      return {x, rn / bn};
    }

    int max_rank_of(const TTVector& x) { return x.max_rank(); }

    // z ranks bounded by kick and by the mode products on either side
    std::vector<int> kick_ranks(const std::vector<int>& modes, int kick)
    {
      const int D = static_cast<int>(modes.size());
      std::vector<int> r(D + 1, 1);
      double left = 1;
      for (int k = 1; k < D; ++k)
      {
        left *= modes[k - 1];
        double right = 1;
        for (int l = k; l < D; ++l) right *= modes[l];
        r[k] = static_cast<int>(std::min<double>({double(kick), left, right}));
      }
      return r;
    }

    TTVector random_with_ranks(const std::vector<int>& modes, const std::vector<int>& ranks, std::mt19937_64& rng)
    {
      std::normal_distribution<double> g;
      std::vector<Core3> cores;
      for (std::size_t k = 0; k < modes.size(); ++k)
      {
        Core3 c(ranks[k], modes[k], ranks[k + 1]);
        for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = g(rng);
        cores.push_back(std::move(c));
      }
      return TTVector(std::move(cores));
    }

    MatrixXd thin_q(const MatrixXd& M, MatrixXd* R = nullptr)
    {
      const auto k = std::min(M.rows(), M.cols());
      Eigen::HouseholderQR<MatrixXd> qr(M);
      if (R) *R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
      return qr.householderQ() * MatrixXd::Identity(M.rows(), k);
    }

    // right-orthogonalizes core k, pushing the factor into core k-1
    void right_orth_step(TTVector& x, int k)
    {
      auto& c = x.core(k);
      const auto r0 = c.dimension(0), n = c.dimension(1), r1 = c.dimension(2);
      const MatrixXd M = right_unfold(c).transpose();  // (n r1) x r0
      MatrixXd R;
      const MatrixXd Q = thin_q(M, &R);
      const MatrixXd Qt = Q.transpose();
      c = shaped(Eigen::Map<const VectorXd>(Qt.data(), Qt.size()), Q.cols(), n, r1);
      auto& p = x.core(k - 1);
      const MatrixXd np = left_unfold(p) * R.transpose();
      p = shaped(Eigen::Map<const VectorXd>(np.data(), np.size()), p.dimension(0), p.dimension(1), R.rows());
      (void)r0;
    }

    double dense_residual(const TTMatrix& K, const TTVector& u, const TTVector& f)
    {
      const VectorXd fd = tt_contract(f);
      const double fn = fd.norm();
      const VectorXd r = tt_matvec_dense(K, tt_contract(u)) - fd;
      return fn == 0 ? (r.norm() == 0 ? 0 : std::numeric_limits<double>::infinity()) : r.norm() / fn;
    }
  }

  double residual(const TTMatrix& K, const TTVector& u, const TTVector& f, double rounding_eps)
  {
    if (K.row_modes() != f.modes() || K.col_modes() != u.modes()) throw ArgumentError("mode mismatch between operator and vectors");
    if (f.size() <= (std::int64_t(1) << 22)) return dense_residual(K, u, f);
    const double fn = tt_norm(f);
    const TTVector r = tt_round(tt_axpy(tt_round(tt_matvec(K, u), rounding_eps), -1, f), rounding_eps);
    const double rn = tt_norm(r);
    return fn == 0 ? (rn == 0 ? 0 : std::numeric_limits<double>::infinity()) : rn / fn;
  }

  SolveOutcome solve(const TTMatrix& A, const TTVector& b, const SolverConfig& cfg)
  {
    const auto t0 = std::chrono::steady_clock::now();
    if (!(cfg.epsilon > 0)) throw ArgumentError("solver tolerance must be positive");
    if (cfg.max_sweeps < 1) throw ArgumentError("max_sweeps must be at least 1");
    if (A.row_modes() != b.modes() || A.col_modes() != b.modes()) throw ArgumentError("operator and right-hand side modes differ");
    const int D = A.order();
    const auto modes = b.modes();
    const auto elapsed = [&] { return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count(); };
    const auto say = [&](const std::string& s) { if (cfg.log) cfg.log(s); };

    SolveOutcome out;
    const double bnorm = tt_norm(b);
    if (bnorm == 0)
    {
      out.u = tt_zeros(modes);
      out.converged = true;
      out.wall_ms = elapsed();
      return out;
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<int> xr(D + 1, 1);
    for (int k = 1; k < D; ++k) xr[k] = std::min(cfg.init_rank, kick_ranks(modes, cfg.init_rank)[k]);
    TTVector x = random_with_ranks(modes, xr, rng);
    TTVector z = random_with_ranks(modes, kick_ranks(modes, std::max(cfg.kick_rank, 1)), rng);
    const bool enrich = cfg.kick_rank > 0;

    std::vector<T3> XAX(D + 1), ZAX(D + 1);
    std::vector<T2> XB(D + 1), ZB(D + 1);
    XAX[0] = XAX[D] = ZAX[0] = ZAX[D] = ones3();
    XB[0] = XB[D] = ZB[0] = ZB[D] = ones2();

    const auto backward = [&] {
      for (int k = D - 1; k >= 1; --k)
      {
        right_orth_step(x, k);
        right_orth_step(z, k);
        XAX[k] = right_op_frame(XAX[k + 1], x.core(k), A.core(k), x.core(k));
        XB[k] = right_vec_frame(XB[k + 1], x.core(k), b.core(k));
        ZAX[k] = right_op_frame(ZAX[k + 1], z.core(k), A.core(k), x.core(k));
        ZB[k] = right_vec_frame(ZB[k + 1], z.core(k), b.core(k));
      }
    };
    backward();

    double tol = cfg.epsilon;
    double best_res = std::numeric_limits<double>::infinity();
    TTVector best = x;
    const double sqrtD = std::sqrt(double(D));
    for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep)
    {
      double max_res = 0;
      for (int k = 0; k < D; ++k)
      {
        const auto r0 = x.core(k).dimension(0), n = x.core(k).dimension(1), r1 = x.core(k).dimension(2);
        LocalProblem lp{XAX[k], A.core(k), XAX[k + 1], r0, n, r1};
        const T3 rhs_t = local_rhs(XB[k], b.core(k), XB[k + 1]);
        const VectorXd rhs = flat(rhs_t);
        const double rhs_norm = rhs.norm();
        const VectorXd x_old = flat(x.core(k));
        const double res_old = rhs_norm == 0 ? 0 : (lp.apply(x_old) - rhs).norm() / rhs_norm;
        max_res = std::max(max_res, res_old);

        VectorXd sol;
        const bool direct = cfg.local == LocalSolver::direct || (cfg.local == LocalSolver::automatic && lp.size() <= cfg.dense_limit);
        const double local_tol = tol / sqrtD;
        if (rhs_norm == 0)
          sol = VectorXd::Zero(lp.size());
        else if (res_old <= local_tol * 0.1)
          sol = x_old;
        else if (direct)
          sol = lp.dense().partialPivLu().solve(rhs);
        else
        {
          const auto blocks = lp.block_jacobi();
          const Eigen::Index m = r0 * n;
          const auto prec = [&](const VectorXd& v) {
            VectorXd y(v.size());
            for (Eigen::Index bi = 0; bi < r1; ++bi) y.segment(bi * m, m) = blocks[bi].solve(v.segment(bi * m, m));
            return y;
          };
          const auto op = [&](const VectorXd& v) { return lp.apply(v); };
          sol = gmres(op, prec, rhs, x_old, std::min(local_tol * 0.1, res_old * 0.5), 40, 400).x;
        }
        const double res_sol = rhs_norm == 0 ? 0 : (lp.apply(sol) - rhs).norm() / rhs_norm;

        if (k == D - 1)
        {
          x.core(k) = shaped(sol, r0, n, r1);
          break;
        }

        // truncation: smallest rank whose local residual stays within the target
        const Eigen::Map<const MatrixXd> S(sol.data(), r0 * n, r1);
        Eigen::JacobiSVD<MatrixXd> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        const int full = static_cast<int>(sv.size());
        const double target = std::max(local_tol, 1.5 * res_sol);
        const auto trunc = [&](int r) -> MatrixXd { return svd.matrixU().leftCols(r) * sv.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose(); };
        const auto res_of = [&](int r) {
          const MatrixXd T = trunc(r);
          return rhs_norm == 0 ? 0.0 : (lp.apply(Eigen::Map<const VectorXd>(T.data(), T.size())) - rhs).norm() / rhs_norm;
        };
        int lo = 1, hi = full;
        while (lo < hi && sv(lo - 1) > 0)
        {
          const int mid = (lo + hi) / 2;
          if (res_of(mid) <= target) hi = mid;
          else lo = mid + 1;
        }
        int rank = std::max(1, lo);
        while (rank > 1 && sv(rank - 1) <= 1e-15 * sv(0)) --rank;
        MatrixXd U = svd.matrixU().leftCols(rank);
        const MatrixXd SVt = sv.head(rank).asDiagonal() * svd.matrixV().leftCols(rank).transpose();  // rank x r1
        const MatrixXd xt = U * SVt;
        const T3 xt_core = shaped(Eigen::Map<const VectorXd>(xt.data(), xt.size()), r0, n, r1);

        // residual projections for the z update and the enrichment
        if (enrich)
        {
          const T3 zr = local_apply(ZAX[k], A.core(k), ZAX[k + 1], xt_core);
          const T3 zb = local_rhs(ZB[k], b.core(k), ZB[k + 1]);
          const auto zr0 = z.core(k).dimension(0), zr1 = z.core(k).dimension(2);
          const VectorXd zl = flat(zb) - flat(zr);
          const MatrixXd Zq = thin_q(Eigen::Map<const MatrixXd>(zl.data(), zr0 * n, zr1));
          MatrixXd Zfull = MatrixXd::Zero(zr0 * n, zr1);
          Zfull.leftCols(Zq.cols()) = Zq;
          z.core(k) = shaped(Eigen::Map<const VectorXd>(Zfull.data(), Zfull.size()), zr0, n, zr1);

          const T3 er = local_apply(XAX[k], A.core(k), ZAX[k + 1], xt_core);
          const T3 eb = local_rhs(XB[k], b.core(k), ZB[k + 1]);
          const VectorXd el = flat(eb) - flat(er);
          MatrixXd UE(r0 * n, rank + zr1);
          UE << U, Eigen::Map<const MatrixXd>(el.data(), r0 * n, zr1);
          MatrixXd R;
          U = thin_q(UE, &R);
          // x_{k+1} <- R [S V^T; 0] x_{k+1}
          const MatrixXd carry = R.leftCols(rank) * SVt;
          auto& next = x.core(k + 1);
          const MatrixXd nn = carry * right_unfold(next);
          next = shaped(Eigen::Map<const VectorXd>(nn.data(), nn.size()), carry.rows(), next.dimension(1), next.dimension(2));
        }
        else
        {
          auto& next = x.core(k + 1);
          const MatrixXd nn = SVt * right_unfold(next);
          next = shaped(Eigen::Map<const VectorXd>(nn.data(), nn.size()), rank, next.dimension(1), next.dimension(2));
        }
        x.core(k) = shaped(Eigen::Map<const VectorXd>(U.data(), U.size()), r0, n, U.cols());

        XAX[k + 1] = left_op_frame(XAX[k], x.core(k), A.core(k), x.core(k));
        XB[k + 1] = left_vec_frame(XB[k], x.core(k), b.core(k));
        if (enrich)
        {
          ZAX[k + 1] = left_op_frame(ZAX[k], z.core(k), A.core(k), x.core(k));
          ZB[k + 1] = left_vec_frame(ZB[k], z.core(k), b.core(k));
        }
      }

      out.sweeps = sweep;
      out.rank_history.push_back(max_rank_of(x));
      out.local_residual_history.push_back(max_res);
      say("sweep " + std::to_string(sweep) + " max local residual " + std::to_string(max_res) + " max rank " + std::to_string(x.max_rank()));

      const double res = residual(A, x, b, cfg.epsilon / 100);
      out.residual_history.push_back(res);
      say("  global residual " + std::to_string(res));
      if (res < best_res)
      {
        best_res = res;
        best = x;
      }
      if (res <= cfg.epsilon)
      {
        out.converged = true;
        best_res = res;
        best = x;
        break;
      }
      // locally converged but globally not: tighten the local target
      if (max_res <= tol) tol = std::max(tol * std::max(0.05, 0.5 * cfg.epsilon / res), 1e-15);
      backward();
    }

    out.residual = best_res;
    out.u = tt_round(best, 0);
    // drop the enrichment directions still carried by the iterate, as far as the target allows
    if (out.converged)
      for (double delta : {cfg.epsilon, cfg.epsilon / 10, cfg.epsilon / 100})
      {
        TTVector c = tt_round(best, delta);
        if (c.max_rank() >= out.u.max_rank()) continue;
        const double r = residual(A, c, b, cfg.epsilon / 100);
        if (r <= cfg.epsilon)
        {
          out.u = std::move(c);
          out.residual = r;
          break;
        }
      }
    out.wall_ms = elapsed();
    return out;
  }
}
