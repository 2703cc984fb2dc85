#include "qttfem/tt.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "qttfem/errors.hpp"

namespace qttfem
{
  namespace
  {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    using Idx2 = Eigen::IndexPair<int>;

    constexpr int max_dense_vector_bits = 24;
    constexpr int max_dense_matrix_bits = 12;

    int log2_exact(std::int64_t n)
    {
      if( n < 1 || (n & (n - 1)) != 0 )
        throw SizeError("length " + std::to_string(n) + " is not a power of two");
      int d = 0;
      while( (std::int64_t(1) << d) < n )
        d++;
      return d;
    }

    Core3 core_from(const MatrixXd& m, int r0, int n, int r1)
    {
      assert(m.size() == std::int64_t(r0) * n * r1);
      Core3 c(r0, n, r1);
      std::copy(m.data(), m.data() + m.size(), c.data());
      return c;
    }

    // thin QR of M, returns Q and writes R
    MatrixXd thin_qr(const MatrixXd& M, MatrixXd& R)
    {
      const auto k = std::min(M.rows(), M.cols());
      Eigen::HouseholderQR<MatrixXd> qr(M);
      MatrixXd Q = qr.householderQ() * MatrixXd::Identity(M.rows(), k);
      R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
      return Q;
    }

    // singular values below this are treated as exact zeros even at epsilon = 0
    double roundoff_floor(const VectorXd& s)
    {
      return std::numeric_limits<double>::epsilon() * s.norm();
    }

    void check_same_modes(const TTVector& a, const TTVector& b)
    {
      if( a.modes() != b.modes() )
        throw ArgumentError("mode sizes differ");
    }

    void check_same_modes(const TTMatrix& a, const TTMatrix& b)
    {
      if( a.row_modes() != b.row_modes() || a.col_modes() != b.col_modes() )
        throw ArgumentError("mode sizes differ");
    }

    std::vector<int> merged_modes(const TTMatrix& A)
    {
      std::vector<int> m(A.order());
      for(int l = 0; l < A.order(); l++)
        m[l] = A.row_mode(l) * A.col_mode(l);
      return m;
    }
  }

  int truncation_rank(const VectorXd& s, double delta)
  {
    int r = static_cast<int>(s.size());
    double tail = 0;
    while( r > 1 )
    {
      const double next = tail + s(r - 1) * s(r - 1);
      if( next > delta * delta )
        break;
      tail = next;
      r--;
    }
    return std::max(r, 1);
  }

  TTVector::TTVector(std::vector<Core3> cores) : cores_(std::move(cores))
  {
    if( cores_.empty() )
      throw ArgumentError("a tensor train needs at least one core");
    if( cores_.front().dimension(0) != 1 || cores_.back().dimension(2) != 1 )
      throw ArgumentError("boundary ranks must be 1");
    for(std::size_t l = 0; l + 1 < cores_.size(); l++)
      if( cores_[l].dimension(2) != cores_[l + 1].dimension(0) )
        throw ArgumentError("rank mismatch between cores " + std::to_string(l) + " and " + std::to_string(l + 1));
  }

  std::vector<int> TTVector::modes() const
  {
    std::vector<int> m(order());
    for(int l = 0; l < order(); l++)
      m[l] = mode(l);
    return m;
  }

  std::vector<int> TTVector::ranks() const
  {
    std::vector<int> r(order() + 1, 1);
    for(int l = 0; l < order(); l++)
      r[l + 1] = static_cast<int>(cores_[l].dimension(2));
    return r;
  }

  int TTVector::max_rank() const
  {
    const auto r = ranks();
    return *std::max_element(r.begin(), r.end());
  }

  std::int64_t TTVector::size() const
  {
    std::int64_t n = 1;
    for(const auto& c : cores_)
      n *= c.dimension(1);
    return n;
  }

  TTMatrix::TTMatrix(std::vector<Core4> cores) : cores_(std::move(cores))
  {
    if( cores_.empty() )
      throw ArgumentError("a tensor train needs at least one core");
    if( cores_.front().dimension(0) != 1 || cores_.back().dimension(3) != 1 )
      throw ArgumentError("boundary ranks must be 1");
    for(std::size_t l = 0; l + 1 < cores_.size(); l++)
      if( cores_[l].dimension(3) != cores_[l + 1].dimension(0) )
        throw ArgumentError("rank mismatch between cores " + std::to_string(l) + " and " + std::to_string(l + 1));
  }

  std::vector<int> TTMatrix::row_modes() const
  {
    std::vector<int> m(order());
    for(int l = 0; l < order(); l++)
      m[l] = row_mode(l);
    return m;
  }

  std::vector<int> TTMatrix::col_modes() const
  {
    std::vector<int> m(order());
    for(int l = 0; l < order(); l++)
      m[l] = col_mode(l);
    return m;
  }

  std::vector<int> TTMatrix::ranks() const
  {
    std::vector<int> r(order() + 1, 1);
    for(int l = 0; l < order(); l++)
      r[l + 1] = static_cast<int>(cores_[l].dimension(3));
    return r;
  }

  int TTMatrix::max_rank() const
  {
    const auto r = ranks();
    return *std::max_element(r.begin(), r.end());
  }

  std::int64_t TTMatrix::rows() const
  {
    std::int64_t n = 1;
    for(const auto& c : cores_)
      n *= c.dimension(1);
    return n;
  }

  std::int64_t TTMatrix::cols() const
  {
    std::int64_t n = 1;
    for(const auto& c : cores_)
      n *= c.dimension(2);
    return n;
  }

  RankProfile rank_profile(const std::vector<int>& ranks, const std::vector<int>& modes)
  {
    const int d = static_cast<int>(modes.size());
    RankProfile p;
    p.max_rank = *std::max_element(ranks.begin(), ranks.end());
    for(int l = 0; l < d; l++)
      p.param_count += std::int64_t(ranks[l]) * modes[l] * ranks[l + 1];
    if( d == 1 )
    {
      p.storage_count = modes[0];
      p.effective_rank = 1;
      return p;
    }
    // r_1 n_1 + sum_{l=2}^{d-1} r_{l-1} n_l r_l + r_{d-1} n_d  (= exact count)
    p.storage_count = p.param_count;
    // r_e (n_1 + n_d) + r_e^2 sum_{inner} n_l = storage
    const double a = [&]{ double s = 0; for(int l = 1; l + 1 < d; l++) s += modes[l]; return s; }();
    const double b = modes.front() + modes.back();
    const double c = -static_cast<double>(p.storage_count);
    if( a == 0 )
      p.effective_rank = -c / b;
    else
      p.effective_rank = (-b + std::sqrt(b * b - 4 * a * c)) / (2 * a);
    return p;
  }

  RankProfile rank_profile(const TTVector& t)
  {
    return rank_profile(t.ranks(), t.modes());
  }

  RankProfile rank_profile(const TTMatrix& t)
  {
    return rank_profile(t.ranks(), merged_modes(t));
  }

  TTVector as_vector(const TTMatrix& A)
  {
    std::vector<Core3> cores;
    cores.reserve(A.order());
    for(const auto& c : A.cores())
    {
      Core3 v(c.dimension(0), c.dimension(1) * c.dimension(2), c.dimension(3));
      std::copy(c.data(), c.data() + c.size(), v.data());
      cores.push_back(std::move(v));
    }
    return TTVector(std::move(cores));
  }

  TTMatrix as_matrix(const TTVector& v, const std::vector<int>& row_modes, const std::vector<int>& col_modes)
  {
    if( static_cast<int>(row_modes.size()) != v.order() || static_cast<int>(col_modes.size()) != v.order() )
      throw ArgumentError("mode list length differs from train order");
    std::vector<Core4> cores;
    cores.reserve(v.order());
    for(int l = 0; l < v.order(); l++)
    {
      const auto& c = v.core(l);
      if( c.dimension(1) != row_modes[l] * col_modes[l] )
        throw ArgumentError("merged mode size mismatch");
      Core4 m(c.dimension(0), row_modes[l], col_modes[l], c.dimension(2));
      std::copy(c.data(), c.data() + c.size(), m.data());
      cores.push_back(std::move(m));
    }
    return TTMatrix(std::move(cores));
  }

  TTVector tt_decompose(const VectorXd& dense, const std::vector<int>& modes, double epsilon)
  {
    if( epsilon < 0 )
      throw ArgumentError("epsilon must be non-negative");
    std::int64_t total = 1;
    for(int n : modes)
      total *= n;
    if( total != dense.size() || modes.empty() )
      throw SizeError("dense length does not match the mode sizes");
    const int d = static_cast<int>(modes.size());
    const double delta = d > 1 ? epsilon / std::sqrt(double(d - 1)) * dense.norm() : 0;

    std::vector<Core3> cores;
    MatrixXd W = dense;
    int r = 1;
    for(int l = 0; l + 1 < d; l++)
    {
      const std::int64_t rows = std::int64_t(r) * modes[l];
      MatrixXd reshaped = Eigen::Map<const MatrixXd>(W.data(), rows, W.size() / rows);
      W = std::move(reshaped);
      Eigen::JacobiSVD<MatrixXd> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const int rn = truncation_rank(svd.singularValues(), std::max(delta, roundoff_floor(svd.singularValues())));
      cores.push_back(core_from(svd.matrixU().leftCols(rn), r, modes[l], rn));
      W = svd.singularValues().head(rn).asDiagonal() * svd.matrixV().leftCols(rn).transpose();
      r = rn;
    }
    cores.push_back(core_from(W, r, modes[d - 1], 1));
    return TTVector(std::move(cores));
  }

  TTVector tt_decompose(const VectorXd& dense, double epsilon)
  {
    const int d = log2_exact(dense.size());
    if( d == 0 )
      throw SizeError("length 1 has no binary modes");
    return tt_decompose(dense, std::vector<int>(d, 2), epsilon);
  }

  TTMatrix tt_decompose_matrix(const MatrixXd& dense, double epsilon)
  {
    if( dense.rows() != dense.cols() )
      throw SizeError("matrix must be square");
    const int d = log2_exact(dense.rows());
    if( d == 0 )
      throw SizeError("size 1 has no binary modes");
    // reorder entries so that bit l of row and column share merged mode l
    const std::int64_t N = dense.rows();
    VectorXd v(N * N);
    for(std::int64_t J = 0; J < N; J++)
      for(std::int64_t I = 0; I < N; I++)
      {
        std::int64_t k = 0;
        for(int l = 0; l < d; l++)
          k |= (((I >> l) & 1) | (((J >> l) & 1) << 1)) << (2 * l);
        v(k) = dense(I, J);
      }
    const auto t = tt_decompose(v, std::vector<int>(d, 4), epsilon);
    return as_matrix(t, std::vector<int>(d, 2), std::vector<int>(d, 2));
  }

  Eigen::VectorXd tt_contract(const TTVector& t)
  {
    std::int64_t total = t.size();
    if( total > (std::int64_t(1) << max_dense_vector_bits) )
      throw SizeError("refusing to materialize a vector of length " + std::to_string(total));
    MatrixXd M = MatrixXd::Ones(1, 1);
    for(int l = 0; l < t.order(); l++)
    {
      const auto& c = t.core(l);
      const int n = static_cast<int>(c.dimension(1));
      const auto r0 = c.dimension(0), r1 = c.dimension(2);
      MatrixXd next(M.rows() * n, r1);
      for(int i = 0; i < n; i++)
      {
        Eigen::Map<const MatrixXd, 0, Eigen::OuterStride<>> slice(c.data() + r0 * i, r0, r1, Eigen::OuterStride<>(r0 * n));
        next.middleRows(M.rows() * i, M.rows()).noalias() = M * slice;
      }
      M = std::move(next);
    }
    return Eigen::Map<VectorXd>(M.data(), M.size());
  }

  Eigen::MatrixXd tt_contract(const TTMatrix& t)
  {
    if( t.rows() > (std::int64_t(1) << max_dense_matrix_bits) || t.cols() > (std::int64_t(1) << max_dense_matrix_bits) )
      throw SizeError("refusing to materialize a " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + " matrix");
    const VectorXd v = tt_contract(as_vector(t));
    MatrixXd M(t.rows(), t.cols());
    // merged index of core l is i_l + n_l*j_l
    const int d = t.order();
    std::vector<std::int64_t> rstride(d), cstride(d), vstride(d);
    std::int64_t rs = 1, cs = 1, vs = 1;
    for(int l = 0; l < d; l++)
    {
      rstride[l] = rs; cstride[l] = cs; vstride[l] = vs;
      rs *= t.row_mode(l); cs *= t.col_mode(l); vs *= t.row_mode(l) * t.col_mode(l);
    }
    for(std::int64_t J = 0; J < t.cols(); J++)
      for(std::int64_t I = 0; I < t.rows(); I++)
      {
        std::int64_t k = 0;
        for(int l = 0; l < d; l++)
        {
          const auto i = (I / rstride[l]) % t.row_mode(l);
          const auto j = (J / cstride[l]) % t.col_mode(l);
          k += (i + t.row_mode(l) * j) * vstride[l];
        }
        M(I, J) = v(k);
      }
    return M;
  }

  void tt_orthogonalize_left(TTVector& t, int upto)
  {
    for(int l = 0; l < upto; l++)
    {
      auto& c = t.core(l);
      const auto r0 = c.dimension(0), n = c.dimension(1);
      MatrixXd R;
      const MatrixXd Q = thin_qr(left_unfold(c), R);
      c = core_from(Q, static_cast<int>(r0), static_cast<int>(n), static_cast<int>(Q.cols()));
      auto& next = t.core(l + 1);
      const MatrixXd nr = R * right_unfold(next);
      next = core_from(nr, static_cast<int>(R.rows()), static_cast<int>(next.dimension(1)), static_cast<int>(next.dimension(2)));
    }
  }

  void tt_orthogonalize_right(TTVector& t, int downto)
  {
    for(int l = t.order() - 1; l > downto; l--)
    {
      auto& c = t.core(l);
      const auto n = c.dimension(1), r1 = c.dimension(2);
      MatrixXd R;
      const MatrixXd Q = thin_qr(right_unfold(c).transpose(), R);
      // core = R^T Q^T
      c = core_from(Q.transpose(), static_cast<int>(Q.cols()), static_cast<int>(n), static_cast<int>(r1));
      auto& prev = t.core(l - 1);
      const MatrixXd np = left_unfold(prev) * R.transpose();
      prev = core_from(np, static_cast<int>(prev.dimension(0)), static_cast<int>(prev.dimension(1)), static_cast<int>(R.rows()));
    }
  }

  TTVector tt_round(const TTVector& t, double epsilon, int max_rank)
  {
    if( epsilon < 0 )
      throw ArgumentError("epsilon must be non-negative");
    TTVector r = t;
    const int d = r.order();
    if( d == 1 )
      return r;
    tt_orthogonalize_right(r, 0);
    const double nrm = Eigen::Map<const VectorXd>(r.core(0).data(), r.core(0).size()).norm();
    const double delta = epsilon / std::sqrt(double(d - 1)) * nrm;
    for(int l = 0; l + 1 < d; l++)
    {
      auto& c = r.core(l);
      const int r0 = static_cast<int>(c.dimension(0)), n = static_cast<int>(c.dimension(1));
      Eigen::JacobiSVD<MatrixXd> svd(left_unfold(c), Eigen::ComputeThinU | Eigen::ComputeThinV);
      int rn = truncation_rank(svd.singularValues(), std::max(delta, roundoff_floor(svd.singularValues())));
      if( max_rank > 0 )
        rn = std::min(rn, max_rank);
      c = core_from(svd.matrixU().leftCols(rn), r0, n, rn);
      const MatrixXd SV = svd.singularValues().head(rn).asDiagonal() * svd.matrixV().leftCols(rn).transpose();
      auto& next = r.core(l + 1);
      const MatrixXd nn = SV * right_unfold(next);
      next = core_from(nn, rn, static_cast<int>(next.dimension(1)), static_cast<int>(next.dimension(2)));
    }
    return r;
  }

  TTMatrix tt_round(const TTMatrix& t, double epsilon, int max_rank)
  {
    return as_matrix(tt_round(as_vector(t), epsilon, max_rank), t.row_modes(), t.col_modes());
  }

  TTVector tt_add(const TTVector& a, const TTVector& b)
  {
    check_same_modes(a, b);
    const int d = a.order();
    std::vector<Core3> cores(d);
    for(int l = 0; l < d; l++)
    {
      const auto& A = a.core(l);
      const auto& B = b.core(l);
      const int n = static_cast<int>(A.dimension(1));
      const auto ra0 = A.dimension(0), ra1 = A.dimension(2), rb0 = B.dimension(0), rb1 = B.dimension(2);
      const auto r0 = l == 0 ? 1 : ra0 + rb0;
      const auto r1 = l == d - 1 ? 1 : ra1 + rb1;
      Core3 c(r0, n, r1);
      c.setZero();
      const auto oa0 = 0, oa1 = 0;
      const auto ob0 = l == 0 ? 0 : ra0;
      const auto ob1 = l == d - 1 ? 0 : ra1;
      for(Eigen::Index k = 0; k < ra1; k++)
        for(int i = 0; i < n; i++)
          for(Eigen::Index j = 0; j < ra0; j++)
            c(oa0 + j, i, oa1 + k) += A(j, i, k);
      for(Eigen::Index k = 0; k < rb1; k++)
        for(int i = 0; i < n; i++)
          for(Eigen::Index j = 0; j < rb0; j++)
            c(ob0 + j, i, ob1 + k) += B(j, i, k);
      cores[l] = std::move(c);
    }
    return TTVector(std::move(cores));
  }

  TTMatrix tt_add(const TTMatrix& a, const TTMatrix& b)
  {
    check_same_modes(a, b);
    return as_matrix(tt_add(as_vector(a), as_vector(b)), a.row_modes(), a.col_modes());
  }

  namespace
  {
    template <class T>
    T pairwise_sum(std::vector<T> terms, double epsilon)
    {
      if( terms.empty() )
        throw ArgumentError("nothing to sum");
      if( terms.size() == 1 )
        return tt_round(terms.front(), epsilon);
      while( terms.size() > 1 )
      {
        std::vector<T> next;
        for(std::size_t k = 0; k + 1 < terms.size(); k += 2)
          next.push_back(tt_round(tt_add(terms[k], terms[k + 1]), epsilon));
        if( terms.size() % 2 )
          next.push_back(std::move(terms.back()));
        terms = std::move(next);
      }
      return std::move(terms.front());
    }
  }

  TTVector tt_sum(std::vector<TTVector> terms, double epsilon) { return pairwise_sum(std::move(terms), epsilon); }

  TTMatrix tt_sum(std::vector<TTMatrix> terms, double epsilon) { return pairwise_sum(std::move(terms), epsilon); }

  TTVector tt_scale(const TTVector& a, double s)
  {
    TTVector r = a;
    // scale the smallest core
    int best = 0;
    for(int l = 1; l < r.order(); l++)
      if( r.core(l).size() < r.core(best).size() )
        best = l;
    r.core(best) = r.core(best) * s;
    return r;
  }

  TTMatrix tt_scale(const TTMatrix& a, double s)
  {
    return as_matrix(tt_scale(as_vector(a), s), a.row_modes(), a.col_modes());
  }

  TTVector tt_axpy(const TTVector& a, double s, const TTVector& b)
  {
    return tt_add(a, tt_scale(b, s));
  }

  TTMatrix tt_axpy(const TTMatrix& a, double s, const TTMatrix& b)
  {
    return tt_add(a, tt_scale(b, s));
  }

  TTVector tt_hadamard(const TTVector& a, const TTVector& b)
  {
    check_same_modes(a, b);
    std::vector<Core3> cores(a.order());
    for(int l = 0; l < a.order(); l++)
    {
      const auto& A = a.core(l);
      const auto& B = b.core(l);
      const auto ra0 = A.dimension(0), ra1 = A.dimension(2), rb0 = B.dimension(0), rb1 = B.dimension(2);
      const auto n = A.dimension(1);
      Core3 c(ra0 * rb0, n, ra1 * rb1);
      for(Eigen::Index k1 = 0; k1 < rb1; k1++)
        for(Eigen::Index j1 = 0; j1 < ra1; j1++)
          for(Eigen::Index i = 0; i < n; i++)
            for(Eigen::Index k0 = 0; k0 < rb0; k0++)
              for(Eigen::Index j0 = 0; j0 < ra0; j0++)
                c(j0 + ra0 * k0, i, j1 + ra1 * k1) = A(j0, i, j1) * B(k0, i, k1);
      cores[l] = std::move(c);
    }
    return TTVector(std::move(cores));
  }

  TTMatrix tt_hadamard(const TTMatrix& a, const TTMatrix& b)
  {
    check_same_modes(a, b);
    return as_matrix(tt_hadamard(as_vector(a), as_vector(b)), a.row_modes(), a.col_modes());
  }

  double tt_dot(const TTVector& a, const TTVector& b)
  {
    check_same_modes(a, b);
    MatrixXd F = MatrixXd::Ones(1, 1);
    for(int l = 0; l < a.order(); l++)
    {
      const auto& A = a.core(l);
      const auto& B = b.core(l);
      const auto n = A.dimension(1);
      // G = sum_i A_i^T F B_i ; with T = F * B in right-unfolded form
      const MatrixXd T = F * right_unfold(B);  // ra0 x (n rb1)
      Eigen::Map<const MatrixXd> T2(T.data(), T.rows() * n, B.dimension(2));
      F = left_unfold(A).transpose() * T2;
    }
    return F(0, 0);
  }

  double tt_norm(const TTVector& a)
  {
    TTVector t = a;
    tt_orthogonalize_right(t, 0);
    return Eigen::Map<const VectorXd>(t.core(0).data(), t.core(0).size()).norm();
  }

  double tt_norm(const TTMatrix& a)
  {
    return tt_norm(as_vector(a));
  }

  TTVector tt_matvec(const TTMatrix& A, const TTVector& x)
  {
    if( A.col_modes() != x.modes() )
      throw ArgumentError("matrix column modes do not match vector modes");
    std::vector<Core3> cores(A.order());
    for(int l = 0; l < A.order(); l++)
    {
      const auto& a = A.core(l);
      const auto& c = x.core(l);
      // (ra0, n, m, ra1) x (rx0, m, rx1) -> (ra0, n, ra1, rx0, rx1)
      Eigen::array<Idx2, 1> dims = {Idx2(2, 1)};
      Eigen::Tensor<double, 5> t = a.contract(c, dims);
      Eigen::array<int, 5> perm = {0, 3, 1, 2, 4};
      Eigen::Tensor<double, 5> s = t.shuffle(perm);
      Core3 out(a.dimension(0) * c.dimension(0), a.dimension(1), a.dimension(3) * c.dimension(2));
      std::copy(s.data(), s.data() + s.size(), out.data());
      cores[l] = std::move(out);
    }
    return TTVector(std::move(cores));
  }

  TTMatrix tt_matmat(const TTMatrix& A, const TTMatrix& B)
  {
    if( A.col_modes() != B.row_modes() )
      throw ArgumentError("inner mode sizes differ");
    std::vector<Core4> cores(A.order());
    for(int l = 0; l < A.order(); l++)
    {
      const auto& a = A.core(l);
      const auto& b = B.core(l);
      // (ra0, n, m, ra1) x (rb0, m, p, rb1) -> (ra0, n, ra1, rb0, p, rb1)
      Eigen::array<Idx2, 1> dims = {Idx2(2, 1)};
      Eigen::Tensor<double, 6> t = a.contract(b, dims);
      Eigen::array<int, 6> perm = {0, 3, 1, 4, 2, 5};
      Eigen::Tensor<double, 6> s = t.shuffle(perm);
      Core4 out(a.dimension(0) * b.dimension(0), a.dimension(1), b.dimension(2), a.dimension(3) * b.dimension(3));
      std::copy(s.data(), s.data() + s.size(), out.data());
      cores[l] = std::move(out);
    }
    return TTMatrix(std::move(cores));
  }

  TTMatrix tt_transpose(const TTMatrix& A)
  {
    std::vector<Core4> cores(A.order());
    Eigen::array<int, 4> perm = {0, 2, 1, 3};
    for(int l = 0; l < A.order(); l++)
      cores[l] = A.core(l).shuffle(perm);
    return TTMatrix(std::move(cores));
  }

  Eigen::VectorXd tt_matvec_dense(const TTMatrix& A, const VectorXd& x)
  {
    if( x.size() != A.cols() )
      throw ArgumentError("vector length does not match matrix columns");
    // state Y(prefix_out, rank, m_l, rest_in)
    std::int64_t prefix = 1, rest = A.cols();
    VectorXd cur = x;
    int rank = 1;
    for(int l = 0; l < A.order(); l++)
    {
      const auto& a = A.core(l);
      const int n = static_cast<int>(a.dimension(1)), m = static_cast<int>(a.dimension(2));
      const int r1 = static_cast<int>(a.dimension(3));
      rest /= m;
      // cur viewed as (prefix, rank, m, rest)
      Eigen::TensorMap<Eigen::Tensor<double, 4>> Yc(cur.data(), prefix, rank, m, rest);
      // a as (rank, n, m, r1): contract over (rank, m)
      Eigen::array<Idx2, 2> dims = {Idx2(1, 0), Idx2(2, 2)};
      Eigen::Tensor<double, 4> t = Yc.contract(a, dims);  // (prefix, rest, n, r1)
      Eigen::array<int, 4> perm = {0, 2, 3, 1};          // (prefix, n, r1, rest)
      Eigen::Tensor<double, 4> s = t.shuffle(perm);
      cur = Eigen::Map<VectorXd>(s.data(), s.size());
      prefix *= n;
      rank = r1;
    }
    return cur;
  }

  TTMatrix tt_kron(const TTMatrix& A, const TTMatrix& B)
  {
    std::vector<Core4> cores = B.cores();
    cores.insert(cores.end(), A.cores().begin(), A.cores().end());
    return TTMatrix(std::move(cores));
  }

  TTVector tt_kron(const TTVector& a, const TTVector& b)
  {
    std::vector<Core3> cores = b.cores();
    cores.insert(cores.end(), a.cores().begin(), a.cores().end());
    return TTVector(std::move(cores));
  }

  namespace
  {
    // pad a core with an identity over an outer rank of size s: (s*r0, n, s*r1)
    // composite rank index = inner + r * outer
    Core3 pad_inner(const Core3& c, Eigen::Index s)
    {
      const auto r0 = c.dimension(0), n = c.dimension(1), r1 = c.dimension(2);
      Core3 out(r0 * s, n, r1 * s);
      out.setZero();
      for(Eigen::Index o = 0; o < s; o++)
        for(Eigen::Index k = 0; k < r1; k++)
          for(Eigen::Index i = 0; i < n; i++)
            for(Eigen::Index j = 0; j < r0; j++)
              out(j + r0 * o, i, k + r1 * o) = c(j, i, k);
      return out;
    }

    // (s*r0, n, s*r1) with composite index outer + s*... : identity over inner index
    Core3 pad_outer(const Core3& c, Eigen::Index s)
    {
      const auto r0 = c.dimension(0), n = c.dimension(1), r1 = c.dimension(2);
      Core3 out(s * r0, n, s * r1);
      out.setZero();
      for(Eigen::Index k = 0; k < r1; k++)
        for(Eigen::Index i = 0; i < n; i++)
          for(Eigen::Index j = 0; j < r0; j++)
            for(Eigen::Index o = 0; o < s; o++)
              out(o + s * j, i, o + s * k) = c(j, i, k);
      return out;
    }
  }

  TTVector tt_zkron(const TTVector& a, const TTVector& b)
  {
    if( a.order() != b.order() )
      throw ArgumentError("zkron needs factors with the same number of cores");
    // bond after B_l carries (b-rank l+1, a-rank l), composite index b + rB*a
    std::vector<Core3> cores;
    for(int l = 0; l < a.order(); l++)
    {
      const auto& A = a.core(l);
      const auto& B = b.core(l);
      // B_l : (rb_l * ra_l) -> (rb_{l+1} * ra_l), identity on a-rank (outer)
      cores.push_back(pad_inner(B, A.dimension(0)));
      // A_l : (rb_{l+1} * ra_l) -> (rb_{l+1} * ra_{l+1}), identity on b-rank (inner)
      cores.push_back(pad_outer(A, B.dimension(2)));
    }
    return TTVector(std::move(cores));
  }

  TTMatrix tt_zkron(const TTMatrix& A, const TTMatrix& B)
  {
    const auto v = tt_zkron(as_vector(A), as_vector(B));
    std::vector<int> rm, cm;
    for(int l = 0; l < A.order(); l++)
    {
      rm.push_back(B.row_mode(l)); rm.push_back(A.row_mode(l));
      cm.push_back(B.col_mode(l)); cm.push_back(A.col_mode(l));
    }
    return as_matrix(v, rm, cm);
  }

  Core4 strong_kron(const Core4& first, const Core4& second)
  {
    if( first.dimension(3) != second.dimension(0) )
      throw ArgumentError("strong Kronecker product needs matching inner block dimension");
    // out(a, i1 + n1*i2, j1 + m1*j2, c) = sum_b first(a,i1,j1,b) second(b,i2,j2,c)
    Eigen::array<Idx2, 1> dims = {Idx2(3, 0)};
    Eigen::Tensor<double, 6> t = first.contract(second, dims);  // (a,i1,j1,i2,j2,c)
    Eigen::array<int, 6> perm = {0, 1, 3, 2, 4, 5};
    Eigen::Tensor<double, 6> s = t.shuffle(perm);
    Core4 out(first.dimension(0), first.dimension(1) * second.dimension(1), first.dimension(2) * second.dimension(2), second.dimension(3));
    std::copy(s.data(), s.data() + s.size(), out.data());
    return out;
  }

  TTVector tt_ones(const std::vector<int>& modes)
  {
    std::vector<Core3> cores;
    for(int n : modes)
    {
      Core3 c(1, n, 1);
      c.setConstant(1.0);
      cores.push_back(std::move(c));
    }
    return TTVector(std::move(cores));
  }

  TTVector tt_zeros(const std::vector<int>& modes)
  {
    auto t = tt_ones(modes);
    t.core(0).setZero();
    return t;
  }

  TTMatrix tt_identity(const std::vector<int>& modes)
  {
    std::vector<Core4> cores;
    for(int n : modes)
    {
      Core4 c(1, n, n, 1);
      c.setZero();
      for(int i = 0; i < n; i++)
        c(0, i, i, 0) = 1;
      cores.push_back(std::move(c));
    }
    return TTMatrix(std::move(cores));
  }

  TTMatrix tt_zeros(const std::vector<int>& row_modes, const std::vector<int>& col_modes)
  {
    std::vector<Core4> cores;
    for(std::size_t l = 0; l < row_modes.size(); l++)
    {
      Core4 c(1, row_modes[l], col_modes[l], 1);
      c.setZero();
      cores.push_back(std::move(c));
    }
    return TTMatrix(std::move(cores));
  }

  TTVector tt_unit(int d, std::int64_t index)
  {
    std::vector<Core3> cores;
    for(int l = 0; l < d; l++)
    {
      Core3 c(1, 2, 1);
      c.setZero();
      c(0, (index >> l) & 1, 0) = 1;
      cores.push_back(std::move(c));
    }
    return TTVector(std::move(cores));
  }

  TTMatrix tt_diag(const TTVector& v)
  {
    std::vector<Core4> cores;
    for(const auto& c : v.cores())
    {
      const auto r0 = c.dimension(0), n = c.dimension(1), r1 = c.dimension(2);
      Core4 m(r0, n, n, r1);
      m.setZero();
      for(Eigen::Index k = 0; k < r1; k++)
        for(Eigen::Index i = 0; i < n; i++)
          for(Eigen::Index j = 0; j < r0; j++)
            m(j, i, i, k) = c(j, i, k);
      cores.push_back(std::move(m));
    }
    return TTMatrix(std::move(cores));
  }

  TTVector tt_diagonal(const TTMatrix& A)
  {
    if( A.row_modes() != A.col_modes() )
      throw ArgumentError("diagonal needs a square train");
    std::vector<Core3> cores;
    for(const auto& m : A.cores())
    {
      const auto r0 = m.dimension(0), n = m.dimension(1), r1 = m.dimension(3);
      Core3 c(r0, n, r1);
      for(Eigen::Index k = 0; k < r1; k++)
        for(Eigen::Index i = 0; i < n; i++)
          for(Eigen::Index j = 0; j < r0; j++)
            c(j, i, k) = m(j, i, i, k);
      cores.push_back(std::move(c));
    }
    return TTVector(std::move(cores));
  }

  TTVector tt_random(const std::vector<int>& modes, int rank, std::mt19937_64& rng)
  {
    std::normal_distribution<double> nd;
    std::vector<Core3> cores;
    const int d = static_cast<int>(modes.size());
    for(int l = 0; l < d; l++)
    {
      const int r0 = l == 0 ? 1 : rank, r1 = l == d - 1 ? 1 : rank;
      Core3 c(r0, modes[l], r1);
      for(Eigen::Index k = 0; k < c.size(); k++)
        c.data()[k] = nd(rng);
      cores.push_back(std::move(c));
    }
    return TTVector(std::move(cores));
  }

  TTMatrix tt_random(const std::vector<int>& row_modes, const std::vector<int>& col_modes, int rank, std::mt19937_64& rng)
  {
    std::vector<int> merged(row_modes.size());
    for(std::size_t l = 0; l < merged.size(); l++)
      merged[l] = row_modes[l] * col_modes[l];
    return as_matrix(tt_random(merged, rank, rng), row_modes, col_modes);
  }

  TTVector tt_swap_modes(const TTVector& t, int l, double epsilon)
  {
    if( l < 0 || l + 1 >= t.order() )
      throw ArgumentError("swap position out of range");
    const auto& A = t.core(l);
    const auto& B = t.core(l + 1);
    const auto r0 = A.dimension(0), n1 = A.dimension(1), n2 = B.dimension(1), r2 = B.dimension(2);
    Eigen::array<Idx2, 1> dims = {Idx2(2, 0)};
    Eigen::Tensor<double, 4> AB = A.contract(B, dims);  // (r0, n1, n2, r2)
    Eigen::array<int, 4> perm = {0, 2, 1, 3};
    Eigen::Tensor<double, 4> BA = AB.shuffle(perm);      // (r0, n2, n1, r2)
    Eigen::Map<const MatrixXd> M(BA.data(), r0 * n2, n1 * r2);
    Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const int r = truncation_rank(svd.singularValues(), epsilon * svd.singularValues().norm());
    std::vector<Core3> cores = t.cores();
    cores[l] = core_from(svd.matrixU().leftCols(r), static_cast<int>(r0), static_cast<int>(n2), r);
    const MatrixXd SV = svd.singularValues().head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
    cores[l + 1] = core_from(SV, r, static_cast<int>(n1), static_cast<int>(r2));
    return TTVector(std::move(cores));
  }

  TTMatrix tt_swap_modes(const TTMatrix& t, int l, double epsilon)
  {
    auto rm = t.row_modes(), cm = t.col_modes();
    std::swap(rm[l], rm[l + 1]);
    std::swap(cm[l], cm[l + 1]);
    // the merged index i + n*j does not factor across the swap, so reorder explicitly
    const auto& A = t.core(l);
    const auto& B = t.core(l + 1);
    Eigen::array<Idx2, 1> dims = {Idx2(3, 0)};
    Eigen::Tensor<double, 6> AB = A.contract(B, dims);   // (r0, n1, m1, n2, m2, r2)
    Eigen::array<int, 6> perm = {0, 3, 4, 1, 2, 5};
    Eigen::Tensor<double, 6> BA = AB.shuffle(perm);       // (r0, n2, m2, n1, m1, r2)
    const auto r0 = A.dimension(0), r2 = B.dimension(3);
    const auto n1 = A.dimension(1), m1 = A.dimension(2), n2 = B.dimension(1), m2 = B.dimension(2);
    Eigen::Map<const MatrixXd> M(BA.data(), r0 * n2 * m2, n1 * m1 * r2);
    Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const int r = truncation_rank(svd.singularValues(), epsilon * svd.singularValues().norm());
    std::vector<Core4> cores = t.cores();
    Core4 a(r0, n2, m2, r), b(r, n1, m1, r2);
    const MatrixXd U = svd.matrixU().leftCols(r);
    const MatrixXd SV = svd.singularValues().head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
    std::copy(U.data(), U.data() + U.size(), a.data());
    std::copy(SV.data(), SV.data() + SV.size(), b.data());
    cores[l] = std::move(a);
    cores[l + 1] = std::move(b);
    return TTMatrix(std::move(cores));
  }

  void tt_write(std::ostream& os, const TTVector& t)
  {
    os.precision(17);
    os << "tt vector " << t.order() << '\n';
    for(int n : t.modes()) os << n << ' ';
    os << '\n';
    for(int r : t.ranks()) os << r << ' ';
    os << '\n';
    // row-major over (r0, n, r1)
    for(const auto& c : t.cores())
    {
      for(Eigen::Index a = 0; a < c.dimension(0); a++)
        for(Eigen::Index i = 0; i < c.dimension(1); i++)
          for(Eigen::Index b = 0; b < c.dimension(2); b++)
            os << c(a, i, b) << ' ';
      os << '\n';
    }
  }

  void tt_write(std::ostream& os, const TTMatrix& t)
  {
    os.precision(17);
    os << "tt matrix " << t.order() << '\n';
    for(int n : t.row_modes()) os << n << ' ';
    os << '\n';
    for(int n : t.col_modes()) os << n << ' ';
    os << '\n';
    for(int r : t.ranks()) os << r << ' ';
    os << '\n';
    for(const auto& c : t.cores())
    {
      for(Eigen::Index a = 0; a < c.dimension(0); a++)
        for(Eigen::Index i = 0; i < c.dimension(1); i++)
          for(Eigen::Index j = 0; j < c.dimension(2); j++)
            for(Eigen::Index b = 0; b < c.dimension(3); b++)
              os << c(a, i, j, b) << ' ';
      os << '\n';
    }
  }

  namespace
  {
    void expect_header(std::istream& is, const std::string& kind, int& d)
    {
      std::string tag, k;
      if( !(is >> tag >> k >> d) || tag != "tt" || k != kind || d < 1 )
        throw ArgumentError("malformed tensor train header");
    }

    std::vector<int> read_ints(std::istream& is, int count)
    {
      std::vector<int> v(count);
      for(auto& x : v)
        if( !(is >> x) )
          throw ArgumentError("truncated tensor train stream");
      return v;
    }

    double read_double(std::istream& is)
    {
      double x;
      if( !(is >> x) )
        throw ArgumentError("truncated tensor train stream");
      return x;
    }
  }

  TTVector tt_read_vector(std::istream& is)
  {
    int d;
    expect_header(is, "vector", d);
    const auto modes = read_ints(is, d);
    const auto ranks = read_ints(is, d + 1);
    std::vector<Core3> cores;
    for(int l = 0; l < d; l++)
    {
      Core3 c(ranks[l], modes[l], ranks[l + 1]);
      for(Eigen::Index a = 0; a < c.dimension(0); a++)
        for(Eigen::Index i = 0; i < c.dimension(1); i++)
          for(Eigen::Index b = 0; b < c.dimension(2); b++)
            c(a, i, b) = read_double(is);
      cores.push_back(std::move(c));
    }
    return TTVector(std::move(cores));
  }

  TTMatrix tt_read_matrix(std::istream& is)
  {
    int d;
    expect_header(is, "matrix", d);
    const auto rm = read_ints(is, d);
    const auto cm = read_ints(is, d);
    const auto ranks = read_ints(is, d + 1);
    std::vector<Core4> cores;
    for(int l = 0; l < d; l++)
    {
      Core4 c(ranks[l], rm[l], cm[l], ranks[l + 1]);
      for(Eigen::Index a = 0; a < c.dimension(0); a++)
        for(Eigen::Index i = 0; i < c.dimension(1); i++)
          for(Eigen::Index j = 0; j < c.dimension(2); j++)
            for(Eigen::Index b = 0; b < c.dimension(3); b++)
              c(a, i, j, b) = read_double(is);
      cores.push_back(std::move(c));
    }
    return TTMatrix(std::move(cores));
  }
}
