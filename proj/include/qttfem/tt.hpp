#pragma once

// Tensor trains over (mostly binary) modes.
//
// Index convention: core 0 carries the fastest-varying index, i.e. the linear
// index of (i_0, ..., i_{d-1}) is i_0 + n_0*(i_1 + n_1*(i_2 + ...)).
// Matrix cores are (r0, n, m, r1) with row index i and column index j; stored
// column-major so a matrix core is bit-identical to a vector core with mode n*m
// (merged index i + n*j).

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/CXX11/Tensor>

namespace qttfem
{
  using Core3 = Eigen::Tensor<double, 3>;
  using Core4 = Eigen::Tensor<double, 4>;

  class TTVector
  {
    public:
      TTVector() = default;
      explicit TTVector(std::vector<Core3> cores);

      int order() const { return static_cast<int>(cores_.size()); }
      int mode(int l) const { return static_cast<int>(cores_[l].dimension(1)); }
      std::vector<int> modes() const;
      //! r_0 .. r_d
      std::vector<int> ranks() const;
      int max_rank() const;
      std::int64_t size() const;

      const Core3& core(int l) const { return cores_[l]; }
      Core3& core(int l) { return cores_[l]; }
      const std::vector<Core3>& cores() const { return cores_; }

    private:
      std::vector<Core3> cores_;
  };

  class TTMatrix
  {
    public:
      TTMatrix() = default;
      explicit TTMatrix(std::vector<Core4> cores);

      int order() const { return static_cast<int>(cores_.size()); }
      int row_mode(int l) const { return static_cast<int>(cores_[l].dimension(1)); }
      int col_mode(int l) const { return static_cast<int>(cores_[l].dimension(2)); }
      std::vector<int> row_modes() const;
      std::vector<int> col_modes() const;
      std::vector<int> ranks() const;
      int max_rank() const;
      std::int64_t rows() const;
      std::int64_t cols() const;

      const Core4& core(int l) const { return cores_[l]; }
      Core4& core(int l) { return cores_[l]; }
      const std::vector<Core4>& cores() const { return cores_; }

    private:
      std::vector<Core4> cores_;
  };

  struct RankProfile
  {
    int max_rank = 0;                 // R_d
    std::int64_t param_count = 0;     // N_d, exact scalar count
    std::int64_t storage_count = 0;   // storage formula
    double effective_rank = 0;        // r_e
  };

  RankProfile rank_profile(const TTVector& t);
  RankProfile rank_profile(const TTMatrix& t);
  //! storage formula and effective rank for a rank/mode sequence (ranks has d+1 entries)
  RankProfile rank_profile(const std::vector<int>& ranks, const std::vector<int>& modes);

  // conversions between matrix trains and vector trains with merged modes
  TTVector as_vector(const TTMatrix& A);
  TTMatrix as_matrix(const TTVector& v, const std::vector<int>& row_modes, const std::vector<int>& col_modes);

  TTVector tt_decompose(const Eigen::VectorXd& dense, const std::vector<int>& modes, double epsilon);
  //! binary modes, length must be 2^d
  TTVector tt_decompose(const Eigen::VectorXd& dense, double epsilon);
  //! square 2^d x 2^d matrix, binary row and column modes
  TTMatrix tt_decompose_matrix(const Eigen::MatrixXd& dense, double epsilon);

  Eigen::VectorXd tt_contract(const TTVector& t);
  Eigen::MatrixXd tt_contract(const TTMatrix& t);

  TTVector tt_round(const TTVector& t, double epsilon, int max_rank = -1);
  TTMatrix tt_round(const TTMatrix& t, double epsilon, int max_rank = -1);

  TTVector tt_add(const TTVector& a, const TTVector& b);
  TTMatrix tt_add(const TTMatrix& a, const TTMatrix& b);
  TTVector tt_scale(const TTVector& a, double s);
  TTMatrix tt_scale(const TTMatrix& a, double s);
  TTVector tt_hadamard(const TTVector& a, const TTVector& b);
  TTMatrix tt_hadamard(const TTMatrix& a, const TTMatrix& b);
  //! a + s*b
  //! pairwise sum with rounding at every merge; far less round-off growth than a running sum
  TTVector tt_sum(std::vector<TTVector> terms, double epsilon);
  TTMatrix tt_sum(std::vector<TTMatrix> terms, double epsilon);

  TTVector tt_axpy(const TTVector& a, double s, const TTVector& b);
  TTMatrix tt_axpy(const TTMatrix& a, double s, const TTMatrix& b);

  double tt_dot(const TTVector& a, const TTVector& b);
  double tt_norm(const TTVector& a);
  double tt_norm(const TTMatrix& a);

  TTVector tt_matvec(const TTMatrix& A, const TTVector& x);
  TTMatrix tt_matmat(const TTMatrix& A, const TTMatrix& B);
  TTMatrix tt_transpose(const TTMatrix& A);
  //! y = A x with x given densely (x length = A.cols()), exact
  Eigen::VectorXd tt_matvec_dense(const TTMatrix& A, const Eigen::VectorXd& x);

  //! Kronecker product A (x) B, A the slow factor: B's cores followed by A's
  TTMatrix tt_kron(const TTMatrix& A, const TTMatrix& B);
  TTVector tt_kron(const TTVector& a, const TTVector& b);
  //! z-Kronecker product: cores interleaved as B_1, A_1, B_2, A_2, ...
  //! A supplies the odd (slow) bits, B the even (fast) bits
  TTMatrix tt_zkron(const TTMatrix& A, const TTMatrix& B);
  TTVector tt_zkron(const TTVector& a, const TTVector& b);
  //! block-level Kronecker product of two adjacent cores; merged index i_first + n_first*i_second
  Core4 strong_kron(const Core4& first, const Core4& second);

  TTVector tt_ones(const std::vector<int>& modes);
  TTVector tt_zeros(const std::vector<int>& modes);
  TTMatrix tt_identity(const std::vector<int>& modes);
  TTMatrix tt_zeros(const std::vector<int>& row_modes, const std::vector<int>& col_modes);
  //! unit vector e_index over binary modes
  TTVector tt_unit(int d, std::int64_t index);
  //! diagonal matrix with the given diagonal
  TTMatrix tt_diag(const TTVector& v);
  //! diagonal of a square train
  TTVector tt_diagonal(const TTMatrix& A);
  //! rank-r random train with standard normal entries
  TTVector tt_random(const std::vector<int>& modes, int rank, std::mt19937_64& rng);
  TTMatrix tt_random(const std::vector<int>& row_modes, const std::vector<int>& col_modes, int rank, std::mt19937_64& rng);

  //! swap modes l and l+1 (exact up to epsilon-rounding of the new bond)
  TTVector tt_swap_modes(const TTVector& t, int l, double epsilon = 1e-14);
  TTMatrix tt_swap_modes(const TTMatrix& t, int l, double epsilon = 1e-14);

  // in-place orthogonalization, returns the norm carried by the remaining core
  void tt_orthogonalize_left(TTVector& t, int upto);
  void tt_orthogonalize_right(TTVector& t, int downto);

  // text serialization: header "tt <kind> d" then modes, ranks, core entries
  void tt_write(std::ostream& os, const TTVector& t);
  void tt_write(std::ostream& os, const TTMatrix& t);
  TTVector tt_read_vector(std::istream& is);
  TTMatrix tt_read_matrix(std::istream& is);

  // unfolding views
  inline Eigen::Map<Eigen::MatrixXd> left_unfold(Core3& c)
  { return {c.data(), c.dimension(0) * c.dimension(1), c.dimension(2)}; }
  inline Eigen::Map<const Eigen::MatrixXd> left_unfold(const Core3& c)
  { return {c.data(), c.dimension(0) * c.dimension(1), c.dimension(2)}; }
  inline Eigen::Map<Eigen::MatrixXd> right_unfold(Core3& c)
  { return {c.data(), c.dimension(0), c.dimension(1) * c.dimension(2)}; }
  inline Eigen::Map<const Eigen::MatrixXd> right_unfold(const Core3& c)
  { return {c.data(), c.dimension(0), c.dimension(1) * c.dimension(2)}; }

  //! rank needed so that the discarded tail of s has 2-norm <= delta
  int truncation_rank(const Eigen::VectorXd& s, double delta);
}
