#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>

#include "qttfem/coupling.hpp"
#include "qttfem/reference.hpp"
#include "qttfem/solver.hpp"

namespace qttfem
{
  //! one CSV row
  struct SolveReport
  {
    std::string case_name;
    int d = 0;
    double eps = 0;
    std::int64_t dofs = 0;  // 2 q 4^d
    double energy_error = 0;  // relative, against the reference solution
    double l2_error = 0;
    int Rd = 0;
    std::int64_t Nd = 0;
    double erank_K = 0, erank_f = 0, erank_u = 0;
    std::int64_t storage_K = 0, storage_f = 0;
    double wall_ms = 0;  // assembly + coupling + solve
    bool converged = false;
    bool drift = false;
    bool operator==(const SolveReport&) const = default;
  };

  //! conforming solution on a fine mesh, the yardstick for E and E_L2
  struct ReferenceSolution
  {
    int d_ref = 0;
    DenseSystem system;
    Eigen::VectorXd u;
    double energy_norm = 0, l2_norm = 0;
  };

  //! memoises reference solutions per (configuration, d_ref)
  class ReferenceCache
  {
    public:
      const ReferenceSolution& get(const ProblemConfig& cfg, int d_ref);
      std::size_t size() const { return cache_.size(); }

    private:
      std::map<std::string, std::unique_ptr<ReferenceSolution>> cache_;
  };

  //! defaults to cfg.d_ref when d_ref <= 0
  SolveReport run_case(const ProblemConfig& cfg, int d, double eps, ReferenceCache& refs, int d_ref = 0);

  //! least-squares fits of E = C 2^(-alpha d), R_d = c d^theta, N_d = C d^kappa over non-drift rows
  struct SweepFit
  {
    std::string case_name;
    double eps = 0;
    int points = 0;
    double alpha = 0, C_alpha = 0;
    double theta = 0, c_theta = 0;
    double kappa = 0, C_kappa = 0;
  };

  //! marks rows past the best-error d (per case and eps) as drift
  void mark_drift(std::vector<SolveReport>& rows);
  std::vector<SweepFit> fit_sweep(const std::vector<SolveReport>& rows);

  using ProgressFn = std::function<void(const SolveReport&)>;
  std::vector<SolveReport> sweep(const ProblemConfig& cfg, int d_lo, int d_hi, const std::vector<double>& eps_list, ReferenceCache& refs, int d_ref = 0, const ProgressFn& progress = {});

  void write_csv(std::ostream& os, const std::vector<SolveReport>& rows, const std::vector<SweepFit>& fits = {});
  //! rows only; '#' lines are skipped
  std::vector<SolveReport> parse_csv(std::istream& is);
  std::string csv_header();

  struct VerifyReport
  {
    bool pass = true;
    std::vector<std::string> lines;
    double stiffness_error = 0;   // relative Frobenius, duplicate-reduced QTT blocks vs conforming K
    double connectivity_error = 0;  // entries of Pi disagreeing with coordinate matching
    double solution_error = 0;    // relative L2 over all node copies
    double duplicate_gap = 0;     // max |u(i^m) - u(j^p)| / ||u||
  };

  //! oracle equivalence at small d; a supplied table replaces the geometric connectivity
  VerifyReport verify_case(const ProblemConfig& cfg, int d, const ConnectivityTable* connectivity = nullptr);

  std::int64_t dof_count(int q, int d);
}
