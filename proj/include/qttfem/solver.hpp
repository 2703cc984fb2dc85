#pragma once

#include <functional>

#include "qttfem/tt.hpp"

namespace qttfem
{
  enum class LocalSolver { automatic, direct, iterative };

  struct SolverConfig
  {
    double epsilon = 1e-6;  // relative residual target
    int max_sweeps = 60;
    int kick_rank = 4;
    int init_rank = 2;
    LocalSolver local = LocalSolver::automatic;
    long dense_limit = 1500;  // local size up to which LU is used in automatic mode
    std::uint64_t seed = 1;
    std::function<void(const std::string&)> log;
  };

  struct SolveOutcome
  {
    TTVector u;
    double residual = 0;
    int sweeps = 0;
    std::vector<int> rank_history;               // max rank after each sweep
    std::vector<double> local_residual_history;  // max local residual seen in each sweep
    std::vector<double> residual_history;        // global residual after each sweep
    double wall_ms = 0;
    bool converged = false;
  };

  SolveOutcome solve(const TTMatrix& K, const TTVector& f, const SolverConfig& cfg = {});

  //! ||K u - f|| / ||f||, exact for up to 2^22 entries, otherwise in TT arithmetic rounded at rounding_eps
  double residual(const TTMatrix& K, const TTVector& u, const TTVector& f, double rounding_eps = 1e-10);
}
