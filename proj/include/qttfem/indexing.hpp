#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace qttfem
{
  enum class Ordering { canonical, zorder };

  //! L = i + 2^d j
  std::int64_t canonical_index(std::int64_t i, std::int64_t j, int d);
  //! bits of i on even positions, bits of j on odd positions (i_1 least significant)
  std::int64_t z_index(std::int64_t i, std::int64_t j, int d);
  std::pair<std::int64_t, std::int64_t> z_deinterleave(std::int64_t z, int d);
  std::int64_t node_index(std::int64_t i, std::int64_t j, int d, Ordering ordering);
  std::pair<std::int64_t, std::int64_t> node_coords(std::int64_t node, int d, Ordering ordering);

  //! 0-based (x, y) DOFs of a node: (2k, 2k+1)
  std::pair<std::int64_t, std::int64_t> dof_indices(std::int64_t node);
  //! 1-based pair (2k+1, 2k+2)
  std::pair<std::int64_t, std::int64_t> one_based_dof_indices(std::int64_t node);

  //! perm[Z] = L
  std::vector<std::int64_t> zorder_permutation(int d);
  //! perm[2Z + c] = 2L + c
  std::vector<std::int64_t> zorder_dof_permutation(int d);
  std::vector<std::int64_t> invert_permutation(const std::vector<std::int64_t>& p);
}
