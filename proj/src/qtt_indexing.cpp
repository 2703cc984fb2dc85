#include "qttfem/indexing.hpp"

#include <string>

#include "qttfem/errors.hpp"

namespace qttfem
{
  namespace
  {
    void check_range(std::int64_t i, std::int64_t j, int d)
    {
      if( d < 0 || d > 30 )
        throw ArgumentError("level out of range");
      const std::int64_t n = std::int64_t(1) << d;
      if( i < 0 || j < 0 || i >= n || j >= n )
        throw ArgumentError("grid index (" + std::to_string(i) + "," + std::to_string(j) + ") out of range for d=" + std::to_string(d));
    }
  }

  std::int64_t canonical_index(std::int64_t i, std::int64_t j, int d)
  {
    check_range(i, j, d);
    return i + (std::int64_t(1) << d) * j;
  }

  std::int64_t z_index(std::int64_t i, std::int64_t j, int d)
  {
    check_range(i, j, d);
    std::int64_t z = 0;
    for(int k = 0; k < d; k++)
      z |= (((i >> k) & 1) << (2 * k)) | (((j >> k) & 1) << (2 * k + 1));
    return z;
  }

  std::pair<std::int64_t, std::int64_t> z_deinterleave(std::int64_t z, int d)
  {
    if( z < 0 || z >= (std::int64_t(1) << (2 * d)) )
      throw ArgumentError("Z index out of range");
    std::int64_t i = 0, j = 0;
    for(int k = 0; k < d; k++)
    {
      i |= ((z >> (2 * k)) & 1) << k;
      j |= ((z >> (2 * k + 1)) & 1) << k;
    }
    return {i, j};
  }

  std::int64_t node_index(std::int64_t i, std::int64_t j, int d, Ordering ordering)
  {
    return ordering == Ordering::zorder ? z_index(i, j, d) : canonical_index(i, j, d);
  }

  std::pair<std::int64_t, std::int64_t> node_coords(std::int64_t node, int d, Ordering ordering)
  {
    if( ordering == Ordering::zorder )
      return z_deinterleave(node, d);
    const std::int64_t n = std::int64_t(1) << d;
    if( node < 0 || node >= n * n )
      throw ArgumentError("node index out of range");
    return {node % n, node / n};
  }

  std::pair<std::int64_t, std::int64_t> dof_indices(std::int64_t node)
  {
    return {2 * node, 2 * node + 1};
  }

  std::pair<std::int64_t, std::int64_t> one_based_dof_indices(std::int64_t node)
  {
    return {2 * node + 1, 2 * node + 2};
  }

  std::vector<std::int64_t> zorder_permutation(int d)
  {
    const std::int64_t n = std::int64_t(1) << d;
    std::vector<std::int64_t> p(n * n);
    for(std::int64_t z = 0; z < n * n; z++)
    {
      const auto [i, j] = z_deinterleave(z, d);
      p[z] = canonical_index(i, j, d);
    }
    return p;
  }

  std::vector<std::int64_t> zorder_dof_permutation(int d)
  {
    const auto p = zorder_permutation(d);
    std::vector<std::int64_t> q(2 * p.size());
    for(std::size_t z = 0; z < p.size(); z++)
    {
      q[2 * z] = 2 * p[z];
      q[2 * z + 1] = 2 * p[z] + 1;
    }
    return q;
  }

  std::vector<std::int64_t> invert_permutation(const std::vector<std::int64_t>& p)
  {
    std::vector<std::int64_t> q(p.size(), -1);
    for(std::size_t k = 0; k < p.size(); k++)
    {
      if( p[k] < 0 || p[k] >= static_cast<std::int64_t>(p.size()) || q[p[k]] != -1 )
        throw ArgumentError("not a permutation");
      q[p[k]] = static_cast<std::int64_t>(k);
    }
    return q;
  }
}
