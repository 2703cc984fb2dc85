#include <set>

#include <gtest/gtest.h>

#include "qttfem/errors.hpp"
#include "qttfem/indexing.hpp"

using namespace qttfem;

TEST(qtt_indexing, canonical_examples)
{
  EXPECT_EQ(canonical_index(0, 0, 3), 0);
  EXPECT_EQ(canonical_index(2, 1, 2), 6);
  EXPECT_EQ(canonical_index(3, 3, 2), 15);
  EXPECT_THROW(canonical_index(4, 0, 2), ArgumentError);
  EXPECT_THROW(canonical_index(0, -1, 2), ArgumentError);
}

TEST(qtt_indexing, z_examples)
{
  EXPECT_EQ(z_index(0, 0, 4), 0);
  EXPECT_EQ(z_index(3, 2, 2), 13);
  EXPECT_EQ(z_index(1, 0, 1), 1);
  EXPECT_EQ(z_index(0, 1, 1), 2);
  EXPECT_THROW(z_index(2, 0, 1), ArgumentError);
}

TEST(qtt_indexing, dof_pairs)
{
  using P = std::pair<std::int64_t, std::int64_t>;
  EXPECT_EQ(one_based_dof_indices(0), P(1, 2));
  EXPECT_EQ(dof_indices(0), P(0, 1));
  EXPECT_EQ(one_based_dof_indices(13), P(27, 28));
  EXPECT_EQ(one_based_dof_indices(6), P(13, 14));
}

TEST(qtt_indexing, bijective_and_round_trip)
{
  for(int d = 1; d <= 6; d++)
  {
    const std::int64_t n = std::int64_t(1) << d;
    std::set<std::int64_t> zs, ls;
    for(std::int64_t j = 0; j < n; j++)
      for(std::int64_t i = 0; i < n; i++)
      {
        const auto z = z_index(i, j, d);
        zs.insert(z);
        ls.insert(canonical_index(i, j, d));
        EXPECT_EQ(z_deinterleave(z, d), std::make_pair(i, j));
        EXPECT_EQ(node_coords(node_index(i, j, d, Ordering::canonical), d, Ordering::canonical), std::make_pair(i, j));
      }
    EXPECT_EQ(static_cast<std::int64_t>(zs.size()), n * n);
    EXPECT_EQ(static_cast<std::int64_t>(ls.size()), n * n);
    EXPECT_EQ(*zs.rbegin(), n * n - 1);
    EXPECT_EQ(*ls.rbegin(), n * n - 1);
  }
}

TEST(qtt_indexing, permutation)
{
  const auto p1 = zorder_permutation(1);
  EXPECT_EQ(p1, (std::vector<std::int64_t>{0, 1, 2, 3}));
  const auto p2 = zorder_permutation(2);
  EXPECT_EQ(p2[13], canonical_index(3, 2, 2));
  EXPECT_EQ(p2[13], 11);
  const auto inv = invert_permutation(p2);
  for(std::size_t k = 0; k < p2.size(); k++)
    EXPECT_EQ(inv[p2[k]], static_cast<std::int64_t>(k));
  const auto q = zorder_dof_permutation(2);
  EXPECT_EQ(q[26], 22);
  EXPECT_EQ(q[27], 23);
}
