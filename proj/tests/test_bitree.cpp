#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "tableweave/header_extract.hpp"

using namespace twtest;

namespace {

TablePosition cell(const char* a1) {
  const auto rc = detail::parse_a1(a1).value();
  return CellRef{rc.first, rc.second};
}

}  // namespace

TEST(BiTree, WorkedExampleCoordinates) {
  const BiTree bt = build_bitree(worked_example_table());
  const auto a6 = detail::parse_a1("A6").value();
  const auto d8 = detail::parse_a1("D8").value();
  EXPECT_EQ(coordinate_of(bt, a6.first, a6.second).left, (TreeCoordinate{2}));
  EXPECT_EQ(coordinate_of(bt, d8.first, d8.second).top, (TreeCoordinate{2, 0}));
  EXPECT_EQ(coordinate_of(bt, d8.first, d8.second).left, (TreeCoordinate{2, 1}));
}

TEST(BiTree, WorkedExampleDistances) {
  const BiTree bt = build_bitree(worked_example_table());
  EXPECT_EQ(bitree_distance(bt, cell("A6"), cell("A8")), 1);
  EXPECT_EQ(bitree_distance(bt, cell("A6"), cell("A10")), 3);
  EXPECT_EQ(bitree_distance(bt, cell("A6"), cell("C2")), 6);
  EXPECT_EQ(bitree_distance(bt, cell("A6"), std::nullopt), 0);
  EXPECT_EQ(bitree_distance(bt, std::nullopt, std::nullopt), 0);
}

TEST(BiTree, PaddingRoundTrip) {
  EXPECT_EQ(pad_coordinate({2, 1}), (PaddedCoordinate{2, 1, kSentinel, kSentinel}));
  EXPECT_EQ(pad_coordinate({}), kRootPadded);
  EXPECT_EQ(unpad_coordinate(pad_coordinate({3, 0, 7})), (TreeCoordinate{3, 0, 7}));
  EXPECT_THROW(pad_coordinate({0, 0, 0, 0, 0}), StructureError);
}

TEST(BiTree, PaddedCoordinatesMatchPaths) {
  const BiTree bt = build_bitree(worked_example_table());
  for (int r = 0; r < bt.n_rows(); ++r) {
    for (int c = 0; c < bt.n_cols(); ++c) {
      const auto& [top, left] = bt.padded_of(r, c);
      EXPECT_EQ(unpad_coordinate(top), bt.coordinate_of(r, c).top);
      EXPECT_EQ(unpad_coordinate(left), bt.coordinate_of(r, c).left);
    }
  }
}

TEST(BiTree, FlatDistancesAreZeroTwoOrFour) {
  const BiTree bt = flat_bitree(5, 7);
  EXPECT_EQ(bt.distance({1, 2}, {1, 2}), 0);
  EXPECT_EQ(bt.distance({1, 2}, {1, 5}), 2);
  EXPECT_EQ(bt.distance({1, 2}, {4, 2}), 2);
  EXPECT_EQ(bt.distance({1, 2}, {3, 6}), 4);
  EXPECT_THROW(flat_bitree(0, 3), Error);
}

TEST(BiTree, DegreeLimitsAreEnforced) {
  OrderedTree wide;
  for (int i = 0; i < kMaxDegree[0] + 1; ++i) wide.add_child(OrderedTree::root());
  EXPECT_THROW(wide.check_bounds("top"), StructureError);
  OrderedTree deep;
  int id = OrderedTree::root();
  for (int i = 0; i < kTreeDepth + 1; ++i) id = deep.add_child(id);
  EXPECT_THROW(deep.check_bounds("left"), StructureError);
}

TEST(BiTree, CoordinateOutsideTreeThrows) {
  OrderedTree t;
  t.add_child(OrderedTree::root());
  EXPECT_THROW(tree_distance(t, {0}, {3}), StructureError);
}

TEST(BiTree, TreeDistanceMatchesBreadthFirstSearch) {
  Rng rng(404);
  for (int k = 0; k < 200; ++k) {
    const OrderedTree tree = random_tree(rng, 4, 64);
    const auto oracle = bfs_distances(tree);
    for (int a = 0; a < static_cast<int>(tree.size()); ++a) {
      for (int b = 0; b < static_cast<int>(tree.size()); ++b) {
        const int want = oracle[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        ASSERT_EQ(tree_distance(tree, tree.path(a), tree.path(b)), want);
        ASSERT_EQ(tree.distance(a, b), want);
      }
    }
  }
}

TEST(BiTree, DistanceIsAMetric) {
  Rng rng(77);
  for (int k = 0; k < 100; ++k) {
    const BiTree bt = random_bitree(rng, 4, 40, 4, 5);
    for (int i = 0; i < 20; ++i) {
      const CellRef a{i / 5, i % 5};
      EXPECT_EQ(bt.distance(a, a), 0);
      for (int j = 0; j < 20; ++j) {
        const CellRef b{j / 5, j % 5};
        EXPECT_EQ(bt.distance(a, b), bt.distance(b, a));
        for (int l = 0; l < 20; l += 3) {
          const CellRef c{l / 5, l % 5};
          EXPECT_LE(bt.distance(a, c), bt.distance(a, b) + bt.distance(b, c));
        }
      }
    }
  }
}

TEST(BiTree, PathAndFindAreInverse) {
  Rng rng(12);
  const OrderedTree tree = random_tree(rng, 4, 64);
  for (int id = 0; id < static_cast<int>(tree.size()); ++id) EXPECT_EQ(tree.find(tree.path(id)), id);
  EXPECT_FALSE(tree.find({999}).has_value());
}
