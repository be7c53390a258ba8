#include <gtest/gtest.h>

#include "cpseg/io.hpp"

using namespace cpseg;

TEST(Input, SingleColumn) {
  const auto d = parse_input_string("# header\n1.5\n-2\n\n+3e-1\n");
  EXPECT_EQ(d.columns, 1);
  ASSERT_EQ(d.groups.size(), 1u);
  EXPECT_EQ(d.groups[0].values, (std::vector<double>{1.5, -2.0, 0.3}));
  EXPECT_TRUE(d.groups[0].positions.empty());
  EXPECT_EQ(d.total(), 3u);
}

TEST(Input, PositionValueWithMixedSeparators) {
  const auto d = parse_input_string("10,0.5\n20\t0.7  # trailing comment\n30 0.9\r\n");
  EXPECT_EQ(d.columns, 2);
  EXPECT_EQ(d.groups[0].positions, (std::vector<double>{10, 20, 30}));
  EXPECT_EQ(d.groups[0].values, (std::vector<double>{0.5, 0.7, 0.9}));
}

TEST(Input, GroupsKeepFirstAppearanceOrder) {
  const auto d = parse_input_string("chr2 1 0.1\nchr1 5 0.2\nchr2 2 0.3\n");
  ASSERT_EQ(d.groups.size(), 2u);
  EXPECT_EQ(d.groups[0].name, "chr2");
  EXPECT_EQ(d.groups[0].values, (std::vector<double>{0.1, 0.3}));
  EXPECT_EQ(d.groups[1].name, "chr1");
}

TEST(Input, NonNumericLineReportsLine) {
  try {
    parse_input_string("1\n2\nabc\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Input, ColumnCountMismatch) {
  try {
    parse_input_string("1 2\n3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_input_string("a 1 2 3\n"), ParseError);
}

TEST(Input, EmptyAndNonFinite) {
  EXPECT_THROW(parse_input_string("# nothing\n\n"), ParseError);
  EXPECT_THROW(parse_input_string(""), ParseError);
  EXPECT_THROW(parse_input_string("inf\n"), ParseError);
  EXPECT_THROW(parse_input_string("nan\n"), ParseError);
}

TEST(Input, DigestTracksBytes) {
  const auto a = parse_input_string("1\n2\n"), b = parse_input_string("1\n2\n"), c = parse_input_string("1\n3\n");
  EXPECT_EQ(a.digest, b.digest);
  EXPECT_NE(a.digest, c.digest);
  EXPECT_EQ(a.digest.size(), 16u);
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}
