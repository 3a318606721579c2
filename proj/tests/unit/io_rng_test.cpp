#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "infoalign/errors.hpp"
#include "infoalign/io.hpp"
#include "infoalign/parallel.hpp"
#include "infoalign/rng.hpp"

namespace {

using namespace infoalign;

TEST(Rng, SplitMixReferenceValues) {
  std::uint64_t state = 0;
  EXPECT_EQ(splitmix64(state), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64(state), 0x6e789e6aa1b965f4ULL);
}

TEST(Rng, FnvReferenceValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = make_stream(42, "alpha", 3);
  Rng b = make_stream(42, "alpha", 3);
  Rng c = make_stream(42, "alpha", 4);
  Rng d = make_stream(42, "beta", 3);
  Rng e = make_stream(43, "alpha", 3);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
  EXPECT_NE(x, e());
}

TEST(Rng, Uniform01RangeAndMean) {
  Rng rng = make_stream(1, "test.u01");
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000.0, 0.5, 0.005);
}

TEST(Rng, UniformIndexIsUnbiased) {
  Rng rng = make_stream(2, "test.index");
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[uniform_index(rng, 7)];
  for (int c : counts) EXPECT_NEAR(c / 70000.0, 1.0 / 7.0, 0.01);
  EXPECT_EQ(uniform_index(rng, 1), 0u);
}

TEST(Rng, NormalMoments) {
  Rng rng = make_stream(3, "test.normal");
  NormalSampler n;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double z = n(rng);
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / N, 0.0, 0.01);
  EXPECT_NEAR(s2 / N, 1.0, 0.01);
  EXPECT_NEAR(s4 / N, 3.0, 0.05);
}

TEST(Io, FormatDoubleRoundTrips) {
  Rng rng = make_stream(4, "test.format");
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(uniform01(rng) - 0.5, static_cast<int>(uniform_index(rng, 200)) - 100);
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(0.25), "0.25");
}

TEST(Io, AtomicWriteCreatesParentsAndLeavesNoTemp) {
  const auto dir = std::filesystem::temp_directory_path() / "infoalign_io_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "nested" / "x.csv";
  io::atomic_write(path, "a,b\n1,2\n");
  EXPECT_EQ(io::read_file(path), "a,b\n1,2\n");
  io::atomic_write(path, "replaced\n");
  EXPECT_EQ(io::read_file(path), "replaced\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "nested" / "x.csv.tmp"));
  EXPECT_THROW(io::read_file(dir / "missing.csv"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Io, CsvBuildAndParse) {
  io::CsvBuilder b({"x", "y"});
  b.comment("seed=3");
  b.row({"1", "2.5"});
  b.row({"2", "-1"});
  EXPECT_THROW(b.row({"only-one"}), IoError);
  EXPECT_THROW(b.comment("late"), IoError);
  EXPECT_EQ(b.str(), "# seed=3\nx,y\n1,2.5\n2,-1\n");
  const io::CsvTable t = io::parse_csv(b.str());
  EXPECT_EQ(t.comments, (std::vector<std::string>{"seed=3"}));
  EXPECT_EQ(t.column("y"), 1u);
  EXPECT_THROW(t.column("z"), IoError);
  EXPECT_EQ(t.rows[1][1], "-1");
}

TEST(Io, ParseRejectsRaggedRows) {
  EXPECT_THROW(io::parse_csv("a,b\n1\n"), IoError);
}

TEST(Parallel, RunsEveryItemAndPropagatesErrors) {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 5) throw ConfigError("boom");
               }),
               ConfigError);
}

}  // namespace
