#include <gtest/gtest.h>

#include "lews/nowcast.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace lews {
namespace {

using test::make_region;
using test::shift_east;

RainfallField random_field(std::mt19937_64& rng, std::int64_t t = 500) {
  RainfallField f;
  f.region = make_region();
  f.t_index = t;
  f.values = test::random_grid(rng, 10, 10);
  return f;
}

TEST(AdvectStep, ZeroMotionIsIdentity) {
  std::mt19937_64 rng(1);
  const auto f = random_field(rng);
  const auto out = advect_step(f, MotionField::zero(f.region), 1.0);
  EXPECT_EQ(out.values, f.values);
  EXPECT_EQ(out.t_index, f.t_index + 1);
  EXPECT_EQ(out.provenance, Provenance::Forecast);
}

TEST(AdvectStep, UnitEastwardShift) {
  std::mt19937_64 rng(2);
  const auto f = random_field(rng);
  const auto out = advect_step(f, MotionField::uniform(f.region, 1.0, 0.0), 1.0);
  EXPECT_EQ(out.values, shift_east(f.values, 1));
  EXPECT_TRUE((out.values.col(0).array() == 0.0f).all());
}

TEST(AdvectStep, HalfCellImpulseSplitsEvenly) {
  RainfallField f;
  f.region = make_region();
  f.values = GridF::Zero(10, 10);
  f.values(5, 5) = 1.0f;
  const auto out = advect_step(f, MotionField::uniform(f.region, 0.5, 0.0), 1.0);
  EXPECT_FLOAT_EQ(out.values(5, 5), 0.5f);
  EXPECT_FLOAT_EQ(out.values(5, 6), 0.5f);
  EXPECT_FLOAT_EQ(out.values.sum(), 1.0f);
}

TEST(AdvectStep, RejectsBadInputs) {
  std::mt19937_64 rng(3);
  const auto f = random_field(rng);
  EXPECT_THROW(advect_step(f, MotionField::zero(f.region), 0.0), ValidationError);
  EXPECT_THROW(advect_step(f, MotionField::zero(make_region(8, 10)), 1.0), ValidationError);
}

TEST(Forecast, ZeroMotionRepeatsField) {
  std::mt19937_64 rng(4);
  const auto f = random_field(rng);
  const auto out = forecast(f, MotionField::zero(f.region), 8);
  ASSERT_EQ(out.size(), 8u);
  for (int k = 0; k < 8; ++k) {
    EXPECT_EQ(out[static_cast<std::size_t>(k)].values, f.values);
    EXPECT_EQ(out[static_cast<std::size_t>(k)].t_index, f.t_index + k + 1);
  }
}

TEST(Forecast, IntegerMotionComposesShifts) {
  std::mt19937_64 rng(5);
  const auto f = random_field(rng);
  const auto out = forecast(f, MotionField::uniform(f.region, 1.0, 0.0), 3);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[2].values, shift_east(f.values, 3));
}

TEST(Forecast, ZeroFieldStaysZero) {
  RainfallField f;
  f.region = make_region();
  f.values = GridF::Zero(10, 10);
  for (const auto& g : forecast(f, MotionField::uniform(f.region, 0.7, -1.3))) {
    EXPECT_TRUE((g.values.array() == 0.0f).all());
  }
}

TEST(Forecast, RejectsNonPositiveHorizon) {
  std::mt19937_64 rng(6);
  const auto f = random_field(rng);
  EXPECT_THROW(forecast(f, MotionField::zero(f.region), 0), ValidationError);
}

TEST(NowcastProperties, NonNegativeMaximumPrincipleAndComposition) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> speed(-2.0, 2.0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto f = random_field(rng);
    MotionField m = MotionField::zero(f.region);
    for (Eigen::Index i = 0; i < m.u.size(); ++i) {
      m.u.data()[i] = speed(rng);
      m.v.data()[i] = speed(rng);
    }
    const auto steps = forecast(f, m, 5);
    RainfallField iterated = f;
    float previous_max = f.values.maxCoeff();
    for (const auto& s : steps) {
      iterated = advect_step(iterated, m, 1.0);
      EXPECT_EQ(s.values, iterated.values);
      EXPECT_GE(s.values.minCoeff(), 0.0f);
      EXPECT_LE(s.values.maxCoeff(), previous_max * (1.0f + 1e-6f));
      previous_max = s.values.maxCoeff();
    }
  }
}

}  // namespace
}  // namespace lews
