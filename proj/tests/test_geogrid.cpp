#include <gtest/gtest.h>

#include <cstring>

#include "lews/geogrid.hpp"
#include "lews/manifest.hpp"
#include "test_support.hpp"

namespace lews {
namespace {

using test::make_region;
using test::TempDir;

RainfallSequence zero_sequence(int steps) {
  RainfallSequence seq;
  for (int t = 0; t < steps; ++t) {
    RainfallField f;
    f.region = make_region();
    f.t_index = t;
    f.values = GridF::Zero(10, 10);
    seq.fields.push_back(f);
  }
  return seq;
}

TEST(RainfallStack, ZeroSequencePayloadAndManifest) {
  TempDir dir("geogrid");
  const auto path = dir / "zero.rain";
  write_rainfall_stack(zero_sequence(48), path);

  const auto payload = read_text_file(payload_path_for(path));
  ASSERT_EQ(payload.size(), 48u * 100u * 4u);
  EXPECT_TRUE(std::all_of(payload.begin(), payload.end(), [](char c) { return c == 0; }));
  const Manifest m = Manifest::read(path);
  EXPECT_EQ(m.get_int("T"), 48);
  EXPECT_EQ(m.get_int("H"), 10);
  EXPECT_EQ(m.get_int("dt_hours"), 1);
}

TEST(RainfallStack, RoundTripIsBitExact) {
  TempDir dir("geogrid");
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    auto seq = test::random_sequence(rng, make_region(7, 12, "rt"), 1 + trial * 5, 1000 + trial);
    seq.fields.back().provenance = Provenance::Forecast;
    const auto path = dir / ("s" + std::to_string(trial) + ".rain");
    write_rainfall_stack(seq, path);
    const auto back = read_rainfall_stack(path);
    ASSERT_EQ(back.size(), seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) {
      EXPECT_EQ(back[t].t_index, seq[t].t_index);
      EXPECT_EQ(back[t].provenance, seq[t].provenance);
      EXPECT_EQ(std::memcmp(back[t].values.data(), seq[t].values.data(), sizeof(float) * seq[t].values.size()), 0);
    }
    EXPECT_TRUE(back.region() == seq.region());
  }
}

TEST(RainfallStack, BytesArePureFunctionOfContent) {
  TempDir dir("geogrid");
  std::mt19937_64 rng(5);
  const auto seq = test::random_sequence(rng, make_region(), 4);
  write_rainfall_stack(seq, dir / "a.rain");
  write_rainfall_stack(seq, dir / "b.rain");
  EXPECT_EQ(read_text_file(payload_path_for(dir / "a.rain")), read_text_file(payload_path_for(dir / "b.rain")));
  auto strip_payload = [](std::string text) { return text.substr(0, text.find("payload =")); };
  EXPECT_EQ(strip_payload(read_text_file(dir / "a.rain")), strip_payload(read_text_file(dir / "b.rain")));
}

TEST(RainfallStack, NegativeValueRejectedBeforeWriting) {
  TempDir dir("geogrid");
  auto seq = zero_sequence(3);
  seq.fields[1].values(2, 3) = -1.0f;
  const auto path = dir / "bad.rain";
  EXPECT_THROW(write_rainfall_stack(seq, path), ValidationError);
  EXPECT_FALSE(std::filesystem::exists(path));
  EXPECT_FALSE(std::filesystem::exists(payload_path_for(path)));
}

TEST(RainfallStack, NonHourlySequenceRejected) {
  auto seq = zero_sequence(3);
  seq.fields[2].t_index = 5;
  EXPECT_THROW(seq.validate(), ValidationError);
}

TEST(RainfallStack, TruncatedPayloadIsLengthError) {
  TempDir dir("geogrid");
  const auto path = dir / "t.rain";
  write_rainfall_stack(zero_sequence(4), path);
  std::filesystem::resize_file(payload_path_for(path), 4 * 100 * 4 - 8);
  EXPECT_THROW(read_rainfall_stack(path), IoError);
}

TEST(RainfallStack, ManifestShapeMismatchIsError) {
  TempDir dir("geogrid");
  const auto path = dir / "m.rain";
  write_rainfall_stack(zero_sequence(4), path);
  Manifest m = Manifest::read(path);
  m.set("T", 5);
  m.set("provenance", "observed,observed,observed,observed,observed");
  m.write(path);
  EXPECT_THROW(read_rainfall_stack(path), IoError);
}

TEST(RainfallStack, NaNPayloadRejected) {
  TempDir dir("geogrid");
  const auto path = dir / "n.rain";
  write_rainfall_stack(zero_sequence(2), path);
  std::vector<float> values(200, 0.0f);
  values[17] = std::numeric_limits<float>::quiet_NaN();
  write_f32le(payload_path_for(path), values);
  EXPECT_THROW(read_rainfall_stack(path), ValidationError);
}

TEST(RainfallStack, MalformedManifestRejected) {
  TempDir dir("geogrid");
  write_text_file(dir / "x.rain", "format = lews.rainfall_stack\nthis line has no separator\n");
  EXPECT_THROW(read_rainfall_stack(dir / "x.rain"), IoError);
  write_text_file(dir / "y.rain", "format = something_else\nversion = 1\ndtype = float32le\n");
  EXPECT_THROW(read_rainfall_stack(dir / "y.rain"), IoError);
}

TEST(Terrain, RoundTripIsIdentical) {
  TempDir dir("geogrid");
  std::mt19937_64 rng(9);
  const auto grid = test::random_terrain(rng, make_region(10, 10, "t1"));
  write_terrain(grid, dir / "t1.terrain");
  const auto back = read_terrain(dir / "t1.terrain");
  EXPECT_TRUE(back == grid);
  EXPECT_EQ(back.elevation_normalized, grid.elevation_normalized);
}

TEST(Terrain, AllZeroSoilBlockFailsValidation) {
  std::mt19937_64 rng(1);
  auto grid = test::random_terrain(rng, make_region());
  for (auto& plane : grid.soil) plane.setZero();
  TempDir dir("geogrid");
  EXPECT_THROW(write_terrain(grid, dir / "bad.terrain"), ValidationError);
}

TEST(Terrain, TwoSoilCategoriesInOneCellFailsValidation) {
  std::mt19937_64 rng(2);
  auto grid = test::random_terrain(rng, make_region());
  const int k = grid.soil_category(4, 4);
  grid.soil[static_cast<std::size_t>((k + 1) % kSoilCategories)](4, 4) = 1.0f;
  EXPECT_THROW(grid.validate(), ValidationError);

  // Also detected when reading a tampered payload.
  TempDir dir("geogrid");
  auto good = test::random_terrain(rng, make_region());
  write_terrain(good, dir / "g.terrain");
  auto words = read_f32le(payload_path_for(dir / "g.terrain"));
  const int cell = 4 * 10 + 4;
  const int current = good.soil_category(4, 4);
  words[static_cast<std::size_t>(((current + 1) % kSoilCategories) * 100 + cell)] = 1.0f;
  write_f32le(payload_path_for(dir / "g.terrain"), words);
  EXPECT_THROW(read_terrain(dir / "g.terrain"), ValidationError);
}

TEST(Terrain, ChannelOrderIsFixed) {
  std::mt19937_64 rng(4);
  const auto grid = test::random_terrain(rng, make_region());
  EXPECT_EQ(&grid.channel(0), &grid.soil[0]);
  EXPECT_EQ(&grid.channel(10), &grid.vegetation[0]);
  EXPECT_EQ(&grid.channel(21), &grid.slope_dir[0]);
  EXPECT_EQ(&grid.channel(29), &grid.elevation);
  EXPECT_EQ(kTerrainChannels, 30);
}

TEST(Terrain, NormalizedElevationIsStandardized) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const GridF e = test::random_grid(rng, 10, 10, 3000.0);
    const GridD z = normalize_elevation(e);
    EXPECT_LT(std::abs(z.mean()), 1e-9);
    EXPECT_LT(std::abs((z.array() - z.mean()).square().mean() - 1.0), 1e-6);
  }
  const GridD flat = normalize_elevation(GridF::Constant(10, 10, 123.0f));
  EXPECT_TRUE((flat.array() == 0.0).all());
}

TEST(Events, CsvRoundTripAndValidation) {
  TempDir dir("geogrid");
  EventTable table;
  table.events.push_back({"r00", 1000, 3, 4});
  table.events.push_back({"r01", 12, 0, 9});
  write_events(table, dir / "events.csv");
  EXPECT_EQ(read_text_file(dir / "events.csv").substr(0, 22), "region_id,t_index,y,x\n");
  const auto back = read_events(dir / "events.csv");
  EXPECT_EQ(back.events, table.events);

  const std::vector<Region> regions{make_region(10, 10, "r00"), make_region(10, 10, "r01")};
  EXPECT_NO_THROW(back.validate(regions, 0, 2000));
  EXPECT_THROW(back.validate(regions, 0, 500), ValidationError);
  EventTable outside;
  outside.events.push_back({"r00", 5, 10, 0});
  EXPECT_THROW(outside.validate(regions, 0, 100), ValidationError);
}

TEST(Region, RejectsTinyGridsAndBadCellSize) {
  EXPECT_THROW(make_region(2, 10).validate(), ValidationError);
  Region r = make_region();
  r.cell_size_km = 0.0;
  EXPECT_THROW(r.validate(), ValidationError);
  EXPECT_NO_THROW(make_region().validate());
}

}  // namespace
}  // namespace lews
