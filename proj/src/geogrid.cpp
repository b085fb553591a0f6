#include "lews/geogrid.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "lews/manifest.hpp"

namespace lews {
namespace {

constexpr const char* kRainFormat = "lews.rainfall_stack";
constexpr const char* kTerrainFormat = "lews.terrain";

bool valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ',' || c == '=' || c == '#' || c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

void check_shape(const GridF& g, const Region& region, const std::string& what) {
  if (g.rows() != region.height_cells || g.cols() != region.width_cells) {
    throw ValidationError(what + ": grid is " + std::to_string(g.rows()) + "x" + std::to_string(g.cols()) +
                          ", region " + region.region_id + " is " + std::to_string(region.height_cells) + "x" +
                          std::to_string(region.width_cells));
  }
}

void check_one_hot(const std::vector<GridF>& planes, int expected, const Region& region, const std::string& what) {
  if (static_cast<int>(planes.size()) != expected) {
    throw ValidationError(what + ": expected " + std::to_string(expected) + " planes, got " +
                          std::to_string(planes.size()));
  }
  for (const auto& p : planes) check_shape(p, region, what);
  for (int r = 0; r < region.height_cells; ++r) {
    for (int c = 0; c < region.width_cells; ++c) {
      double sum = 0.0;
      for (const auto& p : planes) {
        const float v = p(r, c);
        if (!(v == 0.0f || v == 1.0f)) {
          throw ValidationError(what + ": non-binary value at (" + std::to_string(r) + "," + std::to_string(c) + ")");
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        throw ValidationError(what + ": one-hot group sums to " + format_real(sum) + " at (" + std::to_string(r) +
                              "," + std::to_string(c) + ")");
      }
    }
  }
}

void write_region(Manifest& m, const Region& region) {
  m.set("region_id", region.region_id);
  m.set("H", region.height_cells);
  m.set("W", region.width_cells);
  m.set("cell_km", region.cell_size_km);
}

Region read_region(const Manifest& m) {
  Region region;
  region.region_id = m.get("region_id");
  region.height_cells = static_cast<int>(m.get_int("H"));
  region.width_cells = static_cast<int>(m.get_int("W"));
  region.cell_size_km = m.get_double("cell_km");
  try {
    region.validate();
  } catch (const ValidationError& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  return region;
}

void expect_format(const Manifest& m, const char* format, const std::filesystem::path& path) {
  if (m.get("format") != format) {
    throw IoError(path.string() + ": expected format '" + format + "', found '" + m.get("format") + "'");
  }
  if (m.get_int("version") != 1) throw IoError(path.string() + ": unsupported version");
  if (m.get("dtype") != "float32le") throw IoError(path.string() + ": unsupported dtype '" + m.get("dtype") + "'");
}

std::vector<float> read_payload(const Manifest& m, const std::filesystem::path& manifest_path, std::size_t expected) {
  const auto payload = manifest_path.parent_path() / m.get("payload");
  if (!std::filesystem::exists(payload)) throw IoError("missing payload file '" + payload.string() + "'");
  const auto size = std::filesystem::file_size(payload);
  if (size != expected * 4) {
    throw IoError("payload length mismatch for '" + payload.string() + "': manifest implies " +
                  std::to_string(expected) + " words, file holds " + std::to_string(size) + " bytes");
  }
  auto values = read_f32le(payload);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError("non-finite value in payload '" + payload.string() + "' at word " + std::to_string(i));
    }
  }
  return values;
}

}  // namespace

void Region::validate() const {
  if (!valid_identifier(region_id)) throw ValidationError("region id '" + region_id + "' is empty or has separators");
  if (height_cells < 3 || width_cells < 3) {
    throw ValidationError("region " + region_id + ": grid must be at least 3x3");
  }
  if (!(cell_size_km > 0.0) || !std::isfinite(cell_size_km)) {
    throw ValidationError("region " + region_id + ": cell size must be positive");
  }
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Observed: return "observed";
    case Provenance::Forecast: return "forecast";
    case Provenance::Augmented: return "augmented";
  }
  return "observed";
}

Provenance parse_provenance(const std::string& s) {
  if (s == "observed") return Provenance::Observed;
  if (s == "forecast") return Provenance::Forecast;
  if (s == "augmented") return Provenance::Augmented;
  throw IoError("unknown provenance '" + s + "'");
}

void RainfallField::validate() const {
  region.validate();
  check_shape(values, region, "rainfall field t=" + std::to_string(t_index));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const float v = values.data()[i];
    if (!std::isfinite(v) || v < 0.0f) {
      throw ValidationError("rainfall field t=" + std::to_string(t_index) + ": value " + format_real(v) +
                            " is negative or non-finite");
    }
  }
}

void RainfallSequence::validate() const {
  if (fields.empty()) throw ValidationError("rainfall sequence is empty");
  for (std::size_t t = 0; t < fields.size(); ++t) {
    fields[t].validate();
    if (!(fields[t].region == fields[0].region)) throw ValidationError("rainfall sequence mixes regions");
    if (t > 0 && fields[t].t_index != fields[t - 1].t_index + 1) {
      throw ValidationError("rainfall sequence is not hourly at step " + std::to_string(t));
    }
  }
}

TerrainGrid TerrainGrid::from_categories(const Region& region, const Grid<int>& soil, const Grid<int>& vegetation,
                                         const Grid<int>& slope_dir, const GridF& elevation) {
  region.validate();
  const int h = region.height_cells;
  const int w = region.width_cells;
  auto planes = [&](const Grid<int>& idx, int n, const std::string& what) {
    if (idx.rows() != h || idx.cols() != w) throw ValidationError(what + ": category grid shape mismatch");
    std::vector<GridF> out(n, GridF::Zero(h, w));
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int k = idx(r, c);
        if (k < 0 || k >= n) throw ValidationError(what + ": category " + std::to_string(k) + " out of range");
        out[k](r, c) = 1.0f;
      }
    }
    return out;
  };
  TerrainGrid g;
  g.region = region;
  g.soil = planes(soil, kSoilCategories, "soil");
  g.vegetation = planes(vegetation, kVegetationCategories, "vegetation");
  g.slope_dir = planes(slope_dir, kSlopeCategories, "slope direction");
  g.elevation = elevation;
  check_shape(g.elevation, region, "elevation");
  g.elevation_normalized = normalize_elevation(g.elevation);
  return g;
}

const GridF& TerrainGrid::channel(int c) const {
  if (c < kVegetationOffset) return soil.at(c - kSoilOffset);
  if (c < kSlopeOffset) return vegetation.at(c - kVegetationOffset);
  if (c < kElevationChannel) return slope_dir.at(c - kSlopeOffset);
  if (c == kElevationChannel) return elevation;
  throw std::out_of_range("terrain channel " + std::to_string(c));
}

namespace {
int hot_index(const std::vector<GridF>& planes, int row, int col) {
  for (std::size_t k = 0; k < planes.size(); ++k) {
    if (planes[k](row, col) == 1.0f) return static_cast<int>(k);
  }
  return -1;
}
}  // namespace

int TerrainGrid::soil_category(int row, int col) const { return hot_index(soil, row, col); }
int TerrainGrid::slope_category(int row, int col) const { return hot_index(slope_dir, row, col); }

void TerrainGrid::validate() const {
  region.validate();
  check_one_hot(soil, kSoilCategories, region, "soil");
  check_one_hot(vegetation, kVegetationCategories, region, "vegetation");
  check_one_hot(slope_dir, kSlopeCategories, region, "slope direction");
  check_shape(elevation, region, "elevation");
  if (!elevation.allFinite()) throw ValidationError("elevation has non-finite values");
}

bool TerrainGrid::operator==(const TerrainGrid& o) const {
  return region == o.region && soil == o.soil && vegetation == o.vegetation && slope_dir == o.slope_dir &&
         elevation == o.elevation;
}

GridD normalize_elevation(const GridF& elevation) {
  const GridD e = elevation.cast<double>();
  if (e.size() == 0) return e;
  const double first = e.data()[0];
  if ((e.array() == first).all()) return GridD::Zero(e.rows(), e.cols());
  const double mean = e.mean();
  const GridD centered = e.array() - mean;
  const double var = centered.array().square().mean();
  GridD z = centered / std::sqrt(var);
  // Re-center to absorb the rounding in the division.
  z.array() -= z.mean();
  return z;
}

void EventTable::validate(std::span<const Region> regions, std::int64_t t_begin, std::int64_t t_end) const {
  for (const auto& e : events) {
    const Region* match = nullptr;
    for (const auto& r : regions) {
      if (r.region_id == e.region_id) match = &r;
    }
    if (match == nullptr) throw ValidationError("event references unknown region '" + e.region_id + "'");
    if (e.t_index < t_begin || e.t_index >= t_end) {
      throw ValidationError("event at hour " + std::to_string(e.t_index) + " outside dataset range");
    }
    if (e.y < 0 || e.y >= match->height_cells || e.x < 0 || e.x >= match->width_cells) {
      throw ValidationError("event cell (" + std::to_string(e.y) + "," + std::to_string(e.x) + ") outside region " +
                            e.region_id);
    }
  }
}

std::filesystem::path payload_path_for(const std::filesystem::path& manifest_path) {
  return manifest_path.parent_path() / (manifest_path.filename().string() + ".bin");
}

void write_rainfall_stack(const RainfallSequence& seq, const std::filesystem::path& path) {
  seq.validate();
  const Region& region = seq.region();
  const auto hw = static_cast<std::size_t>(region.height_cells) * region.width_cells;

  std::vector<float> payload;
  payload.reserve(hw * seq.size());
  std::string provenance;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto& f = seq[t];
    payload.insert(payload.end(), f.values.data(), f.values.data() + hw);
    if (t > 0) provenance += ',';
    provenance += to_string(f.provenance);
  }

  Manifest m;
  m.set("format", kRainFormat);
  m.set("version", 1);
  write_region(m, region);
  m.set("epoch", seq[0].t_index);
  m.set("dt_hours", 1);
  m.set("T", static_cast<std::int64_t>(seq.size()));
  m.set("provenance", provenance);
  m.set("dtype", "float32le");
  m.set("layout", "t,row,col");
  const auto payload_path = payload_path_for(path);
  m.set("payload", payload_path.filename().string());

  write_f32le(payload_path, payload);
  m.write(path);
}

RainfallSequence read_rainfall_stack(const std::filesystem::path& path) {
  const Manifest m = Manifest::read(path);
  expect_format(m, kRainFormat, path);
  if (m.get("layout") != "t,row,col") throw IoError(path.string() + ": unsupported layout");
  if (m.get_int("dt_hours") != 1) throw IoError(path.string() + ": only hourly stacks are supported");
  const Region region = read_region(m);
  const std::int64_t epoch = m.get_int("epoch");
  const std::int64_t steps = m.get_int("T");
  if (steps < 1) throw IoError(path.string() + ": T must be positive");
  const auto prov = split(m.get("provenance"), ',');
  if (static_cast<std::int64_t>(prov.size()) != steps) {
    throw IoError(path.string() + ": provenance list has " + std::to_string(prov.size()) + " entries, T=" +
                  std::to_string(steps));
  }
  const auto hw = static_cast<std::size_t>(region.height_cells) * region.width_cells;
  const auto values = read_payload(m, path, hw * static_cast<std::size_t>(steps));

  RainfallSequence seq;
  seq.fields.reserve(static_cast<std::size_t>(steps));
  for (std::int64_t t = 0; t < steps; ++t) {
    RainfallField f;
    f.region = region;
    f.t_index = epoch + t;
    f.provenance = parse_provenance(trim(prov[static_cast<std::size_t>(t)]));
    f.values = Eigen::Map<const GridF>(values.data() + static_cast<std::size_t>(t) * hw, region.height_cells,
                                       region.width_cells);
    seq.fields.push_back(std::move(f));
  }
  seq.validate();
  return seq;
}

void write_terrain(const TerrainGrid& grid, const std::filesystem::path& path) {
  grid.validate();
  const auto hw = static_cast<std::size_t>(grid.region.height_cells) * grid.region.width_cells;
  std::vector<float> payload;
  payload.reserve(hw * kTerrainChannels);
  for (int c = 0; c < kTerrainChannels; ++c) {
    const GridF& plane = grid.channel(c);
    payload.insert(payload.end(), plane.data(), plane.data() + hw);
  }
  Manifest m;
  m.set("format", kTerrainFormat);
  m.set("version", 1);
  write_region(m, grid.region);
  m.set("C", kTerrainChannels);
  m.set("channels", "soil:10,vegetation:11,slope_dir:8,elevation:1");
  m.set("dtype", "float32le");
  m.set("layout", "channel,row,col");
  const auto payload_path = payload_path_for(path);
  m.set("payload", payload_path.filename().string());
  write_f32le(payload_path, payload);
  m.write(path);
}

TerrainGrid read_terrain(const std::filesystem::path& path) {
  const Manifest m = Manifest::read(path);
  expect_format(m, kTerrainFormat, path);
  if (m.get("layout") != "channel,row,col") throw IoError(path.string() + ": unsupported layout");
  if (m.get_int("C") != kTerrainChannels) throw IoError(path.string() + ": expected 30 channels");
  if (m.get("channels") != "soil:10,vegetation:11,slope_dir:8,elevation:1") {
    throw IoError(path.string() + ": unexpected channel layout");
  }
  const Region region = read_region(m);
  const auto hw = static_cast<std::size_t>(region.height_cells) * region.width_cells;
  const auto values = read_payload(m, path, hw * kTerrainChannels);
  auto plane = [&](int c) {
    return GridF(Eigen::Map<const GridF>(values.data() + static_cast<std::size_t>(c) * hw, region.height_cells,
                                         region.width_cells));
  };
  TerrainGrid g;
  g.region = region;
  for (int c = 0; c < kSoilCategories; ++c) g.soil.push_back(plane(kSoilOffset + c));
  for (int c = 0; c < kVegetationCategories; ++c) g.vegetation.push_back(plane(kVegetationOffset + c));
  for (int c = 0; c < kSlopeCategories; ++c) g.slope_dir.push_back(plane(kSlopeOffset + c));
  g.elevation = plane(kElevationChannel);
  g.validate();
  g.elevation_normalized = normalize_elevation(g.elevation);
  return g;
}

void write_events(const EventTable& table, const std::filesystem::path& path) {
  std::string out = "region_id,t_index,y,x\n";
  for (const auto& e : table.events) {
    if (!valid_identifier(e.region_id)) throw ValidationError("event region id '" + e.region_id + "' is invalid");
    out += e.region_id + "," + std::to_string(e.t_index) + "," + std::to_string(e.y) + "," + std::to_string(e.x) + "\n";
  }
  write_text_file(path, out);
}

EventTable read_events(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || trim(line) != "region_id,t_index,y,x") {
    throw IoError(path.string() + ": missing header 'region_id,t_index,y,x'");
  }
  EventTable table;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cols = split(trim(line), ',');
    if (cols.size() != 4) throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 4 columns");
    auto to_int = [&](const std::string& s) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad integer '" + s + "'");
      }
      return v;
    };
    Event e;
    e.region_id = cols[0];
    e.t_index = to_int(cols[1]);
    e.y = static_cast<int>(to_int(cols[2]));
    e.x = static_cast<int>(to_int(cols[3]));
    table.events.push_back(std::move(e));
  }
  return table;
}

}  // namespace lews
