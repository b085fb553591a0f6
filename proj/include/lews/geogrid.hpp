// Spatio-temporal grid data model: regions, rainfall fields and sequences,
// terrain channels and landslide event tables, plus their on-disk formats.
//
// Every grid file is a text manifest (`key = value` lines) next to a raw
// payload of 32-bit little-endian floats. The manifest names the payload
// file relative to its own directory.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lews {

/// Input that breaks a documented invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File missing, unreadable, unwritable or structurally damaged.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using GridF = Grid<float>;
using GridD = Grid<double>;

struct Region {
  std::string region_id = "region";
  int height_cells = 10;
  int width_cells = 10;
  double cell_size_km = 1.0;

  void validate() const;
  bool operator==(const Region&) const = default;
};

enum class Provenance { Observed, Forecast, Augmented };

std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& s);

/// Hourly precipitation grid in mm/h.
struct RainfallField {
  Region region;
  std::int64_t t_index = 0;
  GridF values;
  Provenance provenance = Provenance::Observed;

  void validate() const;
};

/// Hourly, gap-free run of fields over one region.
struct RainfallSequence {
  std::vector<RainfallField> fields;

  std::size_t size() const { return fields.size(); }
  bool empty() const { return fields.empty(); }
  const RainfallField& operator[](std::size_t t) const { return fields[t]; }
  RainfallField& operator[](std::size_t t) { return fields[t]; }
  const Region& region() const { return fields.front().region; }

  void validate() const;
};

inline constexpr int kSoilCategories = 10;
inline constexpr int kVegetationCategories = 11;
inline constexpr int kSlopeCategories = 8;
inline constexpr int kTerrainChannels = kSoilCategories + kVegetationCategories + kSlopeCategories + 1;
inline constexpr int kSoilOffset = 0;
inline constexpr int kVegetationOffset = kSoilOffset + kSoilCategories;
inline constexpr int kSlopeOffset = kVegetationOffset + kVegetationCategories;
inline constexpr int kElevationChannel = kSlopeOffset + kSlopeCategories;

/// Geographically anchored terrain channels.
///
/// Channel order on disk and in model inputs: soil 0-9, vegetation 10-20,
/// slope direction 21-28, elevation 29. Elevation is kept raw (meters) and
/// as a per-region z-score.
struct TerrainGrid {
  Region region;
  std::vector<GridF> soil;        // kSoilCategories one-hot planes
  std::vector<GridF> vegetation;  // kVegetationCategories one-hot planes
  std::vector<GridF> slope_dir;   // kSlopeCategories one-hot planes
  GridF elevation;
  GridD elevation_normalized;

  /// Builds one-hot planes from per-cell category indices.
  static TerrainGrid from_categories(const Region& region, const Grid<int>& soil,
                                     const Grid<int>& vegetation, const Grid<int>& slope_dir,
                                     const GridF& elevation);

  /// Channel `c` in the fixed 30-channel order; elevation is the raw plane.
  const GridF& channel(int c) const;
  int soil_category(int row, int col) const;
  int slope_category(int row, int col) const;

  void validate() const;
  bool operator==(const TerrainGrid&) const;
};

/// Per-region z-score; a constant grid maps to all zeros.
GridD normalize_elevation(const GridF& elevation);

struct Event {
  std::string region_id;
  std::int64_t t_index = 0;
  int y = 0;
  int x = 0;

  bool operator==(const Event&) const = default;
};

struct EventTable {
  std::vector<Event> events;

  /// Checks every event against its region's extent and the hour range [t_begin, t_end).
  void validate(std::span<const Region> regions, std::int64_t t_begin, std::int64_t t_end) const;
};

void write_rainfall_stack(const RainfallSequence& seq, const std::filesystem::path& path);
RainfallSequence read_rainfall_stack(const std::filesystem::path& path);

void write_terrain(const TerrainGrid& grid, const std::filesystem::path& path);
TerrainGrid read_terrain(const std::filesystem::path& path);

void write_events(const EventTable& table, const std::filesystem::path& path);
EventTable read_events(const std::filesystem::path& path);

/// Name of the payload file that accompanies a manifest at `manifest_path`.
std::filesystem::path payload_path_for(const std::filesystem::path& manifest_path);

}  // namespace lews
