#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace mealrl {

using Rng = std::mt19937_64;

/// Raised for malformed inputs: config files, region files, CLI values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridCoord {
  int row = 0;
  int col = 0;

  friend constexpr auto operator<=>(const GridCoord&, const GridCoord&) = default;
};

/// Travel time in minutes between two cells; one minute per adjacent move.
constexpr int manhattan(GridCoord a, GridCoord b) noexcept {
  const int dr = a.row - b.row;
  const int dc = a.col - b.col;
  return (dr < 0 ? -dr : dr) + (dc < 0 ? -dc : dc);
}

/// Next cell on the deterministic shortest path: rows first, then columns.
constexpr GridCoord step_toward(GridCoord from, GridCoord to) noexcept {
  if (from.row != to.row) {
    from.row += from.row < to.row ? 1 : -1;
  } else if (from.col != to.col) {
    from.col += from.col < to.col ? 1 : -1;
  }
  return from;
}

struct Restaurant {
  int id = 0;
  GridCoord cell;
  double popularity = 1.0;

  friend bool operator==(const Restaurant&, const Restaurant&) = default;
};

/// Static description of a service region. Immutable once validated.
struct RegionConfig {
  std::string name;
  int height = 0;
  int width = 0;
  GridCoord depot;
  std::vector<Restaurant> restaurants;
  /// Row-major height x width matrix of unnormalized demand weights.
  std::vector<double> customer_weights;

  friend bool operator==(const RegionConfig&, const RegionConfig&) = default;

  int num_restaurants() const noexcept { return static_cast<int>(restaurants.size()); }
  int num_cells() const noexcept { return height * width; }
  /// Longest shortest path inside the grid.
  int max_trip() const noexcept { return height + width - 2; }

  bool contains(GridCoord c) const noexcept {
    return c.row >= 0 && c.col >= 0 && c.row < height && c.col < width;
  }
  int cell_index(GridCoord c) const noexcept { return c.row * width + c.col; }
  GridCoord cell_at(int index) const noexcept { return {index / width, index % width}; }

  double customer_weight(GridCoord c) const { return customer_weights.at(cell_index(c)); }

  /// Customer weights scaled to a probability distribution.
  std::vector<double> customer_distribution() const {
    const double total = std::accumulate(customer_weights.begin(), customer_weights.end(), 0.0);
    std::vector<double> p(customer_weights.size());
    std::transform(customer_weights.begin(), customer_weights.end(), p.begin(),
                   [total](double w) { return w / total; });
    return p;
  }

  std::vector<double> restaurant_distribution() const {
    double total = 0.0;
    for (const auto& r : restaurants) total += r.popularity;
    std::vector<double> p;
    p.reserve(restaurants.size());
    for (const auto& r : restaurants) p.push_back(r.popularity / total);
    return p;
  }

  /// Throws ConfigError naming the offending field.
  void validate() const {
    if (height < 1 || width < 1) {
      throw ConfigError("region: field 'height'/'width' must be positive");
    }
    if (!contains(depot)) {
      throw ConfigError("region: field 'depot' lies outside the " + std::to_string(height) + "x" +
                        std::to_string(width) + " grid");
    }
    if (restaurants.empty()) {
      throw ConfigError("region: field 'restaurants' must contain at least one restaurant");
    }
    double popularity_sum = 0.0;
    for (std::size_t i = 0; i < restaurants.size(); ++i) {
      const auto& r = restaurants[i];
      if (r.id != static_cast<int>(i)) {
        throw ConfigError("region: restaurant ids must be dense 0..R-1; found id " +
                          std::to_string(r.id) + " at position " + std::to_string(i));
      }
      if (!contains(r.cell)) {
        throw ConfigError("region: restaurant " + std::to_string(r.id) +
                          " field 'cell' lies outside the grid");
      }
      if (!(r.popularity >= 0.0) || !std::isfinite(r.popularity)) {
        throw ConfigError("region: restaurant " + std::to_string(r.id) +
                          " field 'popularity' must be finite and nonnegative");
      }
      popularity_sum += r.popularity;
    }
    if (!(popularity_sum > 0.0)) {
      throw ConfigError("region: field 'restaurants' popularity weights must sum to a positive value");
    }
    if (customer_weights.size() != static_cast<std::size_t>(num_cells())) {
      throw ConfigError("region: field 'customer_weights' must have " + std::to_string(height) +
                        " rows of " + std::to_string(width) + " entries");
    }
    bool any_positive = false;
    for (double w : customer_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw ConfigError("region: field 'customer_weights' entries must be finite and nonnegative");
      }
      any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) {
      throw ConfigError("region: field 'customer_weights' needs at least one positive entry");
    }
  }
};

inline nlohmann::json to_json(const RegionConfig& region) {
  nlohmann::json j;
  j["name"] = region.name;
  j["height"] = region.height;
  j["width"] = region.width;
  j["depot"] = {region.depot.row, region.depot.col};
  auto& rs = j["restaurants"] = nlohmann::json::array();
  for (const auto& r : region.restaurants) {
    rs.push_back({{"id", r.id}, {"cell", {r.cell.row, r.cell.col}}, {"popularity", r.popularity}});
  }
  auto& rows = j["customer_weights"] = nlohmann::json::array();
  for (int row = 0; row < region.height; ++row) {
    auto first = region.customer_weights.begin() + static_cast<std::ptrdiff_t>(row) * region.width;
    rows.push_back(std::vector<double>(first, first + region.width));
  }
  return j;
}

namespace detail {

inline GridCoord coord_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw ConfigError("region: field '" + field + "' must be a [row, col] integer pair");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(ctx + ": missing field '" + key + "'");
  return *it;
}

/// Line number (1-based) of a byte offset in text.
inline std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace detail

/// Parse JSON text, reporting syntax errors with a line number.
inline nlohmann::json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source + ":" + std::to_string(detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                      ": parse error: " + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write file '" + path + "'");
  out << text;
}

inline RegionConfig region_from_json(const nlohmann::json& j) {
  const std::string ctx = "region";
  if (!j.is_object()) throw ConfigError("region: document must be an object");
  RegionConfig region;
  try {
    region.name = j.value("name", std::string{});
    region.height = detail::require(j, "height", ctx).get<int>();
    region.width = detail::require(j, "width", ctx).get<int>();
    region.depot = detail::coord_from_json(detail::require(j, "depot", ctx), "depot");
    const auto& rs = detail::require(j, "restaurants", ctx);
    if (!rs.is_array()) throw ConfigError("region: field 'restaurants' must be an array");
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const std::string rctx = "region: restaurants[" + std::to_string(i) + "]";
      Restaurant r;
      r.id = detail::require(rs[i], "id", rctx).get<int>();
      r.cell = detail::coord_from_json(detail::require(rs[i], "cell", rctx),
                                       "restaurants[" + std::to_string(i) + "].cell");
      r.popularity = detail::require(rs[i], "popularity", rctx).get<double>();
      region.restaurants.push_back(r);
    }
    const auto& rows = detail::require(j, "customer_weights", ctx);
    if (!rows.is_array() || rows.size() != static_cast<std::size_t>(std::max(region.height, 0))) {
      throw ConfigError("region: field 'customer_weights' must have 'height' rows");
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r].is_array() || rows[r].size() != static_cast<std::size_t>(region.width)) {
        throw ConfigError("region: field 'customer_weights' row " + std::to_string(r) +
                          " must have 'width' entries");
      }
      for (const auto& w : rows[r]) region.customer_weights.push_back(w.get<double>());
    }
  } catch (const nlohmann::json::type_error& e) {
    throw ConfigError(std::string("region: wrong value type: ") + e.what());
  }
  region.validate();
  return region;
}

inline RegionConfig load_region(const std::string& path) {
  return region_from_json(parse_json_text(read_text_file(path), path));
}

inline void save_region(const RegionConfig& region, const std::string& path) {
  region.validate();
  write_text_file(path, to_json(region).dump(2) + "\n");
}

/// Square grid with the depot in the middle cell, uniform customer demand
/// and long-tailed restaurant popularity (squared uniform draws).
inline RegionConfig generate_synthetic_region(int height, int width, int n_restaurants,
                                              std::uint64_t seed) {
  if (height < 1 || width < 1) throw ConfigError("generate_synthetic_region: height and width must be positive");
  if (n_restaurants < 1 || n_restaurants > height * width - 1) {
    throw ConfigError("generate_synthetic_region: restaurants must be in [1, height*width-1]");
  }
  RegionConfig region;
  region.name = "synthetic-" + std::to_string(height) + "x" + std::to_string(width) + "-r" +
                std::to_string(n_restaurants) + "-s" + std::to_string(seed);
  region.height = height;
  region.width = width;
  region.depot = {height / 2, width / 2};

  Rng rng(seed);
  std::vector<int> cells;
  cells.reserve(static_cast<std::size_t>(height * width));
  for (int i = 0; i < height * width; ++i) {
    if (i != region.cell_index(region.depot)) cells.push_back(i);
  }
  // Partial Fisher-Yates keeps placement a pure function of the seed.
  for (int i = 0; i < n_restaurants; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(cells.size()) - 1);
    std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(pick(rng))]);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n_restaurants; ++i) {
    const double u = unit(rng);
    region.restaurants.push_back({i, region.cell_at(cells[static_cast<std::size_t>(i)]), 0.05 + u * u});
  }
  region.customer_weights.assign(static_cast<std::size_t>(height * width), 1.0);
  region.validate();
  return region;
}

}  // namespace mealrl
