#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bnnswarm/geometry.hpp"

namespace bnnswarm {

// Dense scalar field over a rectangle. values[j * nx + i] belongs to the
// cell in column i (x) and row j (y), row 0 at region.min.y.
struct GridField {
  Rect region;
  int nx = 0;
  int ny = 0;
  std::vector<double> values;

  GridField() = default;
  GridField(Rect r, int nx_, int ny_, double fill = 0.0);

  std::size_t size() const { return values.size(); }
  double cell_width() const { return region.width() / nx; }
  double cell_height() const { return region.height() / ny; }
  double cell_area() const { return cell_width() * cell_height(); }
  Vec2 cell_center(int i, int j) const;
  Vec2 cell_center(std::size_t flat) const;
  double& at(int i, int j) { return values[static_cast<std::size_t>(j) * nx + i]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }

  double mean() const;
  bool same_shape(const GridField& other) const;
  bool operator==(const GridField&) const = default;
};

// Cell-centre coordinates of a grid, row-major.
std::vector<Vec2> cell_centers(const Rect& region, int nx, int ny);

// CSV: two '#' header lines (region bounds, resolution), then ny rows of nx
// values printed with 17 significant digits.
void write_grid_csv(const GridField& grid, const std::string& path);
GridField read_grid_csv(const std::string& path);

// 8-bit grey levels min-max normalised to the grid's own range; a constant
// grid maps to all zeros.
std::vector<std::uint8_t> grid_to_gray(const GridField& grid);
// Binary PGM (P5), rows in storage order.
void write_grid_pgm(const GridField& grid, const std::string& path);

// Writes <stem>.csv and <stem>.pgm.
void render_grid(const GridField& grid, const std::string& stem);

}  // namespace bnnswarm
