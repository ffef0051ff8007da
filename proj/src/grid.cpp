#include "bnnswarm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bnnswarm/errors.hpp"

namespace bnnswarm {

GridField::GridField(Rect r, int nx_, int ny_, double fill) : region(r), nx(nx_), ny(ny_) {
  if (nx <= 0 || ny <= 0) throw ArgumentError("grid", "grid resolution must be positive");
  if (!(r.width() > 0.0) || !(r.height() > 0.0)) throw ArgumentError("grid", "grid region must have positive area");
  values.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), fill);
}

Vec2 GridField::cell_center(int i, int j) const {
  return {region.min.x + (i + 0.5) * cell_width(), region.min.y + (j + 0.5) * cell_height()};
}

Vec2 GridField::cell_center(std::size_t flat) const {
  return cell_center(static_cast<int>(flat % static_cast<std::size_t>(nx)),
                     static_cast<int>(flat / static_cast<std::size_t>(nx)));
}

double GridField::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

bool GridField::same_shape(const GridField& other) const { return nx == other.nx && ny == other.ny; }

std::vector<Vec2> cell_centers(const Rect& region, int nx, int ny) {
  const GridField g(region, nx, ny);
  std::vector<Vec2> out(g.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = g.cell_center(k);
  return out;
}

void write_grid_csv(const GridField& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", grid.region.min.x, grid.region.min.y,
                grid.region.max.x, grid.region.max.y);
  out << "# region " << buf << '\n';
  out << "# resolution " << grid.nx << ',' << grid.ny << '\n';
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", grid.at(i, j));
      if (i) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError(path, "write failed");
}

namespace {

std::vector<double> parse_numbers(const std::string& line, const std::string& path) {
  std::vector<double> v;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double x = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str()) throw IoError(path, "not a number: '" + cell + "'");
    v.push_back(x);
  }
  return v;
}

}  // namespace

GridField read_grid_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open for reading");
  std::string line;
  const std::string region_tag = "# region ";
  const std::string res_tag = "# resolution ";
  if (!std::getline(in, line) || line.rfind(region_tag, 0) != 0) throw IoError(path, "missing region header");
  const auto r = parse_numbers(line.substr(region_tag.size()), path);
  if (!std::getline(in, line) || line.rfind(res_tag, 0) != 0) throw IoError(path, "missing resolution header");
  const auto res = parse_numbers(line.substr(res_tag.size()), path);
  if (r.size() != 4 || res.size() != 2) throw IoError(path, "malformed header");
  GridField g(Rect{{r[0], r[1]}, {r[2], r[3]}}, static_cast<int>(res[0]), static_cast<int>(res[1]));
  for (int j = 0; j < g.ny; ++j) {
    if (!std::getline(in, line)) throw IoError(path, "missing row " + std::to_string(j));
    const auto row = parse_numbers(line, path);
    if (row.size() != static_cast<std::size_t>(g.nx)) throw IoError(path, "row " + std::to_string(j) + " has wrong width");
    std::copy(row.begin(), row.end(), g.values.begin() + static_cast<std::ptrdiff_t>(j) * g.nx);
  }
  return g;
}

std::vector<std::uint8_t> grid_to_gray(const GridField& grid) {
  for (double v : grid.values)
    if (!std::isfinite(v)) throw ArgumentError("grid", "cannot render a grid with non-finite values");
  std::vector<std::uint8_t> px(grid.values.size(), 0);
  if (px.empty()) return px;
  const auto [lo, hi] = std::minmax_element(grid.values.begin(), grid.values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return px;
  for (std::size_t k = 0; k < px.size(); ++k)
    px[k] = static_cast<std::uint8_t>(std::lround(255.0 * (grid.values[k] - *lo) / range));
  return px;
}

void write_grid_pgm(const GridField& grid, const std::string& path) {
  const auto px = grid_to_gray(grid);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "P5\n" << grid.nx << ' ' << grid.ny << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) throw IoError(path, "write failed");
}

void render_grid(const GridField& grid, const std::string& stem) {
  write_grid_csv(grid, stem + ".csv");
  write_grid_pgm(grid, stem + ".pgm");
}

}  // namespace bnnswarm
