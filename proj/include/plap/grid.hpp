#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "plap/errors.hpp"

namespace plap {

using Index = std::int64_t;

// Axis-aligned tensor-product grid on a box, N = 1, 2, 3. Nodes live at the
// tensor lattice; cells are the h-boxes between them. Immutable after
// construction.
class Grid {
 public:
  Grid(int dim, std::array<double, 3> lo, std::array<double, 3> hi,
       std::array<int, 3> nodes_per_axis)
      : dim_(dim), lo_(lo), hi_(hi), nn_(nodes_per_axis) {
    if (dim < 1 || dim > 3) throw InvalidParameters("grid dimension must be 1, 2, or 3");
    for (int a = dim; a < 3; ++a) {
      nn_[a] = 1;
      lo_[a] = 0.0;
      hi_[a] = 0.0;
    }
    cell_vol_ = 1.0;
    for (int a = 0; a < dim_; ++a) {
      if (nn_[a] < 3) throw InvalidParameters("grid needs at least 3 nodes per axis");
      if (!(hi_[a] > lo_[a])) throw InvalidParameters("grid box must have positive extent");
      h_[a] = (hi_[a] - lo_[a]) / (nn_[a] - 1);
      cell_vol_ *= h_[a];
    }
    node_count_ = 1;
    cell_count_ = 1;
    for (int a = 0; a < dim_; ++a) {
      node_count_ *= nn_[a];
      cell_count_ *= nn_[a] - 1;
    }
  }

  static Grid interval(double a, double b, int nodes) {
    return Grid(1, {a, 0, 0}, {b, 0, 0}, {nodes, 1, 1});
  }
  static Grid rectangle(double ax, double bx, double ay, double by, int nx, int ny) {
    return Grid(2, {ax, ay, 0}, {bx, by, 0}, {nx, ny, 1});
  }
  static Grid unit_box(int dim, int nodes_per_axis) {
    std::array<double, 3> lo{0, 0, 0}, hi{0, 0, 0};
    std::array<int, 3> nn{1, 1, 1};
    for (int a = 0; a < dim; ++a) {
      hi[a] = 1.0;
      nn[a] = nodes_per_axis;
    }
    return Grid(dim, lo, hi, nn);
  }

  // Same box, spacing halved (node count 2m-1 per axis). Nodes of the coarse
  // grid are a subset of the fine one.
  Grid refined() const {
    std::array<int, 3> nn = nn_;
    for (int a = 0; a < dim_; ++a) nn[a] = 2 * nn_[a] - 1;
    return Grid(dim_, lo_, hi_, nn);
  }

  int dim() const { return dim_; }
  Index node_count() const { return node_count_; }
  Index cell_count() const { return cell_count_; }
  double spacing(int axis) const { return h_[axis]; }
  double cell_volume() const { return cell_vol_; }
  double lo(int axis) const { return lo_[axis]; }
  double hi(int axis) const { return hi_[axis]; }
  int nodes_along(int axis) const { return nn_[axis]; }
  int cells_along(int axis) const { return nn_[axis] - 1; }

  std::array<int, 3> node_multi(Index id) const {
    std::array<int, 3> m{0, 0, 0};
    m[0] = static_cast<int>(id % nn_[0]);
    id /= nn_[0];
    m[1] = static_cast<int>(id % nn_[1]);
    m[2] = static_cast<int>(id / nn_[1]);
    return m;
  }
  Index node_id(int i, int j = 0, int k = 0) const {
    return (static_cast<Index>(k) * nn_[1] + j) * nn_[0] + i;
  }
  std::array<int, 3> cell_multi(Index id) const {
    std::array<int, 3> m{0, 0, 0};
    const int cx = nn_[0] - 1, cy = dim_ > 1 ? nn_[1] - 1 : 1;
    m[0] = static_cast<int>(id % cx);
    id /= cx;
    m[1] = static_cast<int>(id % cy);
    m[2] = static_cast<int>(id / cy);
    return m;
  }
  Index cell_id(int i, int j = 0, int k = 0) const {
    const int cx = nn_[0] - 1, cy = dim_ > 1 ? nn_[1] - 1 : 1;
    return (static_cast<Index>(k) * cy + j) * cx + i;
  }

  std::array<double, 3> node_coord(Index id) const {
    const auto m = node_multi(id);
    std::array<double, 3> x{0, 0, 0};
    for (int a = 0; a < dim_; ++a) x[a] = lo_[a] + m[a] * h_[a];
    return x;
  }
  std::array<double, 3> cell_center(Index id) const {
    const auto m = cell_multi(id);
    std::array<double, 3> x{0, 0, 0};
    for (int a = 0; a < dim_; ++a) x[a] = lo_[a] + (m[a] + 0.5) * h_[a];
    return x;
  }

  bool is_boundary(Index id) const {
    const auto m = node_multi(id);
    for (int a = 0; a < dim_; ++a)
      if (m[a] == 0 || m[a] == nn_[a] - 1) return true;
    return false;
  }

  // Lumped control volume of a node: half-cells along each axis at the faces.
  double node_volume(Index id) const {
    const auto m = node_multi(id);
    double vol = 1.0;
    for (int a = 0; a < dim_; ++a) {
      const double faces = (m[a] > 0 ? 0.5 : 0.0) + (m[a] < nn_[a] - 1 ? 0.5 : 0.0);
      vol *= h_[a] * faces;
    }
    return vol;
  }

  // Centroid of the node's control volume; differs from the node coordinate
  // only on boundary nodes.
  std::array<double, 3> node_control_centroid(Index id) const {
    const auto m = node_multi(id);
    std::array<double, 3> x{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      const double left = m[a] > 0 ? h_[a] / 2 : 0.0;
      const double right = m[a] < nn_[a] - 1 ? h_[a] / 2 : 0.0;
      x[a] = lo_[a] + m[a] * h_[a] + (right - left) / 2;
    }
    return x;
  }

  int corners_per_cell() const { return 1 << dim_; }

  // Node ids of the 2^N corners of a cell; corner bit a set = high side on axis a.
  void cell_corners(Index cell, Index* out) const {
    const auto m = cell_multi(cell);
    const int nc = corners_per_cell();
    for (int c = 0; c < nc; ++c) {
      out[c] = node_id(m[0] + (c & 1), dim_ > 1 ? m[1] + ((c >> 1) & 1) : 0,
                       dim_ > 2 ? m[2] + ((c >> 2) & 1) : 0);
    }
  }

  // d(center of cell, ∂Ω) under the box geometry.
  double boundary_distance(const std::array<double, 3>& x) const {
    double d = 1e300;
    for (int a = 0; a < dim_; ++a) {
      d = std::min(d, x[a] - lo_[a]);
      d = std::min(d, hi_[a] - x[a]);
    }
    return d;
  }

  bool same_layout(const Grid& other) const {
    if (dim_ != other.dim_) return false;
    for (int a = 0; a < dim_; ++a) {
      if (nn_[a] != other.nn_[a] || lo_[a] != other.lo_[a] || hi_[a] != other.hi_[a])
        return false;
    }
    return true;
  }

 private:
  int dim_;
  std::array<double, 3> lo_, hi_;
  std::array<int, 3> nn_;
  std::array<double, 3> h_{0, 0, 0};
  double cell_vol_ = 0;
  Index node_count_ = 0, cell_count_ = 0;
};

// Scalar field on grid nodes. Evolution and prox operate on the discrete
// zero-boundary space; norms accept arbitrary nodal data.
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(const Grid& g) : grid_(&g), values_(g.node_count(), 0.0) {}

  static GridFunction sample(const Grid& g,
                             const std::function<double(std::array<double, 3>)>& f,
                             bool zero_boundary = true) {
    GridFunction u(g);
    for (Index i = 0; i < g.node_count(); ++i) {
      if (zero_boundary && g.is_boundary(i)) continue;
      u.values_[i] = f(g.node_coord(i));
    }
    return u;
  }

  const Grid& grid() const { return *grid_; }
  bool has_grid() const { return grid_ != nullptr; }
  Index size() const { return static_cast<Index>(values_.size()); }
  double operator[](Index i) const { return values_[i]; }
  double& operator[](Index i) { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool zero_boundary(double tol = 0.0) const {
    for (Index i = 0; i < size(); ++i)
      if (grid_->is_boundary(i) && std::abs(values_[i]) > tol) return false;
    return true;
  }
  void project_zero_boundary() {
    for (Index i = 0; i < size(); ++i)
      if (grid_->is_boundary(i)) values_[i] = 0.0;
  }

  GridFunction& operator*=(double s) {
    for (auto& x : values_) x *= s;
    return *this;
  }
  GridFunction& operator+=(const GridFunction& o) {
    for (Index i = 0; i < size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  GridFunction& operator-=(const GridFunction& o) {
    for (Index i = 0; i < size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  friend GridFunction operator*(double s, GridFunction u) {
    u *= s;
    return u;
  }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) {
    a -= b;
    return a;
  }
  friend GridFunction operator+(GridFunction a, const GridFunction& b) {
    a += b;
    return a;
  }

  double max_abs() const {
    double m = 0;
    for (double x : values_) m = std::max(m, std::abs(x));
    return m;
  }
  double min_value() const {
    double m = 1e300;
    for (double x : values_) m = std::min(m, x);
    return m;
  }
  bool finite() const {
    for (double x : values_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  // Snapshot format: header "plap-gridfunction N n0 [n1 [n2]] time", then
  // row-major nodal values one per line.
  void save(const std::string& path, double time = 0.0) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out.precision(17);
    out << "plap-gridfunction " << grid_->dim();
    for (int a = 0; a < grid_->dim(); ++a) out << ' ' << grid_->nodes_along(a);
    out << ' ' << time << '\n';
    for (double x : values_) out << x << '\n';
  }

  static GridFunction load(const std::string& path, const Grid& g, double* time = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string tag;
    int dim = 0;
    in >> tag >> dim;
    if (tag != "plap-gridfunction") throw ParseError("bad snapshot header", 1, "header");
    if (dim != g.dim()) throw ParseError("snapshot dimension mismatch", 1, "dimension");
    for (int a = 0; a < dim; ++a) {
      int n = 0;
      in >> n;
      if (n != g.nodes_along(a)) throw ParseError("snapshot node-count mismatch", 1, "nodes");
    }
    double t = 0;
    in >> t;
    if (time) *time = t;
    GridFunction u(g);
    for (Index i = 0; i < g.node_count(); ++i) {
      if (!(in >> u[i])) throw ParseError("snapshot truncated", static_cast<int>(i) + 2, "value");
    }
    return u;
  }

 private:
  const Grid* grid_ = nullptr;
  std::vector<double> values_;
};

// One real N-vector per cell.
class CellVectorField {
 public:
  CellVectorField() = default;
  explicit CellVectorField(const Grid& g)
      : grid_(&g), vec_(static_cast<std::size_t>(g.cell_count()), {0, 0, 0}) {}

  const Grid& grid() const { return *grid_; }
  Index size() const { return static_cast<Index>(vec_.size()); }
  const std::array<double, 3>& operator[](Index c) const { return vec_[c]; }
  std::array<double, 3>& operator[](Index c) { return vec_[c]; }

 private:
  const Grid* grid_ = nullptr;
  std::vector<std::array<double, 3>> vec_;
};

namespace detail {
// d(multilinear interpolant)/d(corner value) evaluated at the cell center:
// +-1 / (2^{N-1} h_a) with the sign of the corner on axis a.
inline double corner_grad_coeff(const Grid& g, int corner, int axis) {
  const double denom = static_cast<double>(1 << (g.dim() - 1)) * g.spacing(axis);
  return (((corner >> axis) & 1) ? 1.0 : -1.0) / denom;
}
}  // namespace detail

// Cell-centered gradient of the multilinear nodal interpolant.
inline CellVectorField gradient(const GridFunction& u) {
  const Grid& g = u.grid();
  CellVectorField out(g);
  Index corners[8];
  const int nc = g.corners_per_cell();
  for (Index c = 0; c < g.cell_count(); ++c) {
    g.cell_corners(c, corners);
    std::array<double, 3> grad{0, 0, 0};
    for (int k = 0; k < nc; ++k) {
      const double uv = u[corners[k]];
      for (int a = 0; a < g.dim(); ++a) grad[a] += uv * detail::corner_grad_coeff(g, k, a);
    }
    out[c] = grad;
  }
  return out;
}

}  // namespace plap
