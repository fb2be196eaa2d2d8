#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace piezo {

enum class BoundaryTag { Electrode, Ground, Remaining };

std::string_view boundary_tag_name(BoundaryTag tag) noexcept;
BoundaryTag parse_boundary_tag(std::string_view text);

using Point = std::array<double, 3>;
using CellNodes = std::array<int, 4>;   // unused trailing slots are -1
using FacetNodes = std::array<int, 3>;  // unused trailing slots are -1

struct BoundaryFacet {
  FacetNodes nodes{-1, -1, -1};
  BoundaryTag tag = BoundaryTag::Remaining;

  bool operator==(const BoundaryFacet&) const = default;
};

/// Simplicial mesh of the domain with an explicit boundary partition into
/// electrode, ground and remaining facets.
///
/// Meshes are validated on construction: cells are reoriented to positive
/// signed volume, every tagged facet must be a boundary facet, every boundary
/// facet must be tagged exactly once, and electrode/ground must both be
/// nonempty and share no node.
class Mesh {
 public:
  Mesh(int dim, std::vector<Point> nodes, std::vector<CellNodes> cells,
       std::vector<BoundaryFacet> facets);

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] int nodes_per_cell() const noexcept { return dim_ + 1; }
  [[nodiscard]] int nodes_per_facet() const noexcept { return dim_; }
  [[nodiscard]] const std::vector<Point>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<CellNodes>& cells() const noexcept { return cells_; }
  [[nodiscard]] const std::vector<BoundaryFacet>& boundary_facets() const noexcept {
    return facets_;
  }
  [[nodiscard]] std::size_t node_count() const noexcept { return nodes_.size(); }
  [[nodiscard]] std::size_t cell_count() const noexcept { return cells_.size(); }

  /// Signed volume (area in 2D) of a cell.
  [[nodiscard]] double cell_volume(std::size_t cell) const;

  /// Number of distinct cell edges.
  [[nodiscard]] std::size_t edge_count() const;

  bool operator==(const Mesh&) const = default;

 private:
  void validate_and_orient();

  int dim_;
  std::vector<Point> nodes_;
  std::vector<CellNodes> cells_;
  std::vector<BoundaryFacet> facets_;
};

/// Parses the line-oriented mesh text format. Throws ParseError or
/// TopologyError.
Mesh load_mesh(const std::string& path);
Mesh parse_mesh(std::string_view text);

void save_mesh(const Mesh& mesh, const std::string& path);
std::string format_mesh(const Mesh& mesh);

struct RectTagging {
  BoundaryTag top = BoundaryTag::Electrode;
  BoundaryTag bottom = BoundaryTag::Ground;
  BoundaryTag left = BoundaryTag::Remaining;
  BoundaryTag right = BoundaryTag::Remaining;
};

/// Structured triangulation of [0, lx] x [0, ly]; each quad is split along the
/// diagonal from its lower-left to upper-right corner. Node (i, j) has index
/// j * (nx + 1) + i.
Mesh generate_rect(int nx, int ny, double lx, double ly, const RectTagging& tags = {});

/// Degree-of-freedom layout. Displacements are interleaved per node
/// (node * dim + component); potentials are indexed by node.
struct DofMap {
  int dim = 0;
  int n_u = 0;
  int n_phi = 0;
  std::vector<int> constrained_phi;  // sorted
  std::vector<int> free_phi;         // sorted
  std::vector<int> electrode_nodes;  // sorted
  std::vector<int> ground_nodes;     // sorted
  std::vector<int> free_index;       // node -> position in free_phi, or -1

  [[nodiscard]] int n_free() const noexcept { return static_cast<int>(free_phi.size()); }
};

DofMap build_dofmap(const Mesh& mesh);

}  // namespace piezo
