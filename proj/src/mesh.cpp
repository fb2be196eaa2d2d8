#include "piezo/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "piezo/error.hpp"

namespace piezo {

namespace {

FacetNodes sorted_key(FacetNodes f, int n) {
  std::sort(f.begin(), f.begin() + n);
  return f;
}

double max_edge_length(const std::vector<Point>& nodes, const CellNodes& c, int k) {
  double h = 0.0;
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      const auto& p = nodes[c[a]];
      const auto& q = nodes[c[b]];
      h = std::max(h, std::hypot(p[0] - q[0], p[1] - q[1], p[2] - q[2]));
    }
  }
  return h;
}

double signed_volume(const std::vector<Point>& nodes, const CellNodes& c, int dim) {
  const auto& p0 = nodes[c[0]];
  if (dim == 2) {
    const auto& p1 = nodes[c[1]];
    const auto& p2 = nodes[c[2]];
    return 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
  }
  double d[3][3];
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) d[r][k] = nodes[c[r + 1]][k] - p0[k];
  }
  const double det = d[0][0] * (d[1][1] * d[2][2] - d[1][2] * d[2][1]) -
                     d[0][1] * (d[1][0] * d[2][2] - d[1][2] * d[2][0]) +
                     d[0][2] * (d[1][0] * d[2][1] - d[1][1] * d[2][0]);
  return det / 6.0;
}

[[noreturn]] void topology_error(const std::string& msg) {
  throw Error(ErrorKind::TopologyError, msg);
}

[[noreturn]] void parse_error(int line, const std::string& msg) {
  throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + msg);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string_view boundary_tag_name(BoundaryTag tag) noexcept {
  switch (tag) {
    case BoundaryTag::Electrode: return "electrode";
    case BoundaryTag::Ground: return "ground";
    case BoundaryTag::Remaining: return "remaining";
  }
  return "remaining";
}

BoundaryTag parse_boundary_tag(std::string_view text) {
  if (text == "electrode") return BoundaryTag::Electrode;
  if (text == "ground") return BoundaryTag::Ground;
  if (text == "remaining") return BoundaryTag::Remaining;
  throw Error(ErrorKind::ParseError, "unknown boundary tag '" + std::string(text) + "'");
}

Mesh::Mesh(int dim, std::vector<Point> nodes, std::vector<CellNodes> cells,
           std::vector<BoundaryFacet> facets)
    : dim_(dim), nodes_(std::move(nodes)), cells_(std::move(cells)), facets_(std::move(facets)) {
  if (dim_ != 2 && dim_ != 3) {
    throw Error(ErrorKind::InvalidDimension, "mesh dimension must be 2 or 3");
  }
  validate_and_orient();
}

void Mesh::validate_and_orient() {
  const int k = nodes_per_cell();
  const int nf = nodes_per_facet();
  const int n_nodes = static_cast<int>(nodes_.size());
  if (cells_.empty()) topology_error("mesh has no cells");

  for (auto& p : nodes_) {
    if (dim_ == 2) p[2] = 0.0;
    for (double x : p) {
      if (!std::isfinite(x)) topology_error("non-finite node coordinate");
    }
  }

  std::map<FacetNodes, int> facet_use;
  for (std::size_t ci = 0; ci < cells_.size(); ++ci) {
    auto& c = cells_[ci];
    for (int a = 0; a < 4; ++a) {
      if (a >= k) {
        c[a] = -1;
        continue;
      }
      if (c[a] < 0 || c[a] >= n_nodes) {
        topology_error("cell " + std::to_string(ci) + " references unknown node");
      }
    }
    std::set<int> distinct(c.begin(), c.begin() + k);
    if (static_cast<int>(distinct.size()) != k) {
      topology_error("cell " + std::to_string(ci) + " repeats a node");
    }
    const double vol = signed_volume(nodes_, c, dim_);
    const double h = max_edge_length(nodes_, c, k);
    if (std::abs(vol) <= 1e-14 * std::pow(h, dim_)) {
      topology_error("cell " + std::to_string(ci) + " has zero measure");
    }
    if (vol < 0.0) std::swap(c[0], c[1]);

    for (int skip = 0; skip < k; ++skip) {
      FacetNodes f{-1, -1, -1};
      int pos = 0;
      for (int a = 0; a < k; ++a) {
        if (a != skip) f[pos++] = c[a];
      }
      ++facet_use[sorted_key(f, nf)];
    }
  }

  std::map<FacetNodes, bool> boundary;
  for (const auto& [key, count] : facet_use) {
    if (count > 2) topology_error("facet shared by more than two cells");
    if (count == 1) boundary[key] = false;
  }

  std::set<int> electrode_nodes;
  std::set<int> ground_nodes;
  bool has_electrode = false;
  bool has_ground = false;
  for (auto& facet : facets_) {
    for (int a = nf; a < 3; ++a) facet.nodes[a] = -1;
    for (int a = 0; a < nf; ++a) {
      if (facet.nodes[a] < 0 || facet.nodes[a] >= n_nodes) {
        topology_error("boundary facet references unknown node");
      }
    }
    const auto key = sorted_key(facet.nodes, nf);
    auto it = boundary.find(key);
    if (it == boundary.end()) topology_error("tagged facet is not on the boundary");
    if (it->second) topology_error("boundary facet tagged more than once");
    it->second = true;
    if (facet.tag == BoundaryTag::Electrode) {
      has_electrode = true;
      electrode_nodes.insert(facet.nodes.begin(), facet.nodes.begin() + nf);
    } else if (facet.tag == BoundaryTag::Ground) {
      has_ground = true;
      ground_nodes.insert(facet.nodes.begin(), facet.nodes.begin() + nf);
    }
  }
  for (const auto& [key, tagged] : boundary) {
    if (!tagged) topology_error("untagged boundary facet");
  }
  if (!has_electrode) topology_error("no electrode facet");
  if (!has_ground) topology_error("no ground facet");
  for (int n : electrode_nodes) {
    if (ground_nodes.count(n) != 0) {
      topology_error("node " + std::to_string(n) + " touches both electrode and ground");
    }
  }
}

double Mesh::cell_volume(std::size_t cell) const {
  return signed_volume(nodes_, cells_.at(cell), dim_);
}

std::size_t Mesh::edge_count() const {
  std::set<std::pair<int, int>> edges;
  const int k = nodes_per_cell();
  for (const auto& c : cells_) {
    for (int a = 0; a < k; ++a) {
      for (int b = a + 1; b < k; ++b) edges.emplace(std::min(c[a], c[b]), std::max(c[a], c[b]));
    }
  }
  return edges.size();
}

Mesh parse_mesh(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  int dim = 0;
  std::vector<Point> nodes;
  std::vector<CellNodes> cells;
  std::vector<BoundaryFacet> facets;

  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::string keyword;
    if (!(ls >> keyword)) continue;

    if (keyword == "dim") {
      if (dim != 0) parse_error(line_no, "duplicate dim line");
      if (!(ls >> dim) || (dim != 2 && dim != 3)) parse_error(line_no, "dim must be 2 or 3");
    } else if (dim == 0) {
      parse_error(line_no, "first record must be 'dim'");
    } else if (keyword == "node") {
      long id = -1;
      Point p{0.0, 0.0, 0.0};
      if (!(ls >> id)) parse_error(line_no, "bad node id");
      if (id != static_cast<long>(nodes.size())) parse_error(line_no, "node ids must be dense and 0-based");
      for (int a = 0; a < dim; ++a) {
        if (!(ls >> p[a])) parse_error(line_no, "bad node coordinate");
      }
      nodes.push_back(p);
    } else if (keyword == "cell") {
      long id = -1;
      CellNodes c{-1, -1, -1, -1};
      if (!(ls >> id)) parse_error(line_no, "bad cell id");
      if (id != static_cast<long>(cells.size())) parse_error(line_no, "cell ids must be dense and 0-based");
      for (int a = 0; a <= dim; ++a) {
        if (!(ls >> c[a])) parse_error(line_no, "bad cell node index");
        if (c[a] < 0 || c[a] >= static_cast<int>(nodes.size())) {
          parse_error(line_no, "cell references undefined node");
        }
      }
      cells.push_back(c);
    } else if (keyword == "facet") {
      std::string tag;
      BoundaryFacet f;
      if (!(ls >> tag)) parse_error(line_no, "missing facet tag");
      try {
        f.tag = parse_boundary_tag(tag);
      } catch (const Error& e) {
        parse_error(line_no, e.what());
      }
      for (int a = 0; a < dim; ++a) {
        if (!(ls >> f.nodes[a])) parse_error(line_no, "bad facet node index");
      }
      facets.push_back(f);
    } else {
      parse_error(line_no, "unknown record '" + keyword + "'");
    }
    std::string trailing;
    if (ls >> trailing) parse_error(line_no, "unexpected trailing token '" + trailing + "'");
  }
  if (dim == 0) throw Error(ErrorKind::ParseError, "missing 'dim' line");
  return Mesh(dim, std::move(nodes), std::move(cells), std::move(facets));
}

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open mesh file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_mesh(buf.str());
}

std::string format_mesh(const Mesh& mesh) {
  std::ostringstream out;
  const int dim = mesh.dim();
  out << "dim " << dim << '\n';
  for (std::size_t i = 0; i < mesh.nodes().size(); ++i) {
    out << "node " << i;
    for (int a = 0; a < dim; ++a) out << ' ' << format_double(mesh.nodes()[i][a]);
    out << '\n';
  }
  for (std::size_t i = 0; i < mesh.cells().size(); ++i) {
    out << "cell " << i;
    for (int a = 0; a <= dim; ++a) out << ' ' << mesh.cells()[i][a];
    out << '\n';
  }
  for (const auto& f : mesh.boundary_facets()) {
    out << "facet " << boundary_tag_name(f.tag);
    for (int a = 0; a < dim; ++a) out << ' ' << f.nodes[a];
    out << '\n';
  }
  return out.str();
}

void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write mesh file '" + path + "'");
  out << format_mesh(mesh);
  if (!out) throw Error(ErrorKind::IoError, "failed writing mesh file '" + path + "'");
}

Mesh generate_rect(int nx, int ny, double lx, double ly, const RectTagging& tags) {
  if (nx < 1 || ny < 1 || !(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
    throw Error(ErrorKind::InvalidDimension, "generate_rect needs nx, ny >= 1 and lx, ly > 0");
  }
  const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };

  std::vector<Point> nodes;
  nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      nodes.push_back({lx * i / nx, ly * j / ny, 0.0});
    }
  }

  std::vector<CellNodes> cells;
  cells.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), -1});
      cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1), -1});
    }
  }

  std::vector<BoundaryFacet> facets;
  for (int i = 0; i < nx; ++i) facets.push_back({{id(i, 0), id(i + 1, 0), -1}, tags.bottom});
  for (int j = 0; j < ny; ++j) facets.push_back({{id(nx, j), id(nx, j + 1), -1}, tags.right});
  for (int i = nx; i > 0; --i) facets.push_back({{id(i, ny), id(i - 1, ny), -1}, tags.top});
  for (int j = ny; j > 0; --j) facets.push_back({{id(0, j), id(0, j - 1), -1}, tags.left});

  return Mesh(2, std::move(nodes), std::move(cells), std::move(facets));
}

DofMap build_dofmap(const Mesh& mesh) {
  DofMap map;
  const int n_nodes = static_cast<int>(mesh.node_count());
  map.dim = mesh.dim();
  map.n_u = map.dim * n_nodes;
  map.n_phi = n_nodes;

  std::vector<char> electrode(n_nodes, 0);
  std::vector<char> ground(n_nodes, 0);
  for (const auto& f : mesh.boundary_facets()) {
    for (int a = 0; a < mesh.nodes_per_facet(); ++a) {
      if (f.tag == BoundaryTag::Electrode) electrode[f.nodes[a]] = 1;
      if (f.tag == BoundaryTag::Ground) ground[f.nodes[a]] = 1;
    }
  }
  map.free_index.assign(n_nodes, -1);
  for (int n = 0; n < n_nodes; ++n) {
    if (electrode[n]) map.electrode_nodes.push_back(n);
    if (ground[n]) map.ground_nodes.push_back(n);
    if (electrode[n] || ground[n]) {
      map.constrained_phi.push_back(n);
    } else {
      map.free_index[n] = static_cast<int>(map.free_phi.size());
      map.free_phi.push_back(n);
    }
  }
  return map;
}

}  // namespace piezo
