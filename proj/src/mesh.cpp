#include "covrecon/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace covrecon {

void TriangleMesh::validate() const {
  const auto n = vertices.size();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    for (const auto v : t)
      if (v >= n) throw MeshFormatError("face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                                        " of a " + std::to_string(n) + "-vertex mesh");
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw MeshFormatError("face " + std::to_string(f) + " repeats a vertex index");
  }
}

namespace {

struct Property {
  std::string name;
  bool is_list = false;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

class Tokens {
 public:
  explicit Tokens(std::string_view s) : s_(s) {}
  std::string_view next() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ >= s_.size()) throw MeshFormatError("unexpected end of PLY body");
    const std::size_t start = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    return s_.substr(start, pos_ - start);
  }
  double real() {
    const auto t = next();
    double v = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size())
      throw MeshFormatError("bad number '" + std::string(t) + "'");
    return v;
  }
  long long integer() {
    const auto t = next();
    long long v = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size())
      throw MeshFormatError("bad integer '" + std::string(t) + "'");
    return v;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TriangleMesh parse_mesh(std::string_view text) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    if (pos >= text.size()) throw MeshFormatError("PLY header is not terminated by end_header");
    const std::size_t end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };
  if (next_line() != "ply") throw MeshFormatError("missing 'ply' magic line");
  std::vector<Element> elements;
  bool have_format = false;
  for (;;) {
    const auto words = split_words(next_line());
    if (words.empty()) continue;
    if (words[0] == "end_header") break;
    if (words[0] == "comment" || words[0] == "obj_info") continue;
    if (words[0] == "format") {
      if (words.size() != 3 || words[1] != "ascii" || words[2] != "1.0")
        throw MeshFormatError("only 'format ascii 1.0' is supported");
      have_format = true;
    } else if (words[0] == "element") {
      if (words.size() != 3) throw MeshFormatError("malformed element line");
      Element e;
      e.name = words[1];
      try {
        e.count = std::stoull(words[2]);
      } catch (const std::exception&) {
        throw MeshFormatError("malformed element count '" + words[2] + "'");
      }
      elements.push_back(e);
    } else if (words[0] == "property") {
      if (elements.empty()) throw MeshFormatError("property before any element");
      Property p;
      if (words.size() == 5 && words[1] == "list") {
        p.is_list = true;
        p.name = words[4];
      } else if (words.size() == 3) {
        p.name = words[2];
      } else {
        throw MeshFormatError("malformed property line");
      }
      elements.back().properties.push_back(p);
    } else {
      throw MeshFormatError("unknown header keyword '" + words[0] + "'");
    }
  }
  if (!have_format) throw MeshFormatError("missing format line");

  TriangleMesh mesh;
  Tokens tok(text.substr(pos));
  for (const Element& e : elements) {
    if (e.name == "vertex") {
      int ix = -1, iy = -1, iz = -1;
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const auto& n = e.properties[k].name;
        if (n == "x") ix = static_cast<int>(k);
        if (n == "y") iy = static_cast<int>(k);
        if (n == "z") iz = static_cast<int>(k);
      }
      if (ix < 0 || iy < 0 || iz < 0) throw MeshFormatError("vertex element lacks x, y, z");
      mesh.vertices.reserve(e.count);
      std::vector<double> vals(e.properties.size());
      for (std::size_t v = 0; v < e.count; ++v) {
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          if (e.properties[k].is_list) {
            const auto n = tok.integer();
            for (long long i = 0; i < n; ++i) tok.next();
          } else {
            vals[k] = tok.real();
          }
        }
        mesh.vertices.emplace_back(vals[static_cast<std::size_t>(ix)], vals[static_cast<std::size_t>(iy)],
                                   vals[static_cast<std::size_t>(iz)]);
      }
    } else if (e.name == "face") {
      for (std::size_t f = 0; f < e.count; ++f) {
        for (const Property& p : e.properties) {
          if (!p.is_list) {
            tok.next();
            continue;
          }
          const auto n = tok.integer();
          std::vector<long long> idx(static_cast<std::size_t>(std::max<long long>(n, 0)));
          for (auto& i : idx) i = tok.integer();
          if (p.name != "vertex_indices" && p.name != "vertex_index") continue;
          if (n < 3) throw MeshFormatError("face with fewer than 3 vertices");
          for (const auto i : idx)
            if (i < 0) throw MeshFormatError("negative vertex index");
          for (std::size_t k = 1; k + 1 < idx.size(); ++k)
            mesh.faces.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[k]),
                                  static_cast<std::uint32_t>(idx[k + 1])});
        }
      }
    } else {
      for (std::size_t r = 0; r < e.count; ++r)
        for (const Property& p : e.properties) {
          if (p.is_list) {
            const auto n = tok.integer();
            for (long long i = 0; i < n; ++i) tok.next();
          } else {
            tok.next();
          }
        }
    }
  }
  mesh.validate();
  return mesh;
}

std::string write_mesh(const TriangleMesh& mesh) {
  std::string out;
  out.reserve(64 + mesh.vertices.size() * 60 + mesh.faces.size() * 24);
  out += "ply\nformat ascii 1.0\n";
  out += "element vertex " + std::to_string(mesh.vertices.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  out += "element face " + std::to_string(mesh.faces.size()) + "\n";
  out += "property list uchar int vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices) {
    out += format_real(v.x());
    out += ' ';
    out += format_real(v.y());
    out += ' ';
    out += format_real(v.z());
    out += '\n';
  }
  for (const auto& f : mesh.faces) {
    out += "3 " + std::to_string(f[0]) + ' ' + std::to_string(f[1]) + ' ' + std::to_string(f[2]) + '\n';
  }
  return out;
}

TriangleMesh read_mesh_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MeshFormatError("cannot open mesh file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_mesh(ss.str());
  } catch (const MeshFormatError& e) {
    throw MeshFormatError(path.string() + ": " + e.what());
  }
}

void write_mesh_file(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write mesh file " + path.string());
  out << write_mesh(mesh);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<Vec3d> vertex_normals(const TriangleMesh& mesh) {
  std::vector<Vec3d> n(mesh.vertices.size(), Vec3d::Zero());
  for (const auto& f : mesh.faces) {
    const Vec3d& a = mesh.vertices[f[0]];
    const Vec3d& b = mesh.vertices[f[1]];
    const Vec3d& c = mesh.vertices[f[2]];
    // Cross product length is twice the area: area weighting for free.
    const Vec3d w = (b - a).cross(c - a);
    for (const auto v : f) n[v] += w;
  }
  for (auto& v : n) {
    const double len = v.norm();
    if (len > 0) v /= len;
  }
  return n;
}

void FeedbackParams::validate() const {
  if (core_points.empty()) throw std::invalid_argument("feedback: at least one core point is required");
  if (!(sigma4 > 0) || !(kappa > 0)) throw std::invalid_argument("feedback: sigma4 and kappa must be positive");
  if (!(normal_radius > 0) || !(cylinder_radius > 0))
    throw std::invalid_argument("feedback: M3C2 radii must be positive");
}

std::vector<Vec3d> grid_core_points(const Regiond& region, double spacing) {
  const Vec3d ext = region.extent();
  std::array<std::size_t, 3> n{};
  Vec3d width;
  for (int a = 0; a < 3; ++a) {
    n[static_cast<std::size_t>(a)] = axis_cell_count(ext[a], spacing);
    width[a] = ext[a] / static_cast<double>(n[static_cast<std::size_t>(a)]);
  }
  std::vector<Vec3d> out;
  out.reserve(n[0] * n[1] * n[2]);
  for (std::size_t i = 0; i < n[0]; ++i)
    for (std::size_t j = 0; j < n[1]; ++j)
      for (std::size_t k = 0; k < n[2]; ++k)
        out.emplace_back(region.min.x() + (static_cast<double>(i) + 0.5) * width.x(),
                         region.min.y() + (static_cast<double>(j) + 0.5) * width.y(),
                         region.min.z() + (static_cast<double>(k) + 0.5) * width.z());
  return out;
}

double CoreBinner::spacing_hint(std::span<const Vec3d> core_points) {
  if (core_points.size() < 2) return 1.0;
  Vec3d lo = core_points[0], hi = core_points[0];
  for (const auto& p : core_points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3d ext = hi - lo;
  // Roughly one core point per bucket, measured over the axes the points
  // actually span (a planar layout would otherwise get a near-zero volume).
  const double span = ext.maxCoeff();
  if (!(span > 0)) return 1.0;
  double vol = 1.0;
  int dims = 0;
  for (int a = 0; a < 3; ++a)
    if (ext[a] > 1e-6 * span) {
      vol *= ext[a];
      ++dims;
    }
  const double h = std::pow(vol / static_cast<double>(core_points.size()), 1.0 / dims);
  return std::max(h, 1e-3 * span);
}

CoreBinner::CoreBinner(std::span<const Vec3d> core_points) : hash_(core_points, spacing_hint(core_points)) {
  if (core_points.empty()) throw std::invalid_argument("binning requires at least one core point");
}

std::vector<int> CoreBinner::bin(std::span<const Vec3d> vertices, const Regiond& region) const {
  std::vector<int> counts(hash_.size(), 0);
  for (const auto& v : vertices) {
    if (!region_contains(region, v)) continue;
    ++counts[hash_.nearest(v).first];
  }
  return counts;
}

std::vector<int> bin_vertices(const TriangleMesh& mesh, const FeedbackParams& params, const Regiond& region) {
  return CoreBinner(params.core_points).bin(mesh.vertices, region);
}

std::vector<int> grid_delta(std::span<const int> now, std::span<const int> prev) {
  if (!prev.empty() && prev.size() != now.size()) throw std::invalid_argument("grid_delta: length mismatch");
  std::vector<int> d(now.begin(), now.end());
  if (!prev.empty())
    for (std::size_t k = 0; k < d.size(); ++k) d[k] -= prev[k];
  return d;
}

KernelWeights precompute_kernel_weights(const VirtualFieldd& field, std::span<const Vec3d> core_points,
                                        double sigma4) {
  KernelWeights kw;
  kw.angle_cells = field.angle_cells();
  const auto rows = static_cast<Eigen::Index>(field.spatial_cells());
  const auto cols = static_cast<Eigen::Index>(core_points.size());
  kw.weights.resize(rows, cols);
  const double inv = 1.0 / (2.0 * sigma4 * sigma4);
  for (Eigen::Index s = 0; s < rows; ++s) {
    const Vec3d pos = field.spatial_position(static_cast<std::size_t>(s));
    for (Eigen::Index k = 0; k < cols; ++k)
      kw.weights(s, k) = std::exp(-(pos - core_points[static_cast<std::size_t>(k)]).squaredNorm() * inv);
  }
  return kw;
}

Eigen::VectorXd spread_core_scores(const Eigen::VectorXd& scores, const KernelWeights& kw) {
  if (static_cast<std::size_t>(scores.size()) != kw.core_points())
    throw std::invalid_argument("h2: kernel weights do not match the core points");
  const Eigen::VectorXd per_position = kw.weights * scores;
  Eigen::VectorXd h2(static_cast<Eigen::Index>(kw.cells()));
  const auto a = static_cast<Eigen::Index>(kw.angle_cells);
  for (Eigen::Index s = 0; s < per_position.size(); ++s) h2.segment(s * a, a).setConstant(per_position[s]);
  return h2;
}

Eigen::VectorXd h2_grid(std::span<const int> delta, const KernelWeights& kw, double kappa) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(delta.size()));
  for (std::size_t k = 0; k < delta.size(); ++k) {
    const double r = static_cast<double>(delta[k]) / kappa;
    const double t = std::tanh(r * r);
    g[static_cast<Eigen::Index>(k)] = t * t;
  }
  return spread_core_scores(g, kw);
}

M3c2Result m3c2_distance(std::span<const Vec3d> prev, std::span<const Vec3d> now, const FeedbackParams& params) {
  if (prev.empty() || now.empty()) throw std::invalid_argument("m3c2: empty point cloud");
  const SpatialHash prev_index(prev, params.normal_radius);
  const std::size_t s = params.core_points.size();
  M3c2Result out;
  out.distance.assign(s, 0.0);
  out.valid.assign(s, false);
  const double r2 = params.cylinder_radius * params.cylinder_radius;
  std::vector<std::size_t> neighbors;
  auto cylinder_mean = [&](std::span<const Vec3d> cloud, const Vec3d& core, const Vec3d& n, double& mean) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& p : cloud) {
      const Vec3d d = p - core;
      const double along = d.dot(n);
      if ((d - along * n).squaredNorm() <= r2) {
        sum += along;
        ++count;
      }
    }
    if (count == 0) return false;
    mean = sum / static_cast<double>(count);
    return true;
  };
  for (std::size_t k = 0; k < s; ++k) {
    const Vec3d& core = params.core_points[k];
    prev_index.radius_query(core, params.normal_radius, neighbors);
    if (neighbors.size() < 3) continue;
    Vec3d centroid = Vec3d::Zero();
    for (const auto i : neighbors) centroid += prev[i];
    centroid /= static_cast<double>(neighbors.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto i : neighbors) {
      const Vec3d d = prev[i] - centroid;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    // Collinear neighbourhoods leave the normal undetermined.
    if (eig.eigenvalues()[1] <= 1e-12 * std::max(1.0, eig.eigenvalues()[2])) continue;
    const Vec3d n = eig.eigenvectors().col(0);
    double mean_prev = 0, mean_now = 0;
    if (!cylinder_mean(prev, core, n, mean_prev) || !cylinder_mean(now, core, n, mean_now)) continue;
    out.distance[k] = std::abs(mean_now - mean_prev);
    out.valid[k] = true;
  }
  return out;
}

Eigen::VectorXd h2_m3c2(std::span<const double> distance, const KernelWeights& kw) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(distance.size()));
  for (std::size_t k = 0; k < distance.size(); ++k) {
    if (!(distance[k] >= 0)) throw std::invalid_argument("h2_m3c2: distances must be nonnegative");
    g[static_cast<Eigen::Index>(k)] = distance[k];
  }
  return spread_core_scores(g, kw);
}

}  // namespace covrecon
