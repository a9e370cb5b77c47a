#pragma once

#include "homog/fem/mesh.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <optional>

namespace homog {

namespace io {

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", ErrorCode::InvalidArgument, cat("cannot write ", path));
  out << std::setprecision(17);
  return out;
}

}  // namespace io

/// Bucketed point location over a triangulation.
class TriangleLocator {
 public:
  explicit TriangleLocator(const Mesh& mesh, int buckets = 0) : mesh_(mesh) {
    lo_ = hi_ = mesh.nodes.empty() ? Vec2::Zero() : mesh.nodes[0];
    for (const auto& p : mesh.nodes) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    nb_ = buckets > 0 ? buckets : std::max(1, static_cast<int>(std::sqrt(mesh.num_triangles() / 2.0)));
    cells_.assign(static_cast<std::size_t>(nb_) * nb_, {});
    for (int e = 0; e < mesh.num_triangles(); ++e) {
      Vec2 a = mesh.nodes[mesh.triangles[e][0]], b = a;
      for (int v : mesh.triangles[e]) {
        a = a.cwiseMin(mesh.nodes[v]);
        b = b.cwiseMax(mesh.nodes[v]);
      }
      const auto [i0, j0] = bucket(a);
      const auto [i1, j1] = bucket(b);
      for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j) cells_[i * nb_ + j].push_back(e);
    }
  }

  /// Triangle containing x with its barycentric coordinates, if any.
  std::optional<std::pair<int, Eigen::Vector3d>> locate(const Vec2& x, Real tol = 1e-12) const {
    const auto [i, j] = bucket(x);
    for (int e : cells_[i * nb_ + j]) {
      const auto& tr = mesh_.triangles[e];
      const Vec2 &p0 = mesh_.nodes[tr[0]], &p1 = mesh_.nodes[tr[1]], &p2 = mesh_.nodes[tr[2]];
      Mat2 j2;
      j2 << p1 - p0, p2 - p0;
      const Vec2 st = j2.partialPivLu().solve(x - p0);
      const Eigen::Vector3d bary(1 - st.x() - st.y(), st.x(), st.y());
      if (bary.minCoeff() >= -tol) return std::make_pair(e, bary);
    }
    return std::nullopt;
  }

 private:
  std::pair<int, int> bucket(const Vec2& x) const {
    const Vec2 span = (hi_ - lo_).cwiseMax(1e-300);
    auto idx = [this](Real t) { return std::clamp(static_cast<int>(std::floor(t * nb_)), 0, nb_ - 1); };
    return {idx((x.x() - lo_.x()) / span.x()), idx((x.y() - lo_.y()) / span.y())};
  }

  const Mesh& mesh_;
  Vec2 lo_, hi_;
  int nb_ = 1;
  std::vector<std::vector<int>> cells_;
};

/// CSV `node_id,x,y,component,value` (components 1-based).
inline void write_field_csv(const std::string& path, const Mesh& mesh, const Vector& u, int nc = 1) {
  auto out = io::open_output(path);
  out << "node_id,x,y,component,value\n";
  for (int v = 0; v < mesh.num_nodes(); ++v)
    for (int i = 0; i < nc; ++i)
      out << v << ',' << mesh.nodes[v].x() << ',' << mesh.nodes[v].y() << ',' << i + 1 << ',' << u[v * nc + i] << '\n';
}

/// Field resampled on a uniform grid over the bounding box; points outside the mesh are null.
inline nlohmann::json resample_json(const Mesh& mesh, const Vector& u, int nc, int grid) {
  Vec2 lo = mesh.nodes[0], hi = mesh.nodes[0];
  for (const auto& p : mesh.nodes) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  TriangleLocator loc(mesh);
  nlohmann::json j;
  j["x0"] = lo.x();
  j["y0"] = lo.y();
  j["x1"] = hi.x();
  j["y1"] = hi.y();
  j["nx"] = grid;
  j["ny"] = grid;
  j["components"] = nc;
  nlohmann::json comps = nlohmann::json::array();
  for (int i = 0; i < nc; ++i) {
    nlohmann::json rows = nlohmann::json::array();
    for (int b = 0; b < grid; ++b) {
      nlohmann::json row = nlohmann::json::array();
      for (int a = 0; a < grid; ++a) {
        const Vec2 x(lo.x() + (hi.x() - lo.x()) * a / std::max(1, grid - 1),
                     lo.y() + (hi.y() - lo.y()) * b / std::max(1, grid - 1));
        if (auto hit = loc.locate(x, 1e-9)) {
          const auto& tr = mesh.triangles[hit->first];
          Real val = 0;
          for (int k = 0; k < 3; ++k) val += hit->second[k] * u[tr[k] * nc + i];
          row.push_back(val);
        } else {
          row.push_back(nullptr);
        }
      }
      rows.push_back(row);
    }
    comps.push_back(rows);
  }
  j["values"] = comps;
  return j;
}

}  // namespace homog
