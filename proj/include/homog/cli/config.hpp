#pragma once

#include "homog/geometry/polygon.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace homog {

// ---------------------------------------------------------------------------
// TOML subset: [table] / [a.b] headers, key = value, strings, numbers, booleans,
// (nested, multi-line) arrays and # comments. Parsed into a JSON tree.

namespace cfg {

class TomlReader {
 public:
  TomlReader(std::string text, std::string source) : s_(std::move(text)), src_(std::move(source)) {}

  nlohmann::json parse() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++i_;
        skip_inline_space();
        std::string name;
        while (!eof() && peek() != ']' && peek() != '\n') name += s_[i_++];
        if (eof() || peek() != ']') fail("unterminated table header");
        ++i_;
        table = &root;
        for (const auto& part : split_key(trim(name))) {
          auto& next = (*table)[part];
          if (next.is_null()) next = nlohmann::json::object();
          if (!next.is_object()) fail(cat("'", part, "' is not a table"));
          table = &next;
        }
        end_of_line();
        continue;
      }
      std::string key;
      while (!eof() && peek() != '=' && peek() != '\n') key += s_[i_++];
      if (eof() || peek() != '=') fail("expected key = value");
      ++i_;
      const auto parts = split_key(trim(key));
      nlohmann::json* t = table;
      for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
        auto& next = (*t)[parts[k]];
        if (next.is_null()) next = nlohmann::json::object();
        t = &next;
      }
      if (t->contains(parts.back())) fail(cat("duplicate key '", parts.back(), "'"));
      skip_inline_space();
      (*t)[parts.back()] = value();
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    const auto line = 1 + std::count(s_.begin(), s_.begin() + std::min(i_, s_.size()), '\n');
    throw Error("cli", ErrorCode::ConfigParse, cat(src_, ":", line, ": ", msg));
  }

  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return s_[i_]; }

  static std::string trim(const std::string& x) {
    const auto a = x.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    return x.substr(a, x.find_last_not_of(" \t\r") - a + 1);
  }

  std::vector<std::string> split_key(const std::string& key) const {
    std::vector<std::string> out;
    std::string cur;
    for (char c : key) {
      if (c == '.') {
        out.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    out.push_back(trim(cur));
    for (const auto& p : out)
      if (p.empty() || !std::all_of(p.begin(), p.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }))
        fail(cat("bad key '", key, "'"));
    return out;
  }

  void skip_inline_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++i_;
  }

  void skip_comment() {
    if (!eof() && peek() == '#')
      while (!eof() && peek() != '\n') ++i_;
  }

  void skip_blank_lines() {
    while (!eof()) {
      skip_inline_space();
      skip_comment();
      if (!eof() && peek() == '\n') {
        ++i_;
        continue;
      }
      break;
    }
  }

  // whitespace, comments and newlines inside arrays
  void skip_array_space() {
    while (!eof()) {
      skip_inline_space();
      skip_comment();
      if (!eof() && peek() == '\n') {
        ++i_;
        continue;
      }
      break;
    }
  }

  void end_of_line() {
    skip_inline_space();
    skip_comment();
    if (!eof() && peek() != '\n') fail(cat("unexpected '", peek(), "' after value"));
    if (!eof()) ++i_;
  }

  nlohmann::json value() {
    if (eof()) fail("missing value");
    const char c = peek();
    if (c == '"') return string_value();
    if (c == '[') return array_value();
    if (s_.compare(i_, 4, "true") == 0) {
      i_ += 4;
      return true;
    }
    if (s_.compare(i_, 5, "false") == 0) {
      i_ += 5;
      return false;
    }
    return number_value();
  }

  nlohmann::json string_value() {
    ++i_;
    std::string out;
    while (!eof() && peek() != '"') {
      if (peek() == '\n') fail("newline in string");
      char c = s_[i_++];
      if (c == '\\') {
        if (eof()) fail("unterminated escape");
        const char e = s_[i_++];
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: fail(cat("unknown escape \\", e));
        }
      } else {
        out += c;
      }
    }
    if (eof()) fail("unterminated string");
    ++i_;
    return out;
  }

  nlohmann::json array_value() {
    ++i_;
    nlohmann::json arr = nlohmann::json::array();
    skip_array_space();
    while (!eof() && peek() != ']') {
      arr.push_back(value());
      skip_array_space();
      if (!eof() && peek() == ',') {
        ++i_;
        skip_array_space();
      } else if (!eof() && peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    if (eof()) fail("unterminated array");
    ++i_;
    return arr;
  }

  nlohmann::json number_value() {
    std::size_t j = i_;
    while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '+' || s_[j] == '-' || s_[j] == '.' || s_[j] == '_')) ++j;
    std::string tok = s_.substr(i_, j - i_);
    tok.erase(std::remove(tok.begin(), tok.end(), '_'), tok.end());
    if (tok.empty()) fail("missing value");
    const bool integer = tok.find_first_of(".eE") == std::string::npos && tok != "inf" && tok != "nan";
    try {
      std::size_t used = 0;
      nlohmann::json out;
      if (integer) {
        out = std::stoll(tok, &used);
      } else {
        out = std::stod(tok, &used);
      }
      if (used != tok.size()) fail(cat("bad number '", tok, "'"));
      i_ = j;
      return out;
    } catch (const std::logic_error&) {
      fail(cat("bad value '", tok, "'"));
    }
  }

  std::string s_;
  std::string src_;
  std::size_t i_ = 0;
};

/// 17 significant digits, always with a decimal point or exponent so it reads back as a float.
inline std::string format_real(Real x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string toml_value(const nlohmann::json& v) {
  if (v.is_string()) {
    std::string out = "\"";
    for (char c : v.get<std::string>()) {
      if (c == '"' || c == '\\') out += '\\';
      if (c == '\n') {
        out += "\\n";
        continue;
      }
      if (c == '\t') {
        out += "\\t";
        continue;
      }
      out += c;
    }
    return out + "\"";
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_real(v.get<Real>());
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + toml_value(v[k]);
    return out + "]";
  }
  throw Error("cli", ErrorCode::InvalidArgument, "unsupported TOML value");
}

/// Top-level scalars first, then one [table] per object member (one level deep).
inline std::string write_toml(const nlohmann::json& root) {
  std::ostringstream os;
  for (const auto& [k, v] : root.items())
    if (!v.is_object()) os << k << " = " << toml_value(v) << '\n';
  for (const auto& [k, v] : root.items()) {
    if (!v.is_object()) continue;
    os << "\n[" << k << "]\n";
    for (const auto& [kk, vv] : v.items()) os << kk << " = " << toml_value(vv) << '\n';
  }
  return os.str();
}

}  // namespace cfg

inline nlohmann::json parse_toml(const std::string& text, const std::string& source = "<string>") {
  return cfg::TomlReader(text, source).parse();
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct TensorSpec {
  std::string preset = "identity";  // used when file is empty
  std::string file;                 // CSV `alpha,beta,i,j,y1,y2,value`
  int components = 1;
  Real scale = 1.0;
  Vec2 phase = Vec2::Zero();
  Real ellipticity = 0.0;  // claimed lower bound for file tensors (0 = accept the measured one)
};

struct ExperimentConfig {
  std::string name = "experiment";
  TensorSpec tensor;
  std::vector<Vec2> vertices{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  std::vector<std::optional<std::array<std::int64_t, 2>>> exact_normals;  // empty = classify numerically
  std::vector<Real> epsilon{1.0 / 8, 1.0 / 16, 1.0 / 32};
  std::vector<Real> eigen_epsilon;  // fixed-phase sweep for the eigenvalue expansion; empty = epsilon
  std::vector<int> modes{0};
  int cell_resolution = 64;
  int cells_per_period = 4;  // mesh h = ε / cells_per_period
  bool allow_coarse_mesh = false;
  Real strip_height_periods = 10.0;
  int strip_points_per_period = 32;
  Real eigen_tolerance = 1e-8;
  Real cluster_tolerance = 1e-6;
  Real slope_margin = 0.1;
  std::string output_dir = "out";
  unsigned seed = 12345;

  const std::vector<Real>& expansion_epsilon() const { return eigen_epsilon.empty() ? epsilon : eigen_epsilon; }
};

namespace cfg {

template <typename T>
T get(const nlohmann::json& t, const char* table, const char* key, const T& def, const std::string& src) {
  if (!t.contains(key)) return def;
  try {
    return t.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error("cli", ErrorCode::ConfigParse, cat(src, ": ", table, ".", key, " has the wrong type"));
  }
}

inline void check_sweep(const std::vector<Real>& e, const char* key, const std::string& src) {
  if (e.empty()) throw Error("cli", ErrorCode::ConfigParse, cat(src, ": ", key, " is empty"));
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (!(e[k] > 0)) throw Error("cli", ErrorCode::ConfigParse, cat(src, ": ", key, "[", k, "] = ", e[k], " is not positive"));
    if (k && !(e[k] < e[k - 1]))
      throw Error("cli", ErrorCode::ConfigParse, cat(src, ": ", key, " must be strictly decreasing"));
  }
}

}  // namespace cfg

inline void validate_config(const ExperimentConfig& c, const std::string& src = "<config>") {
  cfg::check_sweep(c.epsilon, "sweep.epsilon", src);
  if (!c.eigen_epsilon.empty()) cfg::check_sweep(c.eigen_epsilon, "sweep.eigen_epsilon", src);
  if (c.modes.empty()) throw Error("cli", ErrorCode::ConfigParse, cat(src, ": sweep.modes is empty"));
  for (int m : c.modes)
    if (m < 0 || m > 40) throw Error("cli", ErrorCode::ConfigParse, cat(src, ": mode ", m, " out of range"));
  if (c.cells_per_period < 2 || c.cells_per_period % 2)
    throw Error("cli", ErrorCode::ConfigParse, cat(src, ": mesh.cells_per_period must be even and >= 2"));
  if (c.cells_per_period < 4 && !c.allow_coarse_mesh)
    throw Error("cli", ErrorCode::ConfigParse,
                cat(src, ": mesh.cells_per_period = ", c.cells_per_period, " gives h > ε/4; set mesh.allow_coarse = true to override"));
  if (c.cell_resolution < 8 || (c.cell_resolution & (c.cell_resolution - 1)))
    throw Error("cli", ErrorCode::ConfigParse, cat(src, ": cell.resolution must be a power of two >= 8"));
  if (c.vertices.size() < 3) throw Error("cli", ErrorCode::ConfigParse, cat(src, ": domain needs at least 3 vertices"));
  if (!c.exact_normals.empty() && c.exact_normals.size() != c.vertices.size())
    throw Error("cli", ErrorCode::ConfigParse, cat(src, ": domain.exact_normals needs one entry per edge"));
  if (!(c.slope_margin >= 0 && c.slope_margin < 1))
    throw Error("cli", ErrorCode::ConfigParse, cat(src, ": tolerances.slope_margin must lie in [0, 1)"));
  if (!(c.eigen_tolerance > 0) || !(c.cluster_tolerance > 0))
    throw Error("cli", ErrorCode::ConfigParse, cat(src, ": tolerances must be positive"));
  if (c.tensor.components < 1) throw Error("cli", ErrorCode::ConfigParse, cat(src, ": tensor.components must be >= 1"));
}

inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::string& src = "<config>") {
  using cfg::get;
  ExperimentConfig c;
  const nlohmann::json empty = nlohmann::json::object();
  auto table = [&](const char* k) -> const nlohmann::json& {
    if (!j.contains(k)) return empty;
    if (!j.at(k).is_object()) throw Error("cli", ErrorCode::ConfigParse, cat(src, ": [", k, "] must be a table"));
    return j.at(k);
  };
  for (const auto& [k, v] : j.items()) {
    static const std::set<std::string> known{"name", "seed", "output_dir", "tensor", "domain", "sweep", "cell", "mesh", "strip", "tolerances"};
    if (!known.count(k)) throw Error("cli", ErrorCode::ConfigParse, cat(src, ": unknown key '", k, "'"));
  }
  c.name = get<std::string>(j, "", "name", c.name, src);
  c.seed = get<unsigned>(j, "", "seed", c.seed, src);
  c.output_dir = get<std::string>(j, "", "output_dir", c.output_dir, src);

  const auto& t = table("tensor");
  c.tensor.preset = get<std::string>(t, "tensor", "preset", c.tensor.preset, src);
  c.tensor.file = get<std::string>(t, "tensor", "file", c.tensor.file, src);
  c.tensor.components = get<int>(t, "tensor", "components", c.tensor.components, src);
  c.tensor.scale = get<Real>(t, "tensor", "scale", c.tensor.scale, src);
  c.tensor.ellipticity = get<Real>(t, "tensor", "ellipticity", c.tensor.ellipticity, src);
  const auto ph = get<std::vector<Real>>(t, "tensor", "phase", {0.0, 0.0}, src);
  if (ph.size() != 2) throw Error("cli", ErrorCode::ConfigParse, cat(src, ": tensor.phase needs two entries"));
  c.tensor.phase = Vec2(ph[0], ph[1]);

  const auto& d = table("domain");
  if (d.contains("vertices")) {
    const auto v = get<std::vector<std::vector<Real>>>(d, "domain", "vertices", {}, src);
    c.vertices.clear();
    for (const auto& p : v) {
      if (p.size() != 2) throw Error("cli", ErrorCode::ConfigParse, cat(src, ": domain.vertices entries need two coordinates"));
      c.vertices.emplace_back(p[0], p[1]);
    }
  }
  if (d.contains("exact_normals")) {
    const auto v = get<std::vector<std::vector<std::int64_t>>>(d, "domain", "exact_normals", {}, src);
    for (const auto& p : v) {
      if (p.empty()) {
        c.exact_normals.emplace_back(std::nullopt);
      } else if (p.size() == 2) {
        c.exact_normals.emplace_back(std::array<std::int64_t, 2>{p[0], p[1]});
      } else {
        throw Error("cli", ErrorCode::ConfigParse, cat(src, ": domain.exact_normals entries are [] or [p, q]"));
      }
    }
  }

  const auto& s = table("sweep");
  c.epsilon = get<std::vector<Real>>(s, "sweep", "epsilon", c.epsilon, src);
  c.eigen_epsilon = get<std::vector<Real>>(s, "sweep", "eigen_epsilon", c.eigen_epsilon, src);
  c.modes = get<std::vector<int>>(s, "sweep", "modes", c.modes, src);

  c.cell_resolution = get<int>(table("cell"), "cell", "resolution", c.cell_resolution, src);
  const auto& m = table("mesh");
  c.cells_per_period = get<int>(m, "mesh", "cells_per_period", c.cells_per_period, src);
  c.allow_coarse_mesh = get<bool>(m, "mesh", "allow_coarse", c.allow_coarse_mesh, src);
  const auto& st = table("strip");
  c.strip_height_periods = get<Real>(st, "strip", "height_periods", c.strip_height_periods, src);
  c.strip_points_per_period = get<int>(st, "strip", "points_per_period", c.strip_points_per_period, src);
  const auto& tol = table("tolerances");
  c.eigen_tolerance = get<Real>(tol, "tolerances", "eigen", c.eigen_tolerance, src);
  c.cluster_tolerance = get<Real>(tol, "tolerances", "cluster", c.cluster_tolerance, src);
  c.slope_margin = get<Real>(tol, "tolerances", "slope_margin", c.slope_margin, src);
  validate_config(c, src);
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["tensor"] = {{"preset", c.tensor.preset},
                 {"file", c.tensor.file},
                 {"components", c.tensor.components},
                 {"scale", c.tensor.scale},
                 {"phase", {c.tensor.phase.x(), c.tensor.phase.y()}},
                 {"ellipticity", c.tensor.ellipticity}};
  nlohmann::json v = nlohmann::json::array();
  for (const auto& p : c.vertices) v.push_back({p.x(), p.y()});
  j["domain"]["vertices"] = v;
  if (!c.exact_normals.empty()) {
    nlohmann::json n = nlohmann::json::array();
    for (const auto& e : c.exact_normals) n.push_back(e ? nlohmann::json{(*e)[0], (*e)[1]} : nlohmann::json::array());
    j["domain"]["exact_normals"] = n;
  }
  j["sweep"] = {{"epsilon", c.epsilon}, {"modes", c.modes}};
  if (!c.eigen_epsilon.empty()) j["sweep"]["eigen_epsilon"] = c.eigen_epsilon;
  j["cell"] = {{"resolution", c.cell_resolution}};
  j["mesh"] = {{"cells_per_period", c.cells_per_period}, {"allow_coarse", c.allow_coarse_mesh}};
  j["strip"] = {{"height_periods", c.strip_height_periods}, {"points_per_period", c.strip_points_per_period}};
  j["tolerances"] = {{"eigen", c.eigen_tolerance}, {"cluster", c.cluster_tolerance}, {"slope_margin", c.slope_margin}};
  return j;
}

inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<string>") {
  return config_from_json(parse_toml(text, source), source);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cli", ErrorCode::ConfigParse, cat("cannot open config '", path, "'"));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

inline std::string serialize_config(const ExperimentConfig& c) { return cfg::write_toml(config_to_json(c)); }

}  // namespace homog
