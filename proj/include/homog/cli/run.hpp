#pragma once

#include "homog/cli/config.hpp"
#include "homog/cli/plot.hpp"
#include "homog/expansion/reconstruct.hpp"

#include <chrono>
#include <cstdlib>
#include <future>
#include <iostream>

namespace homog {

enum class Stage { cell, tails, spectrum, expansion };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::cell: return "cell";
    case Stage::tails: return "tails";
    case Stage::spectrum: return "spectrum";
    case Stage::expansion: return "expansion";
  }
  return "?";
}

inline Stage parse_stage(const std::string& s) {
  for (Stage st : {Stage::cell, Stage::tails, Stage::spectrum, Stage::expansion})
    if (to_string(st) == s) return st;
  throw Error("cli", ErrorCode::ConfigParse, cat("unknown stage '", s, "' (cell, tails, spectrum, expansion)"));
}

inline constexpr const char* output_dir_env = "HOMOG_OUT_DIR";

struct RunOptions {
  bool strict = false;
  int jobs = 1;
  std::string out;  // overrides the environment and the config
  std::optional<Stage> only;
  std::ostream* echo = nullptr;  // mirror of the run log
};

struct RunResult {
  int exit_code = 0;
  bool all_pass = true;
  std::vector<std::string> failures;
  std::string output_dir;
  nlohmann::json summary;
};

namespace cli {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; results keep their index.
template <typename T, typename Fn>
std::vector<T> parallel_map(int n, int jobs, Fn fn) {
  std::vector<std::optional<T>> out(n);
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) out[i] = fn(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::future<void>> workers;
    for (int w = 0; w < std::min(jobs, n); ++w)
      workers.push_back(std::async(std::launch::async, [&] {
        for (int i = next++; i < n; i = next++) out[i] = fn(i);
      }));
    for (auto& f : workers) f.get();
  }
  std::vector<T> res;
  for (auto& o : out) res.push_back(std::move(*o));
  return res;
}

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json j = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

inline PeriodicTensor build_tensor(const TensorSpec& t) {
  PeriodicTensor a;
  if (!t.file.empty()) {
    a = read_tensor_csv(t.file, t.ellipticity);
    if (t.scale != 1.0) a = a.scaled(t.scale);
  } else {
    a = presets::by_name(t.preset, t.components, t.scale);
  }
  if (t.phase != Vec2::Zero()) a = a.shifted(t.phase);
  return a;
}

inline PolygonDomain build_domain(const ExperimentConfig& c) {
  std::vector<std::optional<std::array<std::int64_t, 2>>> exact = c.exact_normals;
  return PolygonDomain::build(c.vertices, exact);
}

class Logger {
 public:
  Logger(const std::string& path, std::ostream* echo) : out_(io::open_output(path)), echo_(echo) {}
  template <typename... Args>
  void operator()(const Args&... args) {
    const std::string s = cat(args...);
    out_ << s << '\n';
    out_.flush();
    if (echo_) *echo_ << s << '\n';
  }

 private:
  std::ofstream out_;
  std::ostream* echo_;
};

}  // namespace cli

/// Full pipeline for one configuration. Hard errors propagate as homog::Error.
inline RunResult run_experiment(const ExperimentConfig& c, const RunOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  RunResult res;
  const char* env = std::getenv(output_dir_env);
  res.output_dir = !opt.out.empty() ? opt.out : (env && *env ? std::string(env) : c.output_dir);
  namespace fs = std::filesystem;
  const fs::path out(res.output_dir);
  fs::create_directories(out / "reports");
  fs::create_directories(out / "plots");
  cli::Logger log((out / "run.log").string(), opt.echo);
  auto want = [&](Stage s) { return !opt.only || *opt.only == s; };
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t_start).count(); };

  nlohmann::json summary;
  summary["name"] = c.name;
  summary["config"] = config_to_json(c);
  nlohmann::json reports = nlohmann::json::array();
  auto record = [&](const ConvergenceReport& r) {
    write_report_csv((out / "reports" / (plot::sanitize(r.quantity) + ".csv")).string(), r);
    write_report_json((out / "reports" / (plot::sanitize(r.quantity) + ".json")).string(), r);
    emit_plotdata(r, (out / "plots").string());
    reports.push_back(expansion::to_json(r));
    log("  ", r.quantity, ": slope ", r.fitted ? brief(r.slope) : std::string(r.at_floor ? "at floor" : "not fitted"),
        " (claimed ", brief(r.claimed), ", floor ", brief(r.floor), ") ", r.pass ? "PASS" : "FAIL");
    if (!r.pass) res.failures.push_back(r.quantity);
  };
  auto flag = [&](const std::string& what, bool ok, const std::string& detail) {
    log("  ", what, ": ", detail, " ", ok ? "PASS" : "FAIL");
    summary["checks"][what] = {{"pass", ok}, {"detail", detail}};
    if (!ok) res.failures.push_back(what);
  };

  log("run ", c.name, " -> ", res.output_dir);
  const PeriodicTensor a = cli::build_tensor(c.tensor);
  const PolygonDomain domain = cli::build_domain(c);
  const int nc = a.n_components();
  summary["tensor"] = {{"name", a.name()}, {"components", nc}, {"constant", a.is_constant()}};

  // cell stage (spectral correctors and the lattice-consistent A⁰_h)
  CellSolverOptions co;
  co.resolution = c.cell_resolution;
  const auto cc = compute_cell_correctors(a, co, {true, false, true});
  const auto problem = ExpansionProblem::make(a, domain, c.cells_per_period);
  if (want(Stage::cell)) {
    log("[cell] resolution ", c.cell_resolution, ", components ", nc);
    nlohmann::json cell;
    cell["homogenized"] = cli::matrix_json(cc.homogenized.matrix());
    cell["homogenized_lattice"] = cli::matrix_json(problem.lattice.homogenized.matrix());
    cell["chi_max"] = std::max(cc.chi[0].max_abs(), cc.chi[1].max_abs());
    Real gmax = 0;
    for (const auto& g : cc.second) gmax = std::max(gmax, g.max_abs());
    cell["gamma_max"] = gmax;
    cell["chi_residual"] = {cc.chi_stats[0].relative_residual, cc.chi_stats[1].relative_residual};
    cell["chi_iterations"] = {cc.chi_stats[0].iterations, cc.chi_stats[1].iterations};
    summary["cell"] = cell;
    auto f = io::open_output((out / "cell_summary.json").string());
    f << cell.dump(2) << '\n';
    log("  A0 = ", cc.homogenized.matrix().format(Eigen::IOFormat(10, 0, ", ", "; ", "", "", "[", "]")));
  }

  // tails at every ε of the expansion sweep (the lattice phase depends on ε)
  TailSetOptions to;
  to.strip.height_periods = c.strip_height_periods;
  to.strip.points_per_period = c.strip_points_per_period;
  to.strip.min_points_per_period = std::min(to.strip.min_points_per_period, c.strip_points_per_period);
  if (want(Stage::tails)) {
    log("[tails] ", domain.edges().size(), " edges");
    const auto& eps = c.expansion_epsilon();
    const auto sets = cli::parallel_map<BoundaryLayerTailSet>(static_cast<int>(eps.size()), opt.jobs,
                                                              [&](int i) { return compute_tails(a, cc.chi, domain, eps[i], to); });
    nlohmann::json tj = nlohmann::json::array();
    for (std::size_t i = 0; i < eps.size(); ++i) {
      nlohmann::json row;
      row["epsilon"] = eps[i];
      for (const auto& [k, et] : sets[i].edges) {
        nlohmann::json e;
        e["edge"] = k;
        e["normal"] = {et.normal.x(), et.normal.y()};
        e["kind"] = std::string(to_string(et.kind));
        e["method"] = et.method;
        e["tail"] = {cli::matrix_json(et.tail[0]), cli::matrix_json(et.tail[1])};
        if (et.method == "strip-rational") {
          e["rate"] = {et.fit[0].rate, et.fit[1].rate};
          e["decays"] = et.fit[0].decays && et.fit[1].decays;
          if (i == 0)
            for (int al = 0; al < 2; ++al)
              write_decay_csv((out / cat("decay_edge", k, "_alpha", al + 1, ".csv")).string(), et.fit[al]);
        } else {
          e["differences"] = et.diophantine->differences;
        }
        row["edges"].push_back(e);
      }
      tj.push_back(row);
    }
    summary["tails"] = tj;
    auto f = io::open_output((out / "tails.json").string());
    f << tj.dump(2) << '\n';
    log("  done at ", brief(elapsed(), 3), " s");
  }

  EigenOptions eo;
  eo.tolerance = c.eigen_tolerance;
  eo.seed = c.seed;
  const int top_mode = *std::max_element(c.modes.begin(), c.modes.end());

  if (want(Stage::spectrum)) {
    log("[spectrum] modes up to ", top_mode, " over ", c.epsilon.size(), " values of epsilon");
    struct Row {
      Eigenpairs osc, hom;
    };
    const auto rows = cli::parallel_map<Row>(static_cast<int>(c.epsilon.size()), opt.jobs, [&](int i) {
      auto mesh = std::make_shared<const Mesh>(triangulate(domain, problem.mesh_size(c.epsilon[i])));
      const int count = std::min(top_mode + 1, static_cast<int>(mesh->num_nodes()) * nc);
      return Row{solve_eigenpairs(assemble_oscillating(mesh, a, c.epsilon[i]), count, eo),
                 solve_eigenpairs(assemble_constant(mesh, problem.lattice.homogenized), count, eo)};
    });
    std::vector<std::pair<Real, Eigenpairs>> osc, hom;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      osc.emplace_back(c.epsilon[i], rows[i].osc);
      hom.emplace_back(c.epsilon[i], rows[i].hom);
    }
    write_spectrum_csv((out / "spectrum.csv").string(), osc);
    write_spectrum_csv((out / "spectrum_homogenized.csv").string(), hom);
    for (int k : c.modes) {
      std::vector<std::pair<Real, Real>> r;
      for (std::size_t i = 0; i < rows.size(); ++i)
        r.emplace_back(c.epsilon[i], std::abs(rows[i].osc.values[k] - rows[i].hom.values[k]));
      record(make_report(cat("eigenvalue_error_mode", k), r, 1.0, ReportOptions{c.slope_margin}));
    }
    log("  done at ", brief(elapsed(), 3), " s");
  }

  if (want(Stage::expansion)) {
    log("[expansion]");
    const NodalFunction one = [nc](const Vec2&, Eigen::Ref<Vector> o) { o.setConstant(1.0); };
    CorrectorStudyOptions so;
    so.homogenized.floor_margin = c.slope_margin;
    so.l2.floor_margin = c.slope_margin;
    const auto rows = cli::parallel_map<CorrectorStudyRow>(static_cast<int>(c.epsilon.size()), opt.jobs,
                                                           [&](int i) { return corrector_error_row(problem, one, c.epsilon[i], so); });
    {
      std::vector<std::pair<Real, Real>> ra, rb, rc;
      for (const auto& r : rows) {
        ra.emplace_back(r.eps, r.homogenized_l2);
        rb.emplace_back(r.eps, r.reconstruction_h1);
        rc.emplace_back(r.eps, r.reconstruction_l2);
      }
      record(make_report("homogenized_l2_error", ra, 0.5, so.homogenized));
      record(make_report("reconstruction_h1_error", rb, 1.0, so.h1));
      record(make_report("reconstruction_l2_error", rc, 1.0, so.l2));
    }

    const auto& eps = c.expansion_epsilon();
    nlohmann::json ej = nlohmann::json::array();
    for (int k : c.modes) {
      EigenExpansionOptions xo;
      xo.mode = k;
      xo.eigen = eo;
      xo.cluster_tol = c.cluster_tolerance;
      xo.tails = to;
      auto erows = cli::parallel_map<EigenExpansionRow>(static_cast<int>(eps.size()), opt.jobs,
                                                        [&](int i) { return eigen_expansion_row(problem, eps[i], xo); });
      StudyFloors fl;
      fl.zeroth.floor_margin = c.slope_margin;
      const auto st = summarize_eigen_expansion(k, std::move(erows), fl);
      record(st.zeroth);
      record(st.first);
      flag(cat("first_order_dominates_mode", k), st.first_dominates,
           st.first.fitted ? cat("first ", brief(st.first.slope), " vs zeroth ", brief(st.zeroth.slope)) : "at floor");
      const Real growth = osborn_growth(st.result);
      flag(cat("osborn_bounded_mode", k), growth <= 3.0, cat("max consecutive ratio change ", brief(growth)));
      nlohmann::json m;
      m["mode"] = k;
      m["multiplicity"] = st.result.multiplicity;
      for (const auto& r : st.result.rows)
        m["rows"].push_back({{"epsilon", r.eps},
                             {"lambda0", r.lambda0},
                             {"lambda_eps", std::vector<Real>(r.lambda_eps.data(), r.lambda_eps.data() + r.lambda_eps.size())},
                             {"harmonic_mean", r.harmonic_mean},
                             {"corrections", std::vector<Real>(r.corrections.data(), r.corrections.data() + r.corrections.size())},
                             {"first_order", r.first_order},
                             {"zeroth_residual", r.zeroth_residual},
                             {"first_residual", r.first_residual},
                             {"osborn", {{"lhs", r.osborn.lhs}, {"rhs_norm", r.osborn.rhs_norm}, {"ratio", r.osborn.ratio}}}});
      ej.push_back(m);
    }
    summary["eigen_expansion"] = ej;

    // χ term against the lowest homogenized eigenvector on the finest expansion mesh
    {
      auto mesh = std::make_shared<const Mesh>(triangulate(domain, problem.mesh_size(eps.back())));
      const auto s0 = assemble_constant(mesh, problem.lattice.homogenized);
      const auto ep = solve_eigenpairs(s0, 1, eo);
      const Vector v = s0.extend(ep.vectors.col(0));
      ReportOptions ro;
      ro.floor_margin = c.slope_margin;
      record(chi_term_decay(cc.chi, *mesh, nc, expansion::p1_sampler(*mesh, v, nc), eps, ro));
    }

    // tail-subtracted layer profile with a unit gradient probe
    const bool rational = std::all_of(domain.classification().begin(), domain.classification().end(),
                                      [](const SlopeClass& s) { return s.kind == SlopeKind::Rational; });
    if (rational) {
      LayerDecayOptions lo;
      lo.strip = to.strip;
      lo.report.floor_margin = c.slope_margin;
      const auto grad = [nc](const Vec2&, Matrix& g) { g.setOnes(nc, 2); };
      record(layer_decay_study(a, cc.chi, domain, grad, c.epsilon, lo));
    } else {
      log("  layer_deviation_l2: skipped (domain has non-rational edges)");
    }
    log("  done at ", brief(elapsed(), 3), " s");
  }

  summary["reports"] = reports;
  res.all_pass = res.failures.empty();
  summary["pass"] = res.all_pass;
  summary["failures"] = res.failures;
  res.summary = summary;
  auto f = io::open_output((out / "summary.json").string());
  f << summary.dump(2) << '\n';
  res.exit_code = (opt.strict && !res.all_pass) ? 1 : 0;
  log(res.all_pass ? "all checks pass" : cat(res.failures.size(), " check(s) failed"), " (", brief(elapsed(), 3), " s)");
  return res;
}

/// Loads and runs a configuration file; errors are reported with module-qualified codes.
inline int run_config_file(const std::string& path, const RunOptions& opt, std::ostream& err = std::cerr) {
  try {
    const auto c = load_config(path);
    return run_experiment(c, opt).exit_code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace homog
