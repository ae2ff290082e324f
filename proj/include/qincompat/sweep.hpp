#pragma once

// Scenario sweeps over the measurement-pair parameter space, CSV emission,
// and plot-script generation.  Every row carries the exact success
// probability, its Monte Carlo estimate with standard error, the guessing
// bound, the ratio bound chi (exact and empirical), and the robustness
// where available.  Reruns with the same config and seed are byte
// identical: per-row RNG streams are derived from (seed, row index) and
// rows are written in grid order regardless of completion order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qincompat/discrim.hpp"
#include "qincompat/robustness.hpp"

namespace qincompat {

enum class Scenario { fig3_counts, fig4_theta_gamma, fig5_phi, fig6_unequal, single_point };

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::fig3_counts: return "fig3_counts";
    case Scenario::fig4_theta_gamma: return "fig4_theta_gamma";
    case Scenario::fig5_phi: return "fig5_phi";
    case Scenario::fig6_unequal: return "fig6_unequal";
    case Scenario::single_point: return "single_point";
  }
  return "single_point";
}

inline Scenario parse_scenario(const std::string& name) {
  for (Scenario s : {Scenario::fig3_counts, Scenario::fig4_theta_gamma, Scenario::fig5_phi,
                     Scenario::fig6_unequal, Scenario::single_point}) {
    if (name == scenario_name(s)) return s;
  }
  throw std::invalid_argument("unknown scenario: " + name);
}

struct SweepConfig {
  Scenario scenario = Scenario::single_point;
  std::vector<double> thetas;  // radians
  std::vector<double> gammas;
  std::vector<double> phis;  // radians
  std::vector<std::array<double, 2>> alpha_betas;
  std::uint64_t shots = 100000;
  std::uint64_t seed = 1;
  NoiseSpec noise{};
  bool run_bisection = false;
  int workers = 1;
  std::string out_path;

  void validate() const {
    if (shots < 1) throw std::invalid_argument("SweepConfig: shots must be >= 1");
    if (workers < 1) throw std::invalid_argument("SweepConfig: workers must be >= 1");
    noise.validate();
    auto need = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("SweepConfig: scenario requires ") + what);
    };
    switch (scenario) {
      case Scenario::fig3_counts:
        need(!thetas.empty(), "a theta grid");
        need(!gammas.empty(), "a gamma grid");
        break;
      case Scenario::fig4_theta_gamma:
        need(!thetas.empty(), "a theta grid");
        need(!gammas.empty(), "a gamma grid");
        break;
      case Scenario::fig5_phi:
        need(!phis.empty(), "a phi grid");
        break;
      case Scenario::fig6_unequal:
        need(!thetas.empty(), "a theta grid");
        need(!alpha_betas.empty(), "an (alpha, beta) grid");
        break;
      case Scenario::single_point:
        need(!thetas.empty(), "a theta value");
        need(!gammas.empty() || !alpha_betas.empty(), "gamma or (alpha, beta)");
        break;
    }
  }

  // Default grids sized to the published panels.
  static SweepConfig defaults_for(Scenario s) {
    SweepConfig c;
    c.scenario = s;
    const double deg = std::numbers::pi / 180.0;
    switch (s) {
      case Scenario::fig3_counts:
        c.thetas = {10.0 * deg};
        c.gammas = {1.0, 0.6};
        break;
      case Scenario::fig4_theta_gamma:
        for (int d = 5; d <= 85; d += 5) c.thetas.push_back(d * deg);
        c.gammas = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
        break;
      case Scenario::fig5_phi:
        for (int d = -90; d <= 90; d += 10) c.phis.push_back(d * deg);
        break;
      case Scenario::fig6_unequal:
        for (int d = 5; d <= 85; d += 5) c.thetas.push_back(d * deg);
        c.alpha_betas = {{0.5, 0.5}, {0.6, 0.4}, {0.7, 0.7}, {0.9, 0.5}, {0.9, 0.9}, {1.0, 0.8}};
        break;
      case Scenario::single_point:
        c.thetas = {45.0 * deg};
        c.gammas = {1.0};
        break;
    }
    return c;
  }
};

struct SweepRow {
  double theta = std::nan("");
  double gamma = std::nan("");
  double alpha = std::nan("");
  double beta = std::nan("");
  double phi = std::nan("");
  bool compatible = false;
  double p_exact = std::nan("");
  double p_hat = std::nan("");
  double p_se = std::nan("");
  double m_value = std::nan("");
  double chi_exact = std::nan("");
  double chi_hat = std::nan("");
  double chi_se = std::nan("");
  double eta_closed = std::nan("");
  double eta_bisect = std::nan("");
};

struct SweepResult {
  std::vector<std::string> csv_paths;
  std::vector<SweepRow> rows;
};

namespace detail {

inline std::string format_field(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string schema_line(const SweepConfig& cfg) {
  std::ostringstream os;
  os << "#schema=1 scenario=" << scenario_name(cfg.scenario) << " units=radians seed="
     << cfg.seed << " shots=" << cfg.shots;
  return os.str();
}

inline const char* kSweepHeader =
    "theta,gamma,alpha,beta,phi,compatible,p_exact,p_hat,p_se,m_value,chi_exact,chi_hat,"
    "chi_se,eta_closed,eta_bisect";

inline std::string row_to_csv(const SweepRow& r) {
  std::ostringstream os;
  os << format_field(r.theta) << ',' << format_field(r.gamma) << ',' << format_field(r.alpha)
     << ',' << format_field(r.beta) << ',' << format_field(r.phi) << ','
     << (r.compatible ? 1 : 0) << ',' << format_field(r.p_exact) << ','
     << format_field(r.p_hat) << ',' << format_field(r.p_se) << ','
     << format_field(r.m_value) << ',' << format_field(r.chi_exact) << ','
     << format_field(r.chi_hat) << ',' << format_field(r.chi_se) << ','
     << format_field(r.eta_closed) << ',' << format_field(r.eta_bisect);
  return os.str();
}

struct RowSpec {
  double theta = std::numbers::pi / 4;
  double alpha = 1.0;
  double beta = 1.0;
  double phi = std::nan("");  // tilted family when set
};

inline SweepRow evaluate_row(const RowSpec& spec, const SweepConfig& cfg, double m_solver,
                             std::uint64_t row_seed) {
  const PartitionedEnsemble en = PartitionedEnsemble::canonical();
  const bool tilted = !std::isnan(spec.phi);
  const auto [ma, mb] = tilted ? tilted_pair(spec.phi)
                               : symmetric_pair(spec.theta, spec.alpha, spec.beta);

  SweepRow row;
  row.theta = spec.theta;
  row.alpha = spec.alpha;
  row.beta = spec.beta;
  row.gamma = 0.5 * (spec.alpha + spec.beta);
  row.phi = spec.phi;
  row.compatible = busch_compatible(ma, mb);
  row.m_value = m_solver;

  row.p_exact = success_probability_exact(en, ma, mb);
  row.chi_exact = chi_bound(canonical_guessing_bound(), row.p_exact);

  const CountsTable counts = run_protocol(en, ma, mb, cfg.shots, cfg.noise, row_seed);
  double extra_se = 0.0;
  if (cfg.noise.jitter > 0.0) {
    // per-shot jitter: uniform half-width j contributes j^2/3 visibility
    // variance per shot, propagated through the exact slopes
    const auto [da, db] = success_probability_visibility_slopes(en, ma, mb);
    extra_se = std::sqrt((da * da + db * db) * cfg.noise.jitter * cfg.noise.jitter / 3.0 /
                         static_cast<double>(cfg.shots));
  }
  const SuccessEstimate est = estimate_from_counts(counts, en, extra_se);
  row.p_hat = est.p_hat;
  row.p_se = est.standard_error;
  if (est.p_hat > 0.0) {
    row.chi_hat = chi_bound(canonical_guessing_bound(), std::min(est.p_hat, 1.0));
    row.chi_se = canonical_guessing_bound() * est.standard_error / (est.p_hat * est.p_hat);
  }

  if (std::abs(spec.alpha - spec.beta) <= kInputTol) {
    const CanonicalPair cp = canonicalize_pair(ma, mb);
    row.eta_closed = eta_closed_form(cp.theta, cp.gamma).eta;
  }
  if (cfg.run_bisection) row.eta_bisect = eta_bisection(ma, mb).eta;
  return row;
}

inline std::string output_path(const SweepConfig& cfg, const std::string& suffix) {
  std::string base = cfg.out_path;
  if (base.empty()) {
    base = std::string("sweep_") + scenario_name(cfg.scenario) + ".csv";
  }
  if (suffix.empty()) return base;
  const std::size_t dot = base.rfind('.');
  if (dot == std::string::npos) return base + suffix;
  return base.substr(0, dot) + suffix + base.substr(dot);
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write output file: " + path);
  out << content;
  if (!out.good()) throw std::invalid_argument("failed writing output file: " + path);
}

}  // namespace detail

inline SweepResult run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  SweepResult result;

  if (cfg.scenario == Scenario::fig3_counts) {
    // counts panels: one counts CSV per gamma at the first theta
    const PartitionedEnsemble en = PartitionedEnsemble::canonical();
    const double theta = cfg.thetas.front();
    int panel = 0;
    for (double gamma : cfg.gammas) {
      const auto [ma, mb] = symmetric_pair(theta, gamma, gamma);
      const CountsTable counts =
          run_protocol(en, ma, mb, cfg.shots, cfg.noise, cfg.seed + static_cast<std::uint64_t>(panel));
      char suffix[32];
      std::snprintf(suffix, sizeof(suffix), "_gamma%.2f", gamma);
      const std::string path = detail::output_path(cfg, suffix);
      detail::write_file(path, counts.to_csv());
      result.csv_paths.push_back(path);
      ++panel;
    }
    return result;
  }

  std::vector<detail::RowSpec> specs;
  switch (cfg.scenario) {
    case Scenario::fig4_theta_gamma:
      for (double gamma : cfg.gammas) {
        for (double theta : cfg.thetas) specs.push_back({theta, gamma, gamma, std::nan("")});
      }
      break;
    case Scenario::fig5_phi:
      for (double phi : cfg.phis) specs.push_back({std::numbers::pi / 4, 1.0, 1.0, phi});
      break;
    case Scenario::fig6_unequal:
      for (const auto& ab : cfg.alpha_betas) {
        for (double theta : cfg.thetas) specs.push_back({theta, ab[0], ab[1], std::nan("")});
      }
      break;
    case Scenario::single_point: {
      const double theta = cfg.thetas.front();
      if (!cfg.alpha_betas.empty()) {
        specs.push_back({theta, cfg.alpha_betas.front()[0], cfg.alpha_betas.front()[1],
                         std::nan("")});
      } else {
        specs.push_back({theta, cfg.gammas.front(), cfg.gammas.front(), std::nan("")});
      }
      break;
    }
    case Scenario::fig3_counts: break;  // handled above
  }

  const double m_solver = guessing_bound_M(PartitionedEnsemble::canonical()).value;

  result.rows.resize(specs.size());
  const int workers = std::min<int>(cfg.workers, static_cast<int>(specs.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      result.rows[i] = detail::evaluate_row(specs[i], cfg, m_solver, cfg.seed + i);
    }
  } else {
    // deterministic: row i always uses stream seed + i, whatever the pool order
    std::vector<std::future<void>> jobs;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= specs.size()) return;
          result.rows[i] = detail::evaluate_row(specs[i], cfg, m_solver, cfg.seed + i);
        }
      }));
    }
    for (auto& j : jobs) j.get();
  }

  std::string csv = detail::schema_line(cfg) + "\n" + detail::kSweepHeader + "\n";
  for (const SweepRow& row : result.rows) csv += detail::row_to_csv(row) + "\n";
  const std::string path = detail::output_path(cfg, "");
  detail::write_file(path, csv);
  result.csv_paths.push_back(path);
  return result;
}

// Writes a standalone gnuplot script for the given sweep CSV.  The CSV's
// schema line must name the same scenario.
inline std::string emit_plot_script(const std::string& csv_path, Scenario scenario,
                                    const std::string& script_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::invalid_argument("emit_plot_script: cannot read " + csv_path);
  std::string first;
  std::getline(in, first);
  if (scenario == Scenario::fig3_counts) {
    if (first.rfind("prep_label,outcome,", 0) != 0) {
      throw std::invalid_argument("emit_plot_script: schema mismatch for counts CSV");
    }
  } else {
    if (first.rfind("#schema=1", 0) != 0 ||
        first.find(std::string("scenario=") + scenario_name(scenario)) == std::string::npos) {
      throw std::invalid_argument("emit_plot_script: schema mismatch in " + csv_path);
    }
  }

  std::ostringstream os;
  os << "# gnuplot script generated for scenario " << scenario_name(scenario) << "\n";
  os << "set datafile separator ','\n";
  os << "set datafile missing 'nan'\n";

  // column numbers in the sweep schema
  // 1 theta, 2 gamma, 5 phi, 11 chi_exact, 12 chi_hat, 13 chi_se, 14 eta_closed
  switch (scenario) {
    case Scenario::fig4_theta_gamma: {
      // one curve per gamma found in the CSV
      std::set<double> gammas;
      std::string line;
      std::getline(in, line);  // header row
      while (std::getline(in, line)) {
        const std::size_t c1 = line.find(',');
        const std::size_t c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) continue;
        gammas.insert(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
      }
      os << "set xlabel 'theta (rad)'\nset ylabel 'chi'\nset key top right\n";
      os << "chi(th,g) = (sqrt(2)+1)/(sqrt(2) + g*(cos(th)+sin(th)))\n";
      os << "set xrange [0:pi/2]\n";
      os << "plot \\\n";
      bool firstplot = true;
      for (double g : gammas) {
        char gs[32];
        std::snprintf(gs, sizeof(gs), "%.6g", g);
        if (!firstplot) os << ", \\\n";
        firstplot = false;
        os << "  chi(x," << gs << ") title 'theory gamma=" << gs << "' with lines, \\\n";
        os << "  '" << csv_path << "' every ::1 using (abs($2-" << gs
           << ")<1e-9?$1:NaN):12:13 with yerrorbars title 'MC gamma=" << gs << "'";
      }
      os << "\n";
      break;
    }
    case Scenario::fig5_phi: {
      os << "set xlabel 'phi (rad)'\nset ylabel 'chi'\nset key top right\n";
      os << "chi(phi) = (2+sqrt(2))/(3+cos(phi))\n";
      os << "etag = (2+sqrt(2))/4\n";
      os << "plot chi(x) title 'theory' with lines, \\\n";
      os << "  etag title 'robustness' with lines dashtype 2, \\\n";
      os << "  '" << csv_path
         << "' every ::1 using 5:12:13 with yerrorbars title 'MC'\n";
      break;
    }
    case Scenario::fig6_unequal: {
      os << "set xlabel 'theta (rad)'\nset ylabel 'chi'\nset key top right\n";
      os << "chi(th,g) = (sqrt(2)+1)/(sqrt(2) + g*(cos(th)+sin(th)))\n";
      os << "set xrange [0:pi/2]\n";
      // chi depends on (alpha, beta) only through the mean; plot against it
      os << "plot for [g in \"0.5 0.7 0.9\"] chi(x,real(g)) title 'theory mean '.g with lines, \\\n";
      os << "  '" << csv_path
         << "' every ::1 using 1:12:13 with yerrorbars title 'MC (all pairs)'\n";
      break;
    }
    case Scenario::fig3_counts: {
      os << "set style data histograms\nset style fill solid 0.8\n";
      os << "set ylabel 'counts (% of preparation shots)'\n";
      os << "set yrange [0:100]\n";
      os << "plot '" << csv_path
         << "' every ::1 using (100.0*$3/$4):xtic(stringcolumn(1).' '.stringcolumn(2)) "
            "title 'outcome share'\n";
      break;
    }
    case Scenario::single_point:
      throw std::invalid_argument("emit_plot_script: single_point has no plot form");
  }

  detail::write_file(script_path, os.str());
  return script_path;
}

}  // namespace qincompat
