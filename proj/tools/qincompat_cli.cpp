// Command-line front end: robustness evaluation, ratio bounds, guessing
// bound, protocol simulation, scenario sweeps and plot-script generation.
//
// Exit codes: 0 success, 1 invalid input, 2 solver failure.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <string>

#include "qincompat/sweep.hpp"

namespace {

using namespace qincompat;

double to_radians(double value, bool degrees) {
  return degrees ? value * std::numbers::pi / 180.0 : value;
}

NoiseSpec parse_noise(const std::string& text, double jitter) {
  if (text == "exact") return NoiseSpec::exact(jitter);
  const std::string prefix = "diffusion:";
  if (text.rfind(prefix, 0) == 0) {
    const double width = std::stod(text.substr(prefix.size()));
    return NoiseSpec::diffusion(width, jitter);
  }
  throw std::invalid_argument("--noise must be 'exact' or 'diffusion:<width>'");
}

std::string resolve_out(const std::string& flag_value, const std::string& default_name) {
  if (!flag_value.empty()) return flag_value;
  if (const char* dir = std::getenv("QINCOMPAT_OUT_DIR")) {
    std::string d(dir);
    if (!d.empty() && d.back() != '/') d += '/';
    return d + default_name;
  }
  return default_name;
}

void print_value(const char* key, double v) { std::printf("%s = %.12g\n", key, v); }

struct PairArgs {
  double theta = std::numbers::pi / 4;
  double gamma = -1.0;
  double alpha = -1.0;
  double beta = -1.0;
  double phi = std::nan("");
  bool degrees = false;

  void add_to(CLI::App* cmd, bool with_phi = true) {
    cmd->add_option("--theta", theta, "half-angle between the measurement axes");
    cmd->add_option("--gamma", gamma, "common visibility (equal-noise pair)");
    cmd->add_option("--alpha", alpha, "visibility of the first measurement");
    cmd->add_option("--beta", beta, "visibility of the second measurement");
    if (with_phi) {
      cmd->add_option("--phi", phi,
                      "tilt angle: use the rotated projective pair instead of --theta/--gamma");
    }
    cmd->add_flag("--degrees", degrees, "interpret angles in degrees");
  }

  // Resolves the flags into a measurement pair.
  std::pair<DichotomicMeasurement, DichotomicMeasurement> make_pair() const {
    if (!std::isnan(phi)) return tilted_pair(to_radians(phi, degrees));
    double a = alpha, b = beta;
    if (gamma >= 0.0) {
      if (a >= 0.0 || b >= 0.0) {
        throw std::invalid_argument("give either --gamma or --alpha/--beta, not both");
      }
      a = b = gamma;
    }
    if (a < 0.0 || b < 0.0) {
      throw std::invalid_argument("missing visibility: give --gamma or both --alpha and --beta");
    }
    return symmetric_pair(to_radians(theta, degrees), a, b);
  }
};

int run_cli(int argc, char** argv) {
  CLI::App app{"incompatibility of dichotomic qubit measurement pairs via state "
               "discrimination with intermediate information"};
  app.require_subcommand(1);

  // robustness
  auto* rob = app.add_subcommand("robustness", "evaluate the incompatibility robustness");
  PairArgs rob_args;
  rob_args.add_to(rob);
  std::string method = "closed";
  rob->add_option("--method", method, "closed | geometric | bisect")
      ->check(CLI::IsMember({"closed", "geometric", "bisect"}));
  rob->set_config("--config");
  rob->callback([&]() {
    const auto [ma, mb] = rob_args.make_pair();
    RobustnessResult res;
    if (method == "bisect") {
      res = eta_bisection(ma, mb);
    } else {
      const CanonicalPair cp = canonicalize_pair(ma, mb);
      res = (method == "closed")
                ? eta_closed_form(cp.theta, cp.gamma)
                : eta_geometric(BlochVector{cp.gamma * std::cos(cp.theta),
                                            cp.gamma * std::sin(cp.theta), 0.0});
    }
    print_value("eta", res.eta);
    print_value("ir", ir_from_eta(res.eta));
    std::printf("method = %s\n", method.c_str());
    if (res.optimizer) print_value("noise_angle", res.optimizer->angle);
  });

  // chi
  auto* chi = app.add_subcommand("chi", "exact success probability and ratio bound");
  PairArgs chi_args;
  chi_args.add_to(chi);
  chi->set_config("--config");
  chi->callback([&]() {
    const auto [ma, mb] = chi_args.make_pair();
    const PartitionedEnsemble en = PartitionedEnsemble::canonical();
    const double p = success_probability_exact(en, ma, mb);
    const double bound = chi_bound(canonical_guessing_bound(), p);
    print_value("p_exact", p);
    print_value("chi", bound);
    std::printf("compatible = %d\n", busch_compatible(ma, mb) ? 1 : 0);
    if (std::abs(ma.visibility - mb.visibility) <= kInputTol) {
      const CanonicalPair cp = canonicalize_pair(ma, mb);
      print_value("eta_closed", eta_closed_form(cp.theta, cp.gamma).eta);
    }
  });

  // mval
  auto* mval = app.add_subcommand("mval", "guessing bound of the canonical ensemble");
  double purity = 1.0;
  mval->add_option("--purity", purity, "preparation purity in [1/2, 1]");
  mval->set_config("--config");
  mval->callback([&]() {
    const GuessingBound g = guessing_bound_M(PartitionedEnsemble::canonical(purity));
    print_value("m", g.value);
    print_value("duality_gap", g.gap);
  });

  // simulate
  auto* sim = app.add_subcommand("simulate", "run the discrimination protocol");
  PairArgs sim_args;
  sim_args.add_to(sim);
  std::uint64_t shots = 100000, seed = 1;
  std::string noise_text = "exact", out_path;
  double jitter = 0.0;
  int workers = 1;
  sim->add_option("--shots", shots, "number of protocol runs");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--noise", noise_text, "exact | diffusion:<width in radians>");
  sim->add_option("--jitter", jitter, "per-shot uniform visibility fluctuation half-width");
  sim->add_option("--workers", workers, "shards for the shot loop");
  sim->add_option("--out", out_path, "counts CSV path");
  sim->set_config("--config");
  sim->callback([&]() {
    const auto [ma, mb] = sim_args.make_pair();
    const PartitionedEnsemble en = PartitionedEnsemble::canonical();
    const NoiseSpec noise = parse_noise(noise_text, jitter);
    const CountsTable counts = run_protocol(en, ma, mb, shots, noise, seed, workers);
    const std::string path = resolve_out(out_path, "counts.csv");
    detail::write_file(path, counts.to_csv());
    const SuccessEstimate est = estimate_from_counts(counts, en);
    print_value("p_hat", est.p_hat);
    print_value("p_se", est.standard_error);
    if (est.p_hat > 0.0) {
      print_value("chi_hat", chi_bound(canonical_guessing_bound(), std::min(est.p_hat, 1.0)));
    }
    std::printf("counts_csv = %s\n", path.c_str());
  });

  // sweep
  auto* sw = app.add_subcommand("sweep", "scenario sweep producing a CSV");
  std::string scenario_text = "fig4_theta_gamma";
  std::vector<double> thetas, gammas, phis;
  double sw_alpha = -1.0, sw_beta = -1.0;
  bool sw_degrees = false, sw_bisect = false;
  std::uint64_t sw_shots = 100000, sw_seed = 1;
  std::string sw_noise = "exact", sw_out;
  double sw_jitter = 0.0;
  int sw_workers = 1;
  sw->add_option("--scenario", scenario_text,
                 "fig3_counts | fig4_theta_gamma | fig5_phi | fig6_unequal | single_point");
  sw->add_option("--theta", thetas, "theta grid")->delimiter(',');
  sw->add_option("--gamma", gammas, "gamma grid")->delimiter(',');
  sw->add_option("--phi", phis, "phi grid")->delimiter(',');
  sw->add_option("--alpha", sw_alpha, "visibility of the first measurement (with --beta)");
  sw->add_option("--beta", sw_beta, "visibility of the second measurement (with --alpha)");
  sw->add_flag("--degrees", sw_degrees, "interpret angle grids in degrees");
  sw->add_flag("--bisect", sw_bisect, "also run the bisection robustness per row");
  sw->add_option("--shots", sw_shots, "shots per grid point");
  sw->add_option("--seed", sw_seed, "base RNG seed");
  sw->add_option("--noise", sw_noise, "exact | diffusion:<width in radians>");
  sw->add_option("--jitter", sw_jitter, "per-shot visibility fluctuation half-width");
  sw->add_option("--workers", sw_workers, "worker pool size for grid points");
  sw->add_option("--out", sw_out, "output CSV path");
  sw->set_config("--config");
  sw->callback([&]() {
    SweepConfig cfg = SweepConfig::defaults_for(parse_scenario(scenario_text));
    if (!thetas.empty()) {
      cfg.thetas.clear();
      for (double t : thetas) cfg.thetas.push_back(to_radians(t, sw_degrees));
    }
    if (!gammas.empty()) cfg.gammas = gammas;
    if (!phis.empty()) {
      cfg.phis.clear();
      for (double p : phis) cfg.phis.push_back(to_radians(p, sw_degrees));
    }
    if (sw_alpha >= 0.0 || sw_beta >= 0.0) {
      if (sw_alpha < 0.0 || sw_beta < 0.0) {
        throw std::invalid_argument("give both --alpha and --beta");
      }
      cfg.alpha_betas = {{sw_alpha, sw_beta}};
    }
    cfg.shots = sw_shots;
    cfg.seed = sw_seed;
    cfg.noise = parse_noise(sw_noise, sw_jitter);
    cfg.run_bisection = sw_bisect;
    cfg.workers = sw_workers;
    cfg.out_path = resolve_out(sw_out, std::string("sweep_") + scenario_name(cfg.scenario) + ".csv");
    const SweepResult res = run_sweep(cfg);
    for (const std::string& p : res.csv_paths) std::printf("csv = %s\n", p.c_str());
    std::printf("rows = %zu\n", res.rows.size());
  });

  // plot
  auto* plot = app.add_subcommand("plot", "write a gnuplot script for a sweep CSV");
  std::string plot_scenario = "fig4_theta_gamma", plot_csv, plot_out;
  plot->add_option("--scenario", plot_scenario, "scenario the CSV was produced with")
      ->required();
  plot->add_option("--csv", plot_csv, "input CSV path")->required();
  plot->add_option("--out", plot_out, "output script path");
  plot->set_config("--config");
  plot->callback([&]() {
    const Scenario s = parse_scenario(plot_scenario);
    const std::string path =
        resolve_out(plot_out, std::string("plot_") + scenario_name(s) + ".gp");
    emit_plot_script(plot_csv, s, path);
    std::printf("script = %s\n", path.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 2;
  }
}
