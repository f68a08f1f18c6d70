// Experiment driver for the misspecified-LDS control library.
//
// Subcommands:
//   simulate      one closed-loop run -> trajectory.csv, events.jsonl, report.json
//   sweep         grid of runs -> results.csv (parallel cells, deterministic order)
//   lowerbound    1-D adversarial game against a controller -> game.csv, report.json
//   certificates  table of certified gain bounds -> certificates.csv
//
// Exit codes: 0 ok, 1 invariant failure, 2 config error, 3 numeric failure.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mlds/experiment.hpp"

namespace {

mlds::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mlds::ConfigError("cannot open config file: " + path);
    mlds::json j;
    in >> j;
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"misspecified linear dynamical system experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1;

    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* c = sub->add_option("--config", config_path, "JSON config file");
        if (need_config) c->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "base RNG seed (overrides config)")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--jobs", jobs, "worker threads for sweep cells");
    };

    auto* sim = app.add_subcommand("simulate", "run one closed-loop experiment");
    add_common(sim, true);

    auto* sweep = app.add_subcommand("sweep", "run a grid of experiments");
    add_common(sweep, true);

    auto* lb = app.add_subcommand("lowerbound", "run the 1-D lower-bound game");
    add_common(lb, false);
    double lb_a0 = 0.0, lb_M = 4.0, lb_gamma0 = 1.0, lb_mu = -1.0;
    int lb_T = 2000;
    std::string lb_controller = "cert_equiv";
    lb->add_option("--a0", lb_a0, "true 1-D plant coefficient");
    lb->add_option("--M", lb_M, "norm bound handed to the controller");
    lb->add_option("--gamma0", lb_gamma0, "gain level the game refutes");
    lb->add_option("--mu", lb_mu, "game aggressiveness (default: half the cap)");
    lb->add_option("--T", lb_T, "horizon");
    lb->add_option("--controller", lb_controller, "cert_equiv | adaptive | zero");

    auto* certs = app.add_subcommand("certificates", "emit the certified-bound table");
    add_common(certs, false);
    std::vector<int> cert_d{1, 2, 3};
    std::vector<double> cert_M{2.0, 4.0}, cert_L{0.5, 1.0};
    certs->add_option("--d", cert_d, "dimension grid");
    certs->add_option("--M", cert_M, "norm-bound grid");
    certs->add_option("--L", cert_L, "sigma_min grid");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed() || sweep->parsed()) {
            mlds::json j = load_json(config_path);
            mlds::ExperimentConfig cfg = mlds::parse_config(j);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            if (seed_set) cfg.seed = seed;
            if (sim->parsed()) return mlds::cmd_simulate(cfg);
            mlds::SweepAxes ax = mlds::parse_sweep_axes(j);
            if (seed_set) ax.seeds = {seed};
            return mlds::cmd_sweep(cfg, ax, jobs);
        }
        if (lb->parsed()) {
            if (lb_mu <= 0.0) lb_mu = mlds::default_mu(lb_gamma0);
            if (out_dir.empty()) out_dir = ".";
            return mlds::cmd_lowerbound(lb_a0, lb_M, lb_gamma0, lb_mu, lb_T, lb_controller,
                                        out_dir);
        }
        if (certs->parsed()) {
            if (out_dir.empty()) out_dir = ".";
            return mlds::cmd_certificates(cert_d, cert_M, cert_L, out_dir);
        }
    } catch (const mlds::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const mlds::CertifiedOverflow& e) {
        std::cerr << "numeric failure: certified overflow (log value " << e.log_value() << ")\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
