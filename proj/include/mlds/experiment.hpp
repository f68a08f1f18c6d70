#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlds/adaptive.hpp"
#include "mlds/adversaries.hpp"
#include "mlds/cert_equiv.hpp"
#include "mlds/cusumano_poolla.hpp"
#include "mlds/io.hpp"
#include "mlds/metrics.hpp"
#include "mlds/random_systems.hpp"
#include "mlds/rollout.hpp"

namespace mlds {

namespace fs = std::filesystem;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SystemSpec {
    bool random = true;
    int d = 1;
    double M = 2.0;
    double L = 1.0;
    MatrixXd A, B;  // used when !random
};

struct ControllerSpec {
    std::string type = "adaptive";  // adaptive | cert_equiv | cusumano_poolla | zero | linear
    std::string variant = "standard_basis";
    std::optional<double> eps_override;
    std::optional<double> alpha_override_log;
    double initial_q = 0.0;
    double kappa = 2.0;
    double F = 1.0;
    std::size_t net_cap = 1'000'000;
    MatrixXd K;  // for type == linear
};

struct AdversarySpec {
    std::string delta_policy = "zero";  // zero | greedy_aligned | greedy_anti_k | matrix_shift
    double h = 0.0;
    MatrixXd E;
    std::string f_script = "zero";  // zero | impulse:<t>:<mag> | file:<csv> | lb_game:<a0>:<gamma0>
};

struct ExperimentConfig {
    SystemSpec system;
    ControllerSpec controller;
    AdversarySpec adversary;
    int T = 100;
    std::string out_dir = ".";
    int repetitions = 1;
    std::uint64_t seed = 0;
};

inline MatrixXd parse_matrix(const json& j) {
    int rows = static_cast<int>(j.size());
    int cols = static_cast<int>(j.at(0).size());
    MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
    return m;
}

inline ExperimentConfig parse_config(const json& j) {
    ExperimentConfig cfg;
    try {
        if (j.contains("system")) {
            const auto& s = j["system"];
            cfg.system.d = s.value("d", 1);
            cfg.system.M = s.value("M", 2.0);
            cfg.system.L = s.value("L", 1.0);
            if (s.contains("A") || s.contains("B")) {
                cfg.system.random = false;
                cfg.system.A = parse_matrix(s.at("A"));
                cfg.system.B = parse_matrix(s.at("B"));
                cfg.system.d = static_cast<int>(cfg.system.A.rows());
            }
        }
        if (j.contains("controller")) {
            const auto& c = j["controller"];
            cfg.controller.type = c.value("type", std::string("adaptive"));
            cfg.controller.variant = c.value("variant", std::string("standard_basis"));
            if (c.contains("eps_override")) cfg.controller.eps_override = c["eps_override"].get<double>();
            if (c.contains("alpha_override_log"))
                cfg.controller.alpha_override_log = c["alpha_override_log"].get<double>();
            cfg.controller.initial_q = c.value("initial_q", 0.0);
            cfg.controller.kappa = c.value("kappa", 2.0);
            cfg.controller.F = c.value("F", 1.0);
            cfg.controller.net_cap = c.value("net_cap", std::size_t{1'000'000});
            if (c.contains("K")) cfg.controller.K = parse_matrix(c["K"]);
        }
        if (j.contains("adversary")) {
            const auto& a = j["adversary"];
            cfg.adversary.delta_policy = a.value("delta_policy", std::string("zero"));
            cfg.adversary.h = a.value("h", 0.0);
            if (a.contains("E")) cfg.adversary.E = parse_matrix(a["E"]);
            cfg.adversary.f_script = a.value("f_script", std::string("zero"));
        }
        cfg.T = j.value("T", 100);
        cfg.out_dir = j.value("out", std::string("."));
        cfg.repetitions = j.value("repetitions", 1);
        cfg.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (cfg.system.M < 1.0) throw ConfigError("system.M must be >= 1");
    if (cfg.system.L <= 0.0 || cfg.system.L > 1.0) throw ConfigError("system.L must be in (0, 1]");
    if (cfg.T < 1) throw ConfigError("T must be >= 1");
    if (cfg.adversary.h < 0.0) throw ConfigError("adversary.h must be >= 0");
    return cfg;
}

inline SystemInstance make_system(const SystemSpec& spec, std::uint64_t seed) {
    if (spec.random) return random_system(spec.d, spec.M, spec.L, seed);
    SystemInstance sys;
    sys.A = spec.A;
    sys.B = spec.B;
    sys.M = spec.M;
    sys.L = spec.L;
    sys.d = spec.d;
    auto viol = validate_system(sys);
    if (!viol.empty()) {
        throw ConfigError("explicit system violates published bounds: " + viol[0].condition);
    }
    return sys;
}

inline std::unique_ptr<Controller> make_controller(const ControllerSpec& spec,
                                                   const SystemSpec& sys) {
    if (spec.type == "adaptive") {
        AdaptiveController::Options opt;
        opt.M = sys.M;
        opt.L = sys.L;
        opt.d = sys.d;
        if (spec.variant == "standard_basis") {
            opt.variant = ExplorationKind::StandardBasis;
        } else if (spec.variant == "eps_net") {
            opt.variant = ExplorationKind::EpsNetHalf;
        } else {
            throw ConfigError("unknown variant: " + spec.variant);
        }
        opt.eps_override = spec.eps_override;
        opt.alpha_override_log = spec.alpha_override_log;
        opt.initial_q = spec.initial_q;
        return std::make_unique<AdaptiveController>(opt);
    }
    if (spec.type == "cert_equiv") {
        if (sys.d != 1) throw ConfigError("cert_equiv controller requires d == 1");
        return std::make_unique<CertEquivController>(sys.M);
    }
    if (spec.type == "cusumano_poolla") {
        return std::make_unique<CusumanoPoollaController>(sys.M, spec.kappa, spec.F, sys.d, 1);
    }
    if (spec.type == "zero") return std::make_unique<ZeroController>(sys.d);
    if (spec.type == "linear") return std::make_unique<LinearController>(spec.K);
    throw ConfigError("unknown controller type: " + spec.type);
}

inline std::unique_ptr<DeltaSource> make_delta(const AdversarySpec& spec, int d) {
    DeltaPolicy pol;
    if (spec.delta_policy == "zero") pol = DeltaPolicy::Zero;
    else if (spec.delta_policy == "greedy_aligned") pol = DeltaPolicy::GreedyAligned;
    else if (spec.delta_policy == "greedy_anti_k") pol = DeltaPolicy::GreedyAntiK;
    else if (spec.delta_policy == "matrix_shift") pol = DeltaPolicy::MatrixShift;
    else throw ConfigError("unknown delta policy: " + spec.delta_policy);
    auto delta = std::make_unique<DeltaBudget>(spec.h, d, pol);
    if (pol == DeltaPolicy::MatrixShift) {
        if (spec.E.rows() != d) throw ConfigError("matrix_shift requires E of matching dimension");
        delta->set_shift(spec.E);
    }
    return delta;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep)) out.push_back(tok);
    return out;
}

inline std::unique_ptr<FScript> make_fscript(const AdversarySpec& spec, int d) {
    const std::string& f = spec.f_script;
    if (f == "zero") return std::make_unique<ZeroF>(d);
    auto parts = split(f, ':');
    if (parts[0] == "impulse") {
        if (parts.size() != 3) throw ConfigError("impulse script: impulse:<t>:<mag>");
        int t = std::stoi(parts[1]);
        double mag = std::stod(parts[2]);
        std::vector<VectorXd> vals(t + 1, VectorXd::Zero(d));
        vals[t] = mag * VectorXd::Unit(d, 0);
        return std::make_unique<ScriptedF>(d, std::move(vals));
    }
    if (parts[0] == "lb_game") {
        if (parts.size() != 3) throw ConfigError("lb_game script: lb_game:<a0>:<gamma0>");
        if (d != 1) throw ConfigError("lb_game script requires d == 1");
        double a0 = std::stod(parts[1]);
        double gamma0 = std::stod(parts[2]);
        return std::make_unique<LbGameF>(a0, gamma0, default_mu(gamma0));
    }
    if (parts[0] == "file") {
        if (parts.size() != 2) throw ConfigError("file script: file:<csv>");
        std::ifstream in(parts[1]);
        if (!in) throw ConfigError("cannot open f script file: " + parts[1]);
        std::vector<VectorXd> vals;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto cells = split(line, ',');
            if (static_cast<int>(cells.size()) != d)
                throw ConfigError("f script file: expected " + std::to_string(d) + " columns");
            VectorXd v(d);
            for (int i = 0; i < d; ++i) v(i) = std::stod(cells[i]);
            vals.push_back(v);
        }
        return std::make_unique<ScriptedF>(d, std::move(vals));
    }
    throw ConfigError("unknown f script: " + f);
}

struct RunResult {
    Trajectory traj;
    GainReport report;
    std::vector<ControllerEvent> events;
    bool numeric_failure = false;
};

/// Replays the recorded (x, u, w, f) tuples through the plant map and
/// checks the recorded successor; the per-run reconstruction invariant.
inline InvariantResult reconstruction_check(const SystemInstance& sys, const Trajectory& traj) {
    double worst = 0.0;
    for (int t = 0; t + 1 <= traj.horizon(); ++t) {
        const auto& s = traj.steps[t];
        VectorXd pred = step(sys, s.x, s.u, s.w, s.f);
        double scale = std::max(1.0, traj.steps[t + 1].x.norm());
        worst = std::max(worst, (pred - traj.steps[t + 1].x).norm() / scale);
    }
    return {"reconstruction", worst <= 1e-12, worst};
}

inline RunResult run_single(const ExperimentConfig& cfg, std::uint64_t seed_offset = 0) {
    SystemInstance sys = make_system(cfg.system, cfg.seed + seed_offset);
    auto controller = make_controller(cfg.controller, cfg.system);
    auto delta = make_delta(cfg.adversary, sys.d);
    auto f_script = make_fscript(cfg.adversary, sys.d);

    RunResult rr;
    rr.traj = rollout(sys, *controller, *delta, *f_script, cfg.T);
    rr.numeric_failure = rr.traj.aborted;

    GainReport& rep = rr.report;
    rep.realized_gain = l2_gain(rr.traj);
    if (auto gl = l2_gain_log(rr.traj)) rep.realized_gain_log = *gl;
    rep.cost_lqr = lqr_cost(rr.traj);

    if (auto* ac = dynamic_cast<AdaptiveController*>(controller.get())) {
        rep.epochs = ac->epoch();
        rep.certificate_log = gain_certificate_log(sys.M, sys.L, sys.d,
                                                   ac->exploration_set().kind)
                                  .gain_log;
        rr.events = ac->events();
        if (rep.realized_gain_log != kNegInf) {
            double margin = rep.realized_gain_log - rep.certificate_log;
            rep.invariant_results.push_back({"certified_gain_soundness", margin <= 0.0, margin});
        }
    }
    if (auto* cp = dynamic_cast<CusumanoPoollaController*>(controller.get())) {
        rep.switches = cp->switches();
        rep.certificate_log = cp_certificate_log(cfg.controller.kappa, sys.M, sys.d, 1);
    }
    auto rob = robustness_check(rr.traj, cfg.adversary.h);
    rep.invariant_results.push_back({"robustness_budget", rob.pass, rob.worst_margin});
    rep.invariant_results.push_back(reconstruction_check(sys, rr.traj));
    return rr;
}

// -- CLI command bodies. Exit codes: 0 ok, 1 invariant failure,
//    2 config error, 3 numeric failure.

inline int cmd_simulate(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    RunResult rr = run_single(cfg);

    std::ofstream tcsv(fs::path(cfg.out_dir) / "trajectory.csv");
    write_trajectory_csv(tcsv, rr.traj);
    std::ofstream ej(fs::path(cfg.out_dir) / "events.jsonl");
    write_events_jsonl(ej, rr.events);

    json rep = gain_report_json(rr.report);
    if (rr.numeric_failure) {
        rep["numeric_failure"] = true;
        rep["abort_step"] = rr.traj.abort_step;
        rep["abort_reason"] = rr.traj.abort_reason;
    }
    std::ofstream rj(fs::path(cfg.out_dir) / "report.json");
    rj << rep.dump(2) << "\n";
    std::ofstream ic(fs::path(cfg.out_dir) / "invariants.csv");
    write_invariants_csv(ic, rr.report.invariant_results);

    if (rr.numeric_failure) return 3;
    for (const auto& inv : rr.report.invariant_results)
        if (!inv.pass) return 1;
    return 0;
}

/// Grid axes for a sweep; any axis left empty falls back to the base
/// config's single value.
struct SweepAxes {
    std::vector<int> d;
    std::vector<double> M;
    std::vector<double> L;
    std::vector<double> h;
    std::vector<std::string> controller;
    std::vector<std::uint64_t> seeds;
};

inline SweepAxes parse_sweep_axes(const json& j) {
    SweepAxes ax;
    if (!j.contains("grid")) return ax;
    const auto& g = j["grid"];
    if (g.contains("d")) ax.d = g["d"].get<std::vector<int>>();
    if (g.contains("M")) ax.M = g["M"].get<std::vector<double>>();
    if (g.contains("L")) ax.L = g["L"].get<std::vector<double>>();
    if (g.contains("h")) ax.h = g["h"].get<std::vector<double>>();
    if (g.contains("controller")) ax.controller = g["controller"].get<std::vector<std::string>>();
    if (g.contains("seed")) ax.seeds = g["seed"].get<std::vector<std::uint64_t>>();
    return ax;
}

/// Cross product of the grid axes; cells run in parallel, results are
/// merged by a single writer in deterministic cell order.
inline int cmd_sweep(const ExperimentConfig& base, const SweepAxes& ax, int jobs) {
    struct Cell {
        ExperimentConfig cfg;
        std::string key;
    };
    SweepAxes grid = ax;
    if (grid.d.empty()) grid.d = {base.system.d};
    if (grid.M.empty()) grid.M = {base.system.M};
    if (grid.L.empty()) grid.L = {base.system.L};
    if (grid.h.empty()) grid.h = {base.adversary.h};
    if (grid.controller.empty()) grid.controller = {base.controller.type};
    if (grid.seeds.empty()) grid.seeds = {base.seed};
    std::vector<Cell> cells;
    for (int d : grid.d)
        for (double M : grid.M)
            for (double L : grid.L)
                for (double h : grid.h)
                    for (const auto& ctrl : grid.controller)
                        for (std::uint64_t s : grid.seeds) {
                            ExperimentConfig c = base;
                            c.system.d = d;
                            c.system.M = M;
                            c.system.L = L;
                            c.adversary.h = h;
                            c.controller.type = ctrl;
                            c.seed = s;
                            std::ostringstream key;
                            key << d << "," << fmt17(M) << "," << fmt17(L) << "," << fmt17(h)
                                << "," << ctrl << "," << s;
                            cells.push_back({std::move(c), key.str()});
                        }

    std::vector<std::string> rows(cells.size());
    std::vector<int> cell_status(cells.size(), 0);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            std::ostringstream row;
            row << cells[i].key;
            try {
                RunResult rr = run_single(cells[i].cfg);
                int inv_pass = 0, inv_total = 0;
                for (const auto& inv : rr.report.invariant_results) {
                    ++inv_total;
                    if (inv.pass) ++inv_pass;
                }
                row << "," << (rr.report.realized_gain ? fmt17(*rr.report.realized_gain)
                                                       : std::string("undefined"))
                    << "," << fmt17(rr.report.realized_gain_log) << ","
                    << fmt17(rr.report.certificate_log) << "," << rr.report.epochs << ","
                    << inv_pass << "," << inv_total << ","
                    << (rr.numeric_failure ? "numeric_failure" : "ok");
                if (inv_pass != inv_total) cell_status[i] = 1;
                if (rr.numeric_failure) cell_status[i] = 3;
            } catch (const std::exception& e) {
                row << ",,,,,0,0,error:" << e.what();
                cell_status[i] = 1;
            }
            rows[i] = row.str();
        }
    };
    std::vector<std::thread> pool;
    int n = std::max(1, jobs);
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    fs::create_directories(base.out_dir);
    std::ofstream out(fs::path(base.out_dir) / "results.csv");
    out << "d,M,L,h,controller,seed,realized_gain,realized_gain_log,certificate_log,epochs,"
           "invariants_pass,invariants_total,status\n";
    for (const auto& r : rows) out << r << "\n";

    for (int s : cell_status)
        if (s == 1) return 1;
    return 0;
}

struct LowerBoundResult {
    std::vector<NormalizedGameState> recursive;  // recursion-tracked states
    std::vector<NormalizedGameState> from_sums;  // recomputed from raw sums
    std::vector<double> nu, delta;
    bool beta_entered_I0 = false;
    double refuted_gamma = 0.0;
    std::optional<double> realized_gain;
    Trajectory traj;
};

/// Runs the 1-D normalized lower-bound game against a real controller:
/// the raw rollout is driven by the inverted normalization, and the
/// (z, beta, theta) triple is tracked both recursively and from raw sums.
inline LowerBoundResult run_lowerbound(double a0, double M, double gamma0, double mu, int T,
                                       const std::string& controller_name) {
    if (mu <= 0.0 || mu >= 1.0 / (3.0 * gamma0 * gamma0)) {
        throw ConfigError("mu must lie in (0, gamma0^{-2}/3)");
    }
    SystemInstance sys;
    sys.A = MatrixXd::Constant(1, 1, a0);
    sys.B = MatrixXd::Identity(1, 1);
    sys.M = std::max(M, std::abs(a0));
    sys.L = 1.0;
    sys.d = 1;

    std::unique_ptr<Controller> controller;
    if (controller_name == "cert_equiv") {
        controller = std::make_unique<CertEquivController>(sys.M);
    } else if (controller_name == "zero") {
        controller = std::make_unique<ZeroController>(1);
    } else if (controller_name == "adaptive") {
        AdaptiveController::Options opt;
        opt.M = sys.M;
        opt.L = sys.L;
        opt.d = 1;
        controller = std::make_unique<AdaptiveController>(opt);
    } else {
        throw ConfigError("lowerbound: unknown controller " + controller_name);
    }

    LowerBoundResult res;
    ZeroDelta delta(1);
    LbGameF game(a0, gamma0, mu);

    // Wrap the game source to capture the normalized sequence.
    struct Capture : FScript {
        LbGameF* game;
        LowerBoundResult* res;
        double a0, gamma0, mu;
        std::optional<NormalizedGameState> rec;
        VectorXd f(int t, const Trajectory& traj, const VectorXd& u_t) override {
            VectorXd out = game->f(t, traj, u_t);
            auto ys = game->last_state();
            if (ys) {
                res->from_sums.push_back(*ys);
                res->nu.push_back(game->last_nu());
                double x_t = traj.steps[t].x(0);
                double p = game->sums().p;
                res->delta.push_back((u_t(0) + ys->beta * x_t) / std::sqrt(p + x_t * x_t));
                if (!rec) {
                    rec = *ys;  // seed the recursion at t0
                } else {
                    rec = normalized_update(*rec, res->delta[res->delta.size() - 2 >= 0
                                                                ? res->delta.size() - 2
                                                                : 0],
                                            res->nu[res->nu.size() - 2 >= 0
                                                        ? res->nu.size() - 2
                                                        : 0]);
                }
                res->recursive.push_back(*rec);
            }
            return out;
        }
    } capture;
    capture.game = &game;
    capture.res = &res;
    capture.a0 = a0;
    capture.gamma0 = gamma0;
    capture.mu = mu;

    res.traj = rollout(sys, *controller, delta, capture, T);
    res.realized_gain = l2_gain(res.traj);

    double lo = a0 + (4.0 + mu) * gamma0, hi = a0 + (8.0 + 3.0 * mu) * gamma0;
    for (const auto& y : res.from_sums) {
        if (y.beta >= lo && y.beta <= hi) res.beta_entered_I0 = true;
    }
    if (res.beta_entered_I0) res.refuted_gamma = gamma0;
    return res;
}

inline int cmd_lowerbound(double a0, double M, double gamma0, double mu, int T,
                          const std::string& controller_name, const std::string& out_dir) {
    LowerBoundResult res = run_lowerbound(a0, M, gamma0, mu, T, controller_name);
    fs::create_directories(out_dir);
    std::ofstream gcsv(fs::path(out_dir) / "game.csv");
    gcsv << "i,z,beta,theta,delta,nu,z_rec,beta_rec,theta_rec\n";
    for (std::size_t i = 0; i < res.from_sums.size(); ++i) {
        gcsv << i << "," << fmt17(res.from_sums[i].z) << "," << fmt17(res.from_sums[i].beta)
             << "," << fmt17(res.from_sums[i].theta) << "," << fmt17(res.delta[i]) << ","
             << fmt17(res.nu[i]) << "," << fmt17(res.recursive[i].z) << ","
             << fmt17(res.recursive[i].beta) << "," << fmt17(res.recursive[i].theta) << "\n";
    }
    json rep;
    rep["beta_entered_I0"] = res.beta_entered_I0;
    rep["refuted_gamma"] = res.refuted_gamma;
    if (res.realized_gain) rep["realized_gain"] = *res.realized_gain;
    else rep["realized_gain"] = "undefined";
    std::ofstream rj(fs::path(out_dir) / "report.json");
    rj << rep.dump(2) << "\n";
    return res.traj.aborted ? 3 : 0;
}

inline int cmd_certificates(const std::vector<int>& d_grid, const std::vector<double>& M_grid,
                            const std::vector<double>& L_grid, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "certificates.csv");
    out << "d,M,L,variant,eps,alpha_log,gain_bound_log,gain_bound_loose_log,cp_bound_log\n";
    for (int d : d_grid) {
        for (double M : M_grid) {
            for (double L : L_grid) {
                for (const char* variant : {"standard_basis", "eps_net"}) {
                    ExplorationKind kind = std::string(variant) == "standard_basis"
                                               ? ExplorationKind::StandardBasis
                                               : ExplorationKind::EpsNetHalf;
                    if (kind == ExplorationKind::EpsNetHalf && d > 6) continue;
                    CertificateLog c = gain_certificate_log(M, L, d, kind);
                    out << d << "," << fmt17(M) << "," << fmt17(L) << "," << variant << ","
                        << fmt17(c.eps) << "," << fmt17(c.alpha_log) << ","
                        << fmt17(c.gain_log) << "," << fmt17(c.loose_gain_log) << ","
                        << fmt17(cp_certificate_log(2.0, M, d, d)) << "\n";
                }
            }
        }
    }
    return 0;
}

}  // namespace mlds
