// Command-line front end: single solves, phase sweeps, HiRIP estimates and
// heatmaps.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hihtp/hihtp.hpp"

namespace fs = std::filesystem;
using namespace hihtp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

fs::path output_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("PHASE_OUT_DIR"); env && *env) return env;
    return ".";
}

// "1,2,3" or "from:to[:step]" (inclusive).
std::vector<index_t> parse_int_list(const std::string& text) {
    std::vector<index_t> out;
    if (text.find(':') != std::string::npos) {
        std::vector<index_t> parts;
        std::size_t start = 0;
        while (true) {
            const auto end = text.find(':', start);
            parts.push_back(std::stoll(text.substr(start, end - start)));
            if (end == std::string::npos) break;
            start = end + 1;
        }
        require(parts.size() == 2 || parts.size() == 3, "range must be from:to or from:to:step");
        const index_t step = parts.size() == 3 ? parts[2] : 1;
        require(step >= 1, "range step must be positive");
        for (index_t v = parts[0]; v <= parts[1]; v += step) out.push_back(v);
        return out;
    }
    for (const auto& f : split_csv_line(text)) out.push_back(std::stoll(f));
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot write " + path.string());
    f << text;
}

struct SolveArgs {
    std::optional<index_t> n, mu, s, sigma;
    index_t M{1}, N{1}, S{1};
    std::uint64_t seed{0};
    std::string instance;
    std::string save_instance;
    std::string out;
    int max_iters{10};
    double step_size{1.0};
    double success_tol{1e-4};
};

int cmd_solve(const SolveArgs& a) {
    SolverConfig cfg;
    cfg.max_iters = a.max_iters;
    cfg.step_size = a.step_size;
    const fs::path dir = output_dir(a.out);
    json report;

    if (!a.instance.empty()) {
        std::ifstream in(a.instance);
        require(in.good(), "cannot read instance " + a.instance);
        json inst;
        in >> inst;
        const auto levels = levels_from_json(inst.at("levels"));
        const auto yv = inst.at("y").get<std::vector<double>>();
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<index_t>(yv.size()));
        std::optional<BlockVector> truth;
        if (inst.contains("truth")) truth = block_vector_from_json(inst.at("truth"));
        const auto& opj = inst.at("operator");
        auto finish = [&](const SolveReport& r, auto const& op) {
            report["solve"] = to_json(r);
            const double rel_res = y.norm() > 0 ? (y - op.apply(r.estimate.data)).norm() / y.norm() : 0.0;
            report["relative_residual"] = rel_res;
            bool ok = rel_res <= a.success_tol;
            if (truth) {
                const double err = relative_error(r.estimate.data, *truth);
                report["rel_error"] = err;
                ok = err <= a.success_tol;
            }
            return ok;
        };
        bool ok = false;
        if (opj.at("type") == "demix") {
            const auto op = demix_from_json(opj);
            ok = finish(hihtp_solve(y, op, levels, cfg), op);
        } else {
            const auto op = blind_conv_from_json(opj);
            const auto r = hihtp_solve(y, op, levels, cfg);
            ok = finish(r, op);
            if (!r.estimate.data.is_zero()) {
                const auto f = rank_one_factor(r.estimate.data);
                report["factors"] = json{{"h", f.h}, {"b", f.b}, {"ambiguous", f.ambiguous}};
            }
        }
        report["success"] = ok;
        write_file(dir / "solve_report.json", report.dump(2) + "\n");
        std::cout << (ok ? "success" : "failure") << "\n";
        return ok ? kExitOk : kExitFailure;
    }

    require(a.n && a.mu && a.s && a.sigma, "solve needs --n, --mu, --s and --sigma (or --instance)");
    const CellParams cell{a.M, a.N, a.S, *a.n, *a.sigma, *a.s, *a.mu};
    const bool demix = a.M > 1 || a.N > 1 || a.S > 1;
    EnsembleSpec spec{*a.mu, *a.n, *a.n, a.N, a.M, *a.s, *a.sigma, a.S, a.seed, CodebookKind::identity};
    spec.validate();
    const auto seed = trial_seed(a.seed, cell, 0);
    report["ensemble"] = to_json(spec);
    report["trial_seed"] = seed;

    if (cell.preempted()) {
        report["preempted"] = true;
        report["success"] = false;
        write_file(dir / "solve_report.json", report.dump(2) + "\n");
        std::cout << "failure (preempted: fewer measurements than unknowns on the support)\n";
        return kExitFailure;
    }

    bool ok = false;
    if (demix) {
        const auto inst = make_demix_instance(cell, MixingModel::gaussian, seed);
        const SparsityLevels levels{cell.s, cell.sigma, cell.S};
        const auto r = hihtp_solve(inst.y, inst.op, levels, cfg);
        const double err = relative_error(r.estimate.data, inst.truth);
        ok = err <= a.success_tol;
        report["solve"] = to_json(r);
        report["rel_error"] = err;
        report["active_users"] = inst.active;
        if (!a.save_instance.empty())
            write_file(a.save_instance, json{{"operator", to_json(inst.op)}, {"levels", to_json(levels)},
                                             {"y", std::vector<double>(inst.y.data(), inst.y.data() + inst.y.size())},
                                             {"truth", to_json(inst.truth)}}
                                            .dump() + "\n");
    } else {
        const auto inst = make_instance(cell.n, cell.mu, cell.s, cell.sigma, seed);
        const SparsityLevels levels{cell.s, cell.sigma, std::nullopt};
        const auto r = hihtp_solve(inst.y, inst.op, levels, cfg);
        const double err = relative_error(r.estimate.data, inst.truth);
        ok = err <= a.success_tol;
        report["solve"] = to_json(r);
        report["rel_error"] = err;
        if (!r.estimate.data.is_zero()) {
            const auto f = rank_one_factor(r.estimate.data);
            report["factors"] = json{{"h", f.h}, {"b", f.b}, {"singular_value", f.singular_value},
                                     {"ambiguous", f.ambiguous}};
        }
        if (!a.save_instance.empty())
            write_file(a.save_instance, json{{"operator", to_json(inst.op)}, {"levels", to_json(levels)},
                                             {"y", std::vector<double>(inst.y.data(), inst.y.data() + inst.y.size())},
                                             {"truth", to_json(inst.truth)}}
                                            .dump() + "\n");
    }
    report["preempted"] = false;
    report["success"] = ok;
    write_file(dir / "solve_report.json", report.dump(2) + "\n");
    std::cout << (ok ? "success" : "failure") << " (rel_error " << report["rel_error"].get<double>() << ")\n";
    return ok ? kExitOk : kExitFailure;
}

struct SweepArgs {
    std::string config;
    std::string n, sigma, s, mu, M, N, S;
    std::string mixing;
    std::optional<index_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_iters;
    unsigned jobs{0};
    std::string out;
    bool no_resume{false};
};

void apply_overrides(PhaseGrid& g, const SweepArgs& a) {
    if (!a.n.empty()) g.n_values = parse_int_list(a.n);
    if (!a.sigma.empty()) g.sigma_values = parse_int_list(a.sigma);
    if (!a.s.empty()) g.s_values = parse_int_list(a.s);
    if (!a.mu.empty()) g.mu_values = parse_int_list(a.mu);
    if (a.trials) g.trials_per_cell = *a.trials;
    if (a.seed) g.base_seed = *a.seed;
    if (a.max_iters) g.solver.max_iters = *a.max_iters;
}

SweepConfig sweep_from_args(const SweepArgs& a, bool demix) {
    SweepConfig cfg;
    if (!a.config.empty()) {
        cfg = load_sweep_config(a.config);
    } else {
        cfg.name = demix ? "demix" : "phase";
        if (demix)
            cfg.demix_grids.emplace_back();
        else
            cfg.grids.emplace_back();
    }
    if (demix) {
        require(cfg.grids.empty(), "config describes a single-user sweep; use the phase subcommand");
        if (!a.mixing.empty()) {
            require(a.mixing == "gaussian" || a.mixing == "identity", "--mixing must be gaussian or identity");
            cfg.mixing = a.mixing == "identity" ? MixingModel::identity : MixingModel::gaussian;
        }
        for (auto& g : cfg.demix_grids) {
            apply_overrides(g.base, a);
            if (!a.M.empty()) g.M_values = parse_int_list(a.M);
            if (!a.N.empty()) g.N_values = parse_int_list(a.N);
            if (!a.S.empty()) g.S_values = parse_int_list(a.S);
            g.mixing = cfg.mixing;
        }
        require(!cfg.demix_grids.empty(), "empty grid");
    } else {
        require(cfg.demix_grids.empty(), "config describes a demixing sweep; use the demix-phase subcommand");
        for (auto& g : cfg.grids) apply_overrides(g, a);
        require(!cfg.grids.empty(), "empty grid");
    }
    return cfg;
}

void print_boundary(const PhaseTable& table) {
    for (const auto& b : fit_phase_boundary(table, 0.5)) {
        std::cout << "boundary n=" << b.group.n << " sigma=" << b.group.sigma;
        if (b.group.N > 1 || b.group.M > 1) std::cout << " M=" << b.group.M << " N=" << b.group.N << " S=" << b.group.S;
        std::cout << ":";
        for (const auto& p : b.points) {
            std::cout << " s=" << p.s << "->";
            if (p.mu_at_level)
                std::cout << *p.mu_at_level;
            else
                std::cout << "undefined";
        }
        if (b.slope) std::cout << " slope=" << *b.slope;
        std::cout << "\n";
    }
}

int cmd_sweep(const SweepArgs& a, bool demix) {
    const auto cfg = sweep_from_args(a, demix);
    const fs::path dir = output_dir(a.out);
    RunOptions opts;
    opts.jobs = a.jobs;
    opts.resume = !a.no_resume;
    opts.raw_path = dir / (cfg.name + "_raw.csv");
    const auto kind = demix ? TableKind::demix : TableKind::single;
    const auto table = demix ? run_demix_phase(cfg.demix_grids, opts) : run_phase(cfg.grids, opts);
    const auto agg_path = dir / (cfg.name + "_aggregate.csv");
    write_file(agg_path, format_aggregate(table, kind));
    std::cout << "wrote " << table.cells.size() << " cells to " << agg_path.string() << "\n";
    print_boundary(table);
    return kExitOk;
}

struct HiripArgs {
    index_t n{16}, mu{64}, s{2}, sigma{2};
    index_t M{1}, N{1}, S{1};
    index_t trials{10000};
    std::uint64_t seed{0};
};

int cmd_hirip(const HiripArgs& a) {
    const bool demix = a.M > 1 || a.N > 1 || a.S > 1;
    RipEstimate est;
    if (demix) {
        const CellParams cell{a.M, a.N, a.S, a.n, a.sigma, a.s, a.mu};
        const auto inst = make_demix_instance(cell, MixingModel::gaussian, derive_key(a.seed, {0}));
        est = estimate_hirip(inst.op, SparsityLevels{a.s, a.sigma, a.S}, a.trials, a.seed);
    } else {
        const BlindConvOp op(gen_U(a.mu, a.n, stream_key(a.seed, Stream::spreading, 0)));
        est = estimate_hirip(op, SparsityLevels{a.s, a.sigma, std::nullopt}, a.trials, a.seed);
    }
    std::cout << json{{"delta_lower", est.delta_lower}, {"trials", est.trials}, {"mu", a.mu}, {"n", a.n},
                      {"s", a.s},       {"sigma", a.sigma},     {"M", a.M},   {"N", a.N},
                      {"S", a.S},       {"seed", a.seed}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

int cmd_plot(const std::string& input, const std::string& out) {
    std::ifstream in(input);
    require(in.good(), "cannot read " + input);
    const auto table = parse_aggregate(in);
    require(!table.cells.empty(), "aggregate CSV has no rows");
    for (const auto& p : write_heatmaps(table, output_dir(out))) std::cout << "wrote " << p.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical hard-thresholding pursuit for sparse blind deconvolution and demixing"};
    app.require_subcommand(1);

    SolveArgs solve;
    auto* solve_cmd = app.add_subcommand("solve", "Generate (or load) one instance and run HiHTP");
    solve_cmd->add_option("--n", solve.n, "message length");
    solve_cmd->add_option("--mu", solve.mu, "filter / measurement length");
    solve_cmd->add_option("--s", solve.s, "active filter taps");
    solve_cmd->add_option("--sigma", solve.sigma, "active message entries");
    solve_cmd->add_option("--M", solve.M, "antennas (demixing)");
    solve_cmd->add_option("--N", solve.N, "users (demixing)");
    solve_cmd->add_option("--S", solve.S, "active users (demixing)");
    solve_cmd->add_option("--seed", solve.seed, "base seed");
    solve_cmd->add_option("--max-iters", solve.max_iters, "HiHTP iteration cap");
    solve_cmd->add_option("--step-size", solve.step_size, "gradient step size");
    solve_cmd->add_option("--tol", solve.success_tol, "relative error counted as success");
    solve_cmd->add_option("--instance", solve.instance, "load an instance JSON instead of generating one");
    solve_cmd->add_option("--save-instance", solve.save_instance, "write the generated instance JSON here");
    solve_cmd->add_option("--out", solve.out, "output directory (default $PHASE_OUT_DIR or .)");

    SweepArgs phase, demix;
    auto add_sweep = [](CLI::App* cmd, SweepArgs& a, bool with_demix) {
        cmd->add_option("--config", a.config, "config file or bundled config name");
        cmd->add_option("--n", a.n, "n values (list or from:to[:step])");
        cmd->add_option("--sigma", a.sigma, "sigma values");
        cmd->add_option("--s", a.s, "s values");
        cmd->add_option("--mu", a.mu, "mu values");
        if (with_demix) {
            cmd->add_option("--M", a.M, "antenna counts");
            cmd->add_option("--N", a.N, "user counts");
            cmd->add_option("--S", a.S, "active user counts");
            cmd->add_option("--mixing", a.mixing, "gaussian or identity");
        }
        cmd->add_option("--trials", a.trials, "trials per cell");
        cmd->add_option("--seed", a.seed, "base seed");
        cmd->add_option("--max-iters", a.max_iters, "HiHTP iteration cap");
        cmd->add_option("--jobs", a.jobs, "worker threads (default: core count)");
        cmd->add_option("--out", a.out, "output directory (default $PHASE_OUT_DIR or .)");
        cmd->add_flag("--no-resume", a.no_resume, "ignore existing raw records");
    };
    auto* phase_cmd = app.add_subcommand("phase", "Single-user phase-transition sweep");
    add_sweep(phase_cmd, phase, false);
    auto* demix_cmd = app.add_subcommand("demix-phase", "Demixing phase-transition sweep");
    add_sweep(demix_cmd, demix, true);

    HiripArgs hirip;
    auto* hirip_cmd = app.add_subcommand("hirip", "Monte-Carlo lower bound on the HiRIP constant");
    hirip_cmd->add_option("--n", hirip.n);
    hirip_cmd->add_option("--mu", hirip.mu);
    hirip_cmd->add_option("--s", hirip.s);
    hirip_cmd->add_option("--sigma", hirip.sigma);
    hirip_cmd->add_option("--M", hirip.M);
    hirip_cmd->add_option("--N", hirip.N);
    hirip_cmd->add_option("--S", hirip.S);
    hirip_cmd->add_option("--trials", hirip.trials);
    hirip_cmd->add_option("--seed", hirip.seed);

    std::string plot_input, plot_out;
    auto* plot_cmd = app.add_subcommand("plot", "SVG heatmaps from an aggregate CSV");
    plot_cmd->add_option("input", plot_input, "aggregate CSV")->required();
    plot_cmd->add_option("--out", plot_out, "output directory (default $PHASE_OUT_DIR or .)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e, std::cerr, std::cerr);
        std::cerr << app.help();
        return kExitUsage;
    }

    try {
        if (*solve_cmd) return cmd_solve(solve);
        if (*phase_cmd) return cmd_sweep(phase, false);
        if (*demix_cmd) return cmd_sweep(demix, true);
        if (*hirip_cmd) return cmd_hirip(hirip);
        if (*plot_cmd) return cmd_plot(plot_input, plot_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (auto* sub : app.get_subcommands()) std::cerr << sub->help();
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
