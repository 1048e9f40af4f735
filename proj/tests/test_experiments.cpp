#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "hihtp/config.hpp"
#include "hihtp/experiments.hpp"
#include "hihtp/plot.hpp"
#include "hihtp/serialize.hpp"

using namespace hihtp;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    auto dir = fs::temp_directory_path() / (std::string("hihtp_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

PhaseGrid small_grid() {
    PhaseGrid g;
    g.n_values = {12};
    g.sigma_values = {2, 3};
    g.s_values = {1, 2, 3};
    g.mu_values = {4, 12, 30};
    g.trials_per_cell = 4;
    g.base_seed = 99;
    return g;
}

PhaseTable synthetic(const std::vector<index_t>& s_vals, const std::vector<index_t>& mu_vals, auto fraction) {
    PhaseTable t;
    for (index_t s : s_vals)
        for (index_t mu : mu_vals) {
            CellAggregate a;
            a.cell = CellParams{1, 1, 1, 50, 5, s, mu};
            a.trials = 10;
            a.success_fraction = fraction(s, mu);
            a.successes = static_cast<index_t>(a.success_fraction * 10);
            t.cells.push_back(a);
        }
    std::sort(t.cells.begin(), t.cells.end(), [](auto& a, auto& b) { return a.cell < b.cell; });
    return t;
}

}  // namespace

TEST(RunTrial, PreemptedCell) {
    const CellParams c{1, 1, 1, 50, 5, 3, 10};
    EXPECT_TRUE(c.preempted());
    const auto r = run_trial(c, 0, PhaseGrid{});
    EXPECT_TRUE(r.preempted);
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.rel_error, 1.0);
    EXPECT_EQ(r.iterations, 0);
}

TEST(RunTrial, PreemptionBoundaryIsStrict) {
    EXPECT_FALSE((CellParams{1, 1, 1, 50, 5, 3, 15}.preempted()));
    EXPECT_TRUE((CellParams{1, 1, 1, 50, 5, 3, 14}.preempted()));
    EXPECT_TRUE((CellParams{2, 8, 2, 32, 3, 2, 5}.preempted()));
    EXPECT_FALSE((CellParams{2, 8, 2, 32, 3, 2, 6}.preempted()));
}

TEST(RunTrial, EasyCellSucceedsAndIsDeterministic) {
    const CellParams c{1, 1, 1, 50, 5, 1, 120};
    PhaseGrid g;
    g.base_seed = 3;
    for (index_t t = 0; t < 5; ++t) {
        const auto a = run_trial(c, t, g);
        const auto b = run_trial(c, t, g);
        EXPECT_TRUE(a.success) << "trial " << t << " rel_error " << a.rel_error;
        EXPECT_EQ(a.seed, b.seed);
        EXPECT_EQ(a.rel_error, b.rel_error);
        EXPECT_EQ(a.iterations, b.iterations);
    }
}

TEST(RunPhase, SingleCellMatchesRunTrial) {
    PhaseGrid g;
    g.n_values = {50};
    g.sigma_values = {5};
    g.s_values = {2};
    g.mu_values = {80};
    g.trials_per_cell = 1;
    g.base_seed = 5;
    const auto table = run_phase(g, RunOptions{1});
    ASSERT_EQ(table.cells.size(), 1u);
    const auto rec = run_trial(table.cells[0].cell, 0, g);
    EXPECT_EQ(table.cells[0].mean_rel_error, rec.rel_error);
    EXPECT_EQ(table.cells[0].successes, rec.success ? 1 : 0);
}

TEST(RunPhase, ReproducibleAcrossThreadCounts) {
    const auto g = small_grid();
    const auto a = format_aggregate(run_phase(g, RunOptions{1}), TableKind::single);
    const auto b = format_aggregate(run_phase(g, RunOptions{4}), TableKind::single);
    EXPECT_EQ(a, b);
}

TEST(RunPhase, PreemptedCellsAreZeroAndFractionsExact) {
    const auto table = run_phase(small_grid(), RunOptions{2});
    EXPECT_EQ(table.cells.size(), 18u);
    for (const auto& a : table.cells) {
        EXPECT_EQ(a.trials, 4);
        EXPECT_EQ(a.success_fraction * a.trials, static_cast<double>(a.successes));
        if (a.cell.preempted()) {
            EXPECT_EQ(a.successes, 0);
            EXPECT_EQ(a.mean_iterations, 0.0);
        }
    }
}

TEST(RunPhase, ResumeYieldsIdenticalTable) {
    const auto dir = scratch_dir();
    const auto raw = dir / "raw.csv";
    const auto g = small_grid();
    const auto fresh = format_aggregate(run_phase(g, RunOptions{2, raw, false}), TableKind::single);

    // Keep the header and a third of the records, then tear the last line.
    std::ifstream in(raw);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    in.close();
    ASSERT_EQ(lines.size(), 1u + 18 * 4);
    EXPECT_EQ(lines[0], kRawHeader);
    {
        std::ofstream out(raw, std::ios::trunc);
        for (std::size_t i = 0; i < 1 + 24; ++i) out << lines[i] << '\n';
        out << lines[25].substr(0, 7);
    }
    std::ofstream(raw, std::ios::app) << '\n';
    const auto resumed = format_aggregate(run_phase(g, RunOptions{3, raw, true}), TableKind::single);
    EXPECT_EQ(fresh, resumed);
}

TEST(RunPhase, RejectsInvalidGrids) {
    PhaseGrid g = small_grid();
    g.mu_values.clear();
    EXPECT_THROW(run_phase(g), std::invalid_argument);
    g = small_grid();
    g.sigma_values = {13};
    EXPECT_THROW(run_phase(g), std::invalid_argument);
    g = small_grid();
    g.trials_per_cell = 0;
    EXPECT_THROW(run_phase(g), std::invalid_argument);
    EXPECT_THROW(run_phase(std::span<const PhaseGrid>{}), std::invalid_argument);
}

TEST(RunPhase, MultiGridNeedsSharedProtocol) {
    auto a = small_grid(), b = small_grid();
    b.mu_values = {40};
    std::vector<PhaseGrid> both{a, b};
    EXPECT_EQ(run_phase(both, RunOptions{2}).cells.size(), 24u);
    both[1].base_seed = 1;
    EXPECT_THROW(run_phase(both), std::invalid_argument);
}

TEST(RunDemixPhase, OneUserReducesToSingleUserSweep) {
    const auto g = small_grid();
    DemixGrid d{g, {1}, {1}, {1}, MixingModel::identity};
    const auto single = run_phase(g, RunOptions{2});
    const auto demix = run_demix_phase(d, RunOptions{2});
    ASSERT_EQ(single.cells.size(), demix.cells.size());
    for (std::size_t i = 0; i < single.cells.size(); ++i) {
        EXPECT_EQ(single.cells[i].cell, demix.cells[i].cell);
        EXPECT_EQ(single.cells[i].successes, demix.cells[i].successes);
        EXPECT_EQ(single.cells[i].mean_rel_error, demix.cells[i].mean_rel_error);
        EXPECT_EQ(single.cells[i].mean_iterations, demix.cells[i].mean_iterations);
    }
}

TEST(RunDemixPhase, InvalidGrids) {
    DemixGrid d{small_grid(), {0}, {2}, {1}, MixingModel::gaussian};
    EXPECT_THROW(run_demix_phase(d), std::invalid_argument);
    d.M_values = {2};
    d.S_values = {3};
    EXPECT_THROW(run_demix_phase(d), std::invalid_argument);
    d.S_values = {1};
    d.M_values = {3};
    d.mixing = MixingModel::identity;
    EXPECT_THROW(run_demix_phase(d), std::invalid_argument);
}

TEST(RunDemixPhase, ActiveUsersRecovered) {
    PhaseGrid base;
    base.n_values = {16};
    base.sigma_values = {2};
    base.s_values = {2};
    base.mu_values = {64};
    base.trials_per_cell = 5;
    base.base_seed = 4;
    const auto t = run_demix_phase(DemixGrid{base, {6}, {4}, {2}, MixingModel::gaussian}, RunOptions{2});
    ASSERT_EQ(t.cells.size(), 1u);
    EXPECT_GE(t.cells[0].success_fraction, 0.8);
}

TEST(FitPhaseBoundary, AllSuccess) {
    const auto t = synthetic({1, 2, 3}, {10, 20, 30}, [](index_t, index_t) { return 1.0; });
    const auto fit = fit_phase_boundary(t);
    ASSERT_EQ(fit.size(), 1u);
    for (const auto& p : fit[0].points) EXPECT_EQ(p.mu_at_level, 10);
    EXPECT_NEAR(*fit[0].slope, 0.0, 1e-12);
}

TEST(FitPhaseBoundary, NoSuccess) {
    const auto t = synthetic({1, 2, 3}, {10, 20, 30}, [](index_t, index_t) { return 0.0; });
    const auto fit = fit_phase_boundary(t);
    for (const auto& p : fit[0].points) EXPECT_FALSE(p.mu_at_level);
    EXPECT_FALSE(fit[0].slope);
}

TEST(FitPhaseBoundary, LinearThreshold) {
    std::vector<index_t> mus;
    for (index_t mu = 5; mu <= 120; mu += 5) mus.push_back(mu);
    const auto t = synthetic({1, 2, 3, 4, 5, 6, 7}, mus, [](index_t s, index_t mu) { return mu >= 10 * s ? 0.9 : 0.1; });
    const auto fit = fit_phase_boundary(t);
    ASSERT_EQ(fit.size(), 1u);
    for (index_t s = 1; s <= 7; ++s) EXPECT_EQ(fit[0].at(s), 10 * s);
    EXPECT_NEAR(*fit[0].slope, 10.0, 1e-9);
}

TEST(FitPhaseBoundary, UndefinedSliceExcludedFromFit) {
    const auto t = synthetic({1, 2, 3}, {10, 20, 30, 40}, [](index_t s, index_t mu) {
        return s == 3 ? 0.0 : (mu >= 20 * s ? 1.0 : 0.0);
    });
    const auto fit = fit_phase_boundary(t);
    EXPECT_EQ(fit[0].at(1), 20);
    EXPECT_EQ(fit[0].at(2), 40);
    EXPECT_FALSE(fit[0].at(3));
    EXPECT_NEAR(*fit[0].slope, 20.0, 1e-12);
}

TEST(Csv, RawRoundTrip) {
    TrialRecord r;
    r.cell = CellParams{3, 8, 2, 32, 3, 2, 96};
    r.trial = 17;
    r.seed = 0xdeadbeefcafef00dULL;
    r.success = true;
    r.rel_error = 1.234567890123456789e-7;
    r.iterations = 4;
    r.wall_time = 0.25;
    const auto back = parse_raw(format_raw(r, TableKind::demix), TableKind::demix);
    EXPECT_EQ(back.cell, r.cell);
    EXPECT_EQ(back.seed, r.seed);
    EXPECT_EQ(back.rel_error, r.rel_error);
    EXPECT_EQ(back.iterations, 4);
    EXPECT_TRUE(back.success);
    EXPECT_THROW(parse_raw(format_raw(r, TableKind::demix), TableKind::single), std::invalid_argument);
}

TEST(Csv, AggregateRoundTripAndValidation) {
    const auto table = run_phase(small_grid(), RunOptions{2});
    const auto text = format_aggregate(table, TableKind::single);
    EXPECT_EQ(text.substr(0, text.find('\n')), "n,sigma,s,mu,trials,success_fraction,mean_rel_error,mean_iterations");
    std::istringstream in(text);
    const auto back = parse_aggregate(in);
    ASSERT_EQ(back.cells.size(), table.cells.size());
    for (std::size_t i = 0; i < back.cells.size(); ++i) {
        EXPECT_EQ(back.cells[i].cell, table.cells[i].cell);
        EXPECT_EQ(back.cells[i].successes, table.cells[i].successes);
    }
    std::istringstream bad_header("n,sigma\n1,2\n");
    EXPECT_THROW(parse_aggregate(bad_header), std::invalid_argument);
    std::istringstream out_of_range(std::string(kAggregateHeader) + "\n50,5,1,10,4,1.5,0,1\n");
    EXPECT_THROW(parse_aggregate(out_of_range), std::invalid_argument);
    std::istringstream garbage(std::string(kAggregateHeader) + "\n50,5,x,10,4,0.5,0,1\n");
    EXPECT_THROW(parse_aggregate(garbage), std::invalid_argument);
    std::istringstream empty("");
    EXPECT_THROW(parse_aggregate(empty), std::invalid_argument);
}

TEST(Config, BundledGrids) {
    const auto n50 = load_sweep_config("paper-n50");
    ASSERT_EQ(n50.grids.size(), 1u);
    EXPECT_EQ(n50.grids[0].cells().size(), 3u * 7 * 12);
    EXPECT_EQ(n50.grids[0].trials_per_cell, 100);
    EXPECT_EQ(n50.grids[0].solver.max_iters, 10);
    EXPECT_EQ(n50.grids[0].mu_values.front(), 10);
    EXPECT_EQ(n50.grids[0].mu_values.back(), 120);

    const auto n350 = load_sweep_config("paper-n350");
    ASSERT_EQ(n350.grids.size(), 2u);
    EXPECT_EQ(n350.grids[0].cells().size(), 7u * 12);
    EXPECT_EQ(n350.grids[1].cells().size(), 2u * 7 * 12);
    EXPECT_EQ(n350.grids[1].mu_values.back(), 350);

    const auto demix = load_sweep_config("demix-small");
    ASSERT_EQ(demix.demix_grids.size(), 1u);
    EXPECT_EQ(demix.demix_grids[0].cells().size(), 3u);
}

TEST(Config, ParsingAndErrors) {
    const auto cfg = sweep_config_from_json(json::parse(
        R"({"n": 20, "sigma": [2], "s": {"from": 1, "to": 3}, "mu": {"from": 10, "to": 30, "step": 10}, "base_seed": 8})"));
    ASSERT_EQ(cfg.grids.size(), 1u);
    EXPECT_EQ(cfg.grids[0].n_values, std::vector<index_t>{20});
    EXPECT_EQ(cfg.grids[0].s_values, (std::vector<index_t>{1, 2, 3}));
    EXPECT_EQ(cfg.grids[0].mu_values, (std::vector<index_t>{10, 20, 30}));
    EXPECT_EQ(cfg.grids[0].base_seed, 8u);

    const auto round = sweep_config_from_json(to_json(cfg));
    EXPECT_EQ(round.grids[0].cells(), cfg.grids[0].cells());

    EXPECT_THROW(sweep_config_from_json(json::parse(R"({"n": "x"})")), std::exception);
    EXPECT_THROW(sweep_config_from_json(json::parse(R"({"s": {"from": 1, "to": 3, "step": 0}})")), std::invalid_argument);
    EXPECT_THROW(load_sweep_config("no-such-config"), std::invalid_argument);

    const auto dir = scratch_dir();
    std::ofstream(dir / "broken.json") << "{ not json";
    EXPECT_THROW(load_sweep_config((dir / "broken.json").string()), std::invalid_argument);

    const auto zero_rows = sweep_config_from_json(
        json::parse(R"({"n": [8], "sigma": [2], "s": [1], "mu": [8], "M": [0], "N": [2], "S": [1]})"));
    ASSERT_EQ(zero_rows.demix_grids.size(), 1u);
    EXPECT_THROW(zero_rows.demix_grids[0].validate(), std::invalid_argument);
}

TEST(Serialize, OperatorsAndVectorsRoundTrip) {
    const auto inst = make_instance(6, 9, 2, 2, 4);
    const auto op = blind_conv_from_json(json::parse(to_json(inst.op).dump()));
    EXPECT_EQ(op.U(), inst.op.U());
    EXPECT_EQ(op.apply(inst.truth), inst.y);

    const auto demix = make_demix_instance(CellParams{3, 2, 1, 5, 2, 1, 7}, MixingModel::gaussian, 6);
    const auto d2 = demix_from_json(json::parse(to_json(demix.op).dump()));
    EXPECT_EQ(d2.D(), demix.op.D());
    EXPECT_EQ(d2.apply(demix.truth), demix.y);

    EXPECT_EQ(block_vector_from_json(to_json(inst.truth)), inst.truth);
    const HiSupport sup{3, {{0, 1, {0, 2}}, {1, 0, {1}}}};
    EXPECT_EQ(support_from_json(to_json(sup)), sup);

    EnsembleSpec spec{64, 16, 16, 2, 4, 2, 3, 1, 11, CodebookKind::identity};
    EXPECT_EQ(ensemble_spec_from_json(to_json(spec)), spec);

    SolverConfig cfg;
    cfg.max_iters = 7;
    cfg.rel_err_target = 1e-9;
    EXPECT_EQ(solver_config_from_json(to_json(cfg)), cfg);

    const auto custom = Codebook::custom("x", 2, 2, [](const Eigen::VectorXd& v) { return v; },
                                         [](const Eigen::VectorXd& v) { return v; });
    EXPECT_THROW(to_json(custom), std::invalid_argument);
}

TEST(Plot, HeatmapsFromAggregate) {
    const auto dir = scratch_dir();
    const auto t = synthetic({1, 2}, {10, 20, 30}, [](index_t s, index_t mu) { return mu >= 10 * s ? 1.0 : 0.0; });
    const auto files = write_heatmaps(t, dir);
    ASSERT_EQ(files.size(), 1u);
    std::ifstream in(files[0]);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto svg = ss.str();
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);

    const auto one = synthetic({1}, {10}, [](index_t, index_t) { return 0.5; });
    EXPECT_NO_THROW(render_heatmap_svg(one.cells, "one"));
    auto bad = one;
    bad.cells[0].success_fraction = 1.2;
    EXPECT_THROW(render_heatmap_svg(bad.cells, "bad"), std::invalid_argument);
}
