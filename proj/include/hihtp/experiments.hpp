#ifndef HIHTP_EXPERIMENTS_HPP
#define HIHTP_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "hihtp/ensembles.hpp"
#include "hihtp/operators.hpp"
#include "hihtp/solver.hpp"

namespace hihtp {

/// Parameters of one phase-diagram cell. Single-user cells keep M = N = S = 1.
/// Field order is the sort order of aggregate tables.
struct CellParams {
    index_t M{1};
    index_t N{1};
    index_t S{1};
    index_t n{1};
    index_t sigma{1};
    index_t s{1};
    index_t mu{1};

    friend auto operator<=>(const CellParams&, const CellParams&) = default;

    /// Fewer measurements than unknowns on the true support: recovery is
    /// impossible even with an oracle support, so the trial is not run.
    bool preempted() const noexcept { return M * mu < S * s * sigma; }
};

struct TrialRecord {
    CellParams cell;
    index_t trial{0};
    std::uint64_t seed{0};
    bool preempted{false};
    bool success{false};
    /// 1.0 for preempted trials (the estimate is taken as zero).
    double rel_error{1.0};
    int iterations{0};
    double wall_time{0.0};
};

enum class MixingModel { gaussian, identity };

struct PhaseGrid {
    std::vector<index_t> n_values;
    std::vector<index_t> sigma_values;
    std::vector<index_t> s_values;
    std::vector<index_t> mu_values;
    index_t trials_per_cell{100};
    SolverConfig solver{};
    std::uint64_t base_seed{0};
    double success_tol{1e-4};

    void validate() const {
        require(!n_values.empty() && !sigma_values.empty() && !s_values.empty() && !mu_values.empty(),
                "phase grid lists must be non-empty");
        require(trials_per_cell >= 1, "trials_per_cell must be at least 1");
        for (auto* list : {&n_values, &sigma_values, &s_values, &mu_values})
            for (index_t v : *list) require(v >= 1, "grid values must be positive");
        for (index_t n : n_values)
            for (index_t sigma : sigma_values) require(sigma <= n, "sigma exceeds n in grid");
        for (index_t mu : mu_values)
            for (index_t s : s_values) require(s <= mu, "s exceeds mu in grid");
        solver.validate();
        require(success_tol > 0.0, "success tolerance must be positive");
    }

    std::vector<CellParams> cells() const {
        std::vector<CellParams> out;
        for (index_t n : n_values)
            for (index_t sigma : sigma_values)
                for (index_t s : s_values)
                    for (index_t mu : mu_values) out.push_back(CellParams{1, 1, 1, n, sigma, s, mu});
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

struct DemixGrid {
    PhaseGrid base;
    std::vector<index_t> M_values;
    std::vector<index_t> N_values;
    std::vector<index_t> S_values;
    MixingModel mixing{MixingModel::gaussian};

    void validate() const {
        base.validate();
        require(!M_values.empty() && !N_values.empty() && !S_values.empty(), "demixing grid lists must be non-empty");
        for (index_t M : M_values) require(M >= 1, "mixing matrix needs at least one row (M >= 1)");
        for (index_t N : N_values) {
            require(N >= 1, "N must be positive");
            for (index_t S : S_values) require(S >= 1 && S <= N, "S must lie in [1, N]");
            if (mixing == MixingModel::identity)
                for (index_t M : M_values) require(M == N, "identity mixing needs M == N");
        }
    }

    std::vector<CellParams> cells() const {
        std::vector<CellParams> out;
        for (const auto& c : base.cells())
            for (index_t M : M_values)
                for (index_t N : N_values)
                    for (index_t S : S_values) {
                        auto cell = c;
                        cell.M = M;
                        cell.N = N;
                        cell.S = S;
                        out.push_back(cell);
                    }
        std::sort(out.begin(), out.end());
        return out;
    }
};

/// Seed of one trial. M, N and S are deliberately not part of the key: every
/// demixing cell of a trial index sees the same filters, messages and
/// spreading matrices, and a one-user demixing cell sees exactly the
/// single-user instance.
inline std::uint64_t trial_seed(std::uint64_t base_seed, const CellParams& c, index_t trial) {
    return derive_key(base_seed, {static_cast<std::uint64_t>(c.n), static_cast<std::uint64_t>(c.mu),
                                  static_cast<std::uint64_t>(c.s), static_cast<std::uint64_t>(c.sigma),
                                  static_cast<std::uint64_t>(trial)});
}

struct Instance {
    BlindConvOp op;
    std::vector<double> h;
    std::vector<double> b;
    BlockVector truth;
    Eigen::VectorXd y;
};

/// Random single-user instance: Gaussian U, identity codebook, sparse h and
/// b, noiseless y = C(h (x) b).
inline Instance make_instance(index_t n, index_t mu, index_t s, index_t sigma, std::uint64_t seed) {
    BlindConvOp op(gen_U(mu, n, stream_key(seed, Stream::spreading, 0)));
    auto h = gen_filter(mu, s, stream_key(seed, Stream::filter, 0));
    auto b = gen_message(n, sigma, stream_key(seed, Stream::message, 0));
    BlockVector truth = BlockVector::outer(h, b);
    Eigen::VectorXd y = op.apply(truth);
    return {std::move(op), std::move(h), std::move(b), std::move(truth), std::move(y)};
}

struct DemixInstance {
    DemixOp op;
    std::vector<index_t> active;
    BlockVector truth;
    Eigen::VectorXd y;
};

inline DemixInstance make_demix_instance(const CellParams& c, MixingModel mixing, std::uint64_t seed) {
    auto mix = gen_mixing(c.M, c.N, c.S, stream_key(seed, Stream::mixing));
    if (mixing == MixingModel::identity) {
        require(c.M == c.N, "identity mixing needs M == N");
        mix.D = Eigen::MatrixXd::Identity(c.M, c.N);
    }
    std::vector<BlindConvOp> users;
    users.reserve(static_cast<std::size_t>(c.N));
    for (index_t i = 0; i < c.N; ++i)
        users.emplace_back(gen_U(c.mu, c.n, stream_key(seed, Stream::spreading, static_cast<std::uint64_t>(i))));
    BlockVector truth(BlockShape{c.N, c.mu, c.n});
    for (index_t i : mix.active) {
        const auto h = gen_filter(c.mu, c.s, stream_key(seed, Stream::filter, static_cast<std::uint64_t>(i)));
        const auto b = gen_message(c.n, c.sigma, stream_key(seed, Stream::message, static_cast<std::uint64_t>(i)));
        for (index_t k = 0; k < c.mu; ++k)
            for (index_t j = 0; j < c.n; ++j) truth(i, k, j) = h[static_cast<std::size_t>(k)] * b[static_cast<std::size_t>(j)];
    }
    DemixOp op(std::move(mix.D), std::move(users));
    Eigen::VectorXd y = op.apply(truth);
    return {std::move(op), std::move(mix.active), std::move(truth), std::move(y)};
}

namespace detail {

template <class Fn>
TrialRecord timed_trial(const CellParams& c, index_t trial, std::uint64_t base_seed, Fn&& solve_and_score) {
    TrialRecord rec;
    rec.cell = c;
    rec.trial = trial;
    rec.seed = trial_seed(base_seed, c, trial);
    if (c.preempted()) {
        rec.preempted = true;
        return rec;
    }
    const auto start = std::chrono::steady_clock::now();
    solve_and_score(rec);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

}  // namespace detail

/// One seeded single-user recovery experiment.
inline TrialRecord run_trial(const CellParams& c, index_t trial, const PhaseGrid& grid) {
    return detail::timed_trial(c, trial, grid.base_seed, [&](TrialRecord& rec) {
        const auto inst = make_instance(c.n, c.mu, c.s, c.sigma, rec.seed);
        const auto report = hihtp_solve(inst.y, inst.op, SparsityLevels{c.s, c.sigma, std::nullopt}, grid.solver);
        rec.rel_error = relative_error(report.estimate.data, inst.truth);
        rec.iterations = report.iterations;
        rec.success = rec.rel_error <= grid.success_tol;
    });
}

/// One seeded three-level (demixing) recovery experiment.
inline TrialRecord run_demix_trial(const CellParams& c, index_t trial, const DemixGrid& grid) {
    return detail::timed_trial(c, trial, grid.base.base_seed, [&](TrialRecord& rec) {
        const auto inst = make_demix_instance(c, grid.mixing, rec.seed);
        const auto report = hihtp_solve(inst.y, inst.op, SparsityLevels{c.s, c.sigma, c.S}, grid.base.solver);
        rec.rel_error = relative_error(report.estimate.data, inst.truth);
        rec.iterations = report.iterations;
        rec.success = rec.rel_error <= grid.base.success_tol;
    });
}

struct CellAggregate {
    CellParams cell;
    index_t trials{0};
    index_t successes{0};
    double success_fraction{0.0};
    double mean_rel_error{0.0};
    double max_rel_error{0.0};
    double mean_iterations{0.0};
    double mean_wall_time{0.0};
};

struct PhaseTable {
    std::vector<CellAggregate> cells;

    const CellAggregate* find(const CellParams& c) const {
        auto it = std::lower_bound(cells.begin(), cells.end(), c,
                                   [](const CellAggregate& a, const CellParams& k) { return a.cell < k; });
        return it != cells.end() && it->cell == c ? &*it : nullptr;
    }
};

/// Aggregates raw records into per-cell statistics. Records are ordered by
/// (cell, trial) before summation so the result does not depend on the order
/// in which trials finished.
inline PhaseTable aggregate(std::vector<TrialRecord> records) {
    std::sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
        return std::tie(a.cell, a.trial) < std::tie(b.cell, b.trial);
    });
    PhaseTable table;
    for (std::size_t i = 0; i < records.size();) {
        std::size_t j = i;
        CellAggregate agg;
        agg.cell = records[i].cell;
        double err = 0.0, iters = 0.0, wall = 0.0;
        for (; j < records.size() && records[j].cell == agg.cell; ++j) {
            const auto& r = records[j];
            ++agg.trials;
            agg.successes += r.success ? 1 : 0;
            err += r.rel_error;
            agg.max_rel_error = std::max(agg.max_rel_error, r.rel_error);
            iters += r.iterations;
            wall += r.wall_time;
        }
        const double t = static_cast<double>(agg.trials);
        agg.success_fraction = static_cast<double>(agg.successes) / t;
        agg.mean_rel_error = err / t;
        agg.mean_iterations = iters / t;
        agg.mean_wall_time = wall / t;
        table.cells.push_back(agg);
        i = j;
    }
    return table;
}

// ---------------------------------------------------------------------------
// CSV schemas

enum class TableKind { single, demix };

inline constexpr const char* kRawHeader = "n,mu,s,sigma,trial,seed,preempted,success,rel_error,iterations,wall_time_s";
inline constexpr const char* kDemixRawHeader =
    "M,N,S,n,mu,s,sigma,trial,seed,preempted,success,rel_error,iterations,wall_time_s";
inline constexpr const char* kAggregateHeader = "n,sigma,s,mu,trials,success_fraction,mean_rel_error,mean_iterations";
inline constexpr const char* kDemixAggregateHeader =
    "M,N,S,n,sigma,s,mu,trials,success_fraction,mean_rel_error,mean_iterations";

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string format_raw(const TrialRecord& r, TableKind kind) {
    char buf[256];
    std::string prefix;
    if (kind == TableKind::demix) {
        std::snprintf(buf, sizeof buf, "%td,%td,%td,", r.cell.M, r.cell.N, r.cell.S);
        prefix = buf;
    }
    std::snprintf(buf, sizeof buf, "%td,%td,%td,%td,%td,%llu,%d,%d,%.17g,%d,%.6f", r.cell.n, r.cell.mu, r.cell.s,
                  r.cell.sigma, r.trial, static_cast<unsigned long long>(r.seed), r.preempted ? 1 : 0,
                  r.success ? 1 : 0, r.rel_error, r.iterations, r.wall_time);
    return prefix + buf;
}

inline TrialRecord parse_raw(const std::string& line, TableKind kind) {
    const auto f = split_csv_line(line);
    const std::size_t off = kind == TableKind::demix ? 3 : 0;
    require(f.size() == 11 + off, "raw record has the wrong number of fields");
    TrialRecord r;
    if (kind == TableKind::demix) {
        r.cell.M = std::stoll(f[0]);
        r.cell.N = std::stoll(f[1]);
        r.cell.S = std::stoll(f[2]);
    }
    r.cell.n = std::stoll(f[off + 0]);
    r.cell.mu = std::stoll(f[off + 1]);
    r.cell.s = std::stoll(f[off + 2]);
    r.cell.sigma = std::stoll(f[off + 3]);
    r.trial = std::stoll(f[off + 4]);
    r.seed = std::stoull(f[off + 5]);
    r.preempted = f[off + 6] == "1";
    r.success = f[off + 7] == "1";
    r.rel_error = std::stod(f[off + 8]);
    r.iterations = std::stoi(f[off + 9]);
    r.wall_time = std::stod(f[off + 10]);
    return r;
}

inline std::string format_aggregate(const PhaseTable& table, TableKind kind) {
    std::string out = kind == TableKind::demix ? kDemixAggregateHeader : kAggregateHeader;
    out += '\n';
    char buf[256];
    for (const auto& a : table.cells) {
        if (kind == TableKind::demix) {
            std::snprintf(buf, sizeof buf, "%td,%td,%td,", a.cell.M, a.cell.N, a.cell.S);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "%td,%td,%td,%td,%td,%.10g,%.6e,%.6g\n", a.cell.n, a.cell.sigma, a.cell.s,
                      a.cell.mu, a.trials, a.success_fraction, a.mean_rel_error, a.mean_iterations);
        out += buf;
    }
    return out;
}

/// Parses an aggregate CSV (either schema). Success fractions must lie in
/// [0, 1].
inline PhaseTable parse_aggregate(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "aggregate CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    TableKind kind;
    if (line == kAggregateHeader)
        kind = TableKind::single;
    else if (line == kDemixAggregateHeader)
        kind = TableKind::demix;
    else
        throw std::invalid_argument("unrecognized aggregate CSV header: " + line);
    const std::size_t off = kind == TableKind::demix ? 3 : 0;
    PhaseTable table;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        require(f.size() == 8 + off, "aggregate row has the wrong number of fields");
        CellAggregate a;
        try {
            if (kind == TableKind::demix) {
                a.cell.M = std::stoll(f[0]);
                a.cell.N = std::stoll(f[1]);
                a.cell.S = std::stoll(f[2]);
            }
            a.cell.n = std::stoll(f[off + 0]);
            a.cell.sigma = std::stoll(f[off + 1]);
            a.cell.s = std::stoll(f[off + 2]);
            a.cell.mu = std::stoll(f[off + 3]);
            a.trials = std::stoll(f[off + 4]);
            a.success_fraction = std::stod(f[off + 5]);
            a.mean_rel_error = std::stod(f[off + 6]);
            a.mean_iterations = std::stod(f[off + 7]);
        } catch (const std::logic_error&) {
            throw std::invalid_argument("malformed aggregate row: " + line);
        }
        require(a.success_fraction >= 0.0 && a.success_fraction <= 1.0, "success fraction outside [0, 1]");
        a.successes = static_cast<index_t>(std::llround(a.success_fraction * static_cast<double>(a.trials)));
        table.cells.push_back(a);
    }
    std::sort(table.cells.begin(), table.cells.end(),
              [](const CellAggregate& x, const CellAggregate& y) { return x.cell < y.cell; });
    return table;
}

// ---------------------------------------------------------------------------
// Sweep driver

struct RunOptions {
    unsigned jobs{0};  ///< 0 selects the hardware concurrency
    /// Raw records are appended here as trials finish. Existing records for
    /// the same sweep are reused when `resume` is set.
    std::optional<std::filesystem::path> raw_path{};
    bool resume{true};
};

namespace detail {

template <class TrialFn>
PhaseTable run_sweep(const std::vector<CellParams>& cells, index_t trials, TableKind kind, const RunOptions& opts,
                     TrialFn&& run_one) {
    struct Job {
        CellParams cell;
        index_t trial;
    };
    std::map<std::pair<CellParams, index_t>, TrialRecord> done;
    std::vector<TrialRecord> records;

    std::ofstream sink;
    if (opts.raw_path) {
        const bool exists = std::filesystem::exists(*opts.raw_path) && std::filesystem::file_size(*opts.raw_path) > 0;
        if (exists && opts.resume) {
            std::ifstream in(*opts.raw_path);
            std::string line;
            std::getline(in, line);
            require(line == (kind == TableKind::demix ? kDemixRawHeader : kRawHeader),
                    "existing raw file has a different schema");
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                try {
                    auto r = parse_raw(line, kind);
                    done.emplace(std::make_pair(r.cell, r.trial), r);
                } catch (const std::exception&) {
                    // A torn final line from an interrupted run; the trial is redone.
                }
            }
        }
        if (opts.raw_path->has_parent_path()) std::filesystem::create_directories(opts.raw_path->parent_path());
        sink.open(*opts.raw_path, exists && opts.resume ? std::ios::app : std::ios::trunc);
        require(sink.good(), "cannot open raw output file");
        if (!(exists && opts.resume)) sink << (kind == TableKind::demix ? kDemixRawHeader : kRawHeader) << '\n';
        sink.flush();
    }

    std::vector<Job> jobs;
    for (const auto& c : cells)
        for (index_t t = 0; t < trials; ++t) {
            auto it = done.find({c, t});
            if (it != done.end())
                records.push_back(it->second);
            else
                jobs.push_back({c, t});
        }

    std::mutex mtx;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            TrialRecord rec = run_one(jobs[i].cell, jobs[i].trial);
            std::lock_guard lock(mtx);
            if (sink.is_open()) {
                sink << format_raw(rec, kind) << '\n';
                sink.flush();
            }
            records.push_back(rec);
        }
    };
    unsigned n_threads = opts.jobs ? opts.jobs : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, std::max<std::size_t>(jobs.size(), 1)));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    return aggregate(std::move(records));
}

}  // namespace detail

namespace detail {

inline void require_shared_protocol(const PhaseGrid& a, const PhaseGrid& b) {
    require(a.trials_per_cell == b.trials_per_cell && a.base_seed == b.base_seed && a.solver == b.solver &&
                a.success_tol == b.success_tol,
            "sub-grids of one sweep must share trials, seed, solver and success tolerance");
}

}  // namespace detail

/// Runs every (n, sigma, s, mu) cell of the grids for trials_per_cell seeded
/// trials each. Several grids may be given to cover non-rectangular designs;
/// they must share the trial protocol. The table depends only on the grids
/// and the base seed.
inline PhaseTable run_phase(std::span<const PhaseGrid> grids, const RunOptions& opts = {}) {
    require(!grids.empty(), "empty phase grid");
    std::vector<CellParams> cells;
    for (const auto& g : grids) {
        g.validate();
        detail::require_shared_protocol(grids.front(), g);
        const auto c = g.cells();
        cells.insert(cells.end(), c.begin(), c.end());
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    const PhaseGrid& proto = grids.front();
    return detail::run_sweep(cells, proto.trials_per_cell, TableKind::single, opts,
                             [&](const CellParams& c, index_t t) { return run_trial(c, t, proto); });
}

inline PhaseTable run_phase(const PhaseGrid& grid, const RunOptions& opts = {}) {
    return run_phase(std::span<const PhaseGrid>(&grid, 1), opts);
}

/// Demixing sweep over (M, N, S) on top of the single-user grid. Success is
/// judged on the lifted three-level vector.
inline PhaseTable run_demix_phase(std::span<const DemixGrid> grids, const RunOptions& opts = {}) {
    require(!grids.empty(), "empty demixing grid");
    std::vector<CellParams> cells;
    for (const auto& g : grids) {
        g.validate();
        detail::require_shared_protocol(grids.front().base, g.base);
        require(g.mixing == grids.front().mixing, "sub-grids of one sweep must share the mixing model");
        const auto c = g.cells();
        cells.insert(cells.end(), c.begin(), c.end());
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    const DemixGrid& proto = grids.front();
    return detail::run_sweep(cells, proto.base.trials_per_cell, TableKind::demix, opts,
                             [&](const CellParams& c, index_t t) { return run_demix_trial(c, t, proto); });
}

inline PhaseTable run_demix_phase(const DemixGrid& grid, const RunOptions& opts = {}) {
    return run_demix_phase(std::span<const DemixGrid>(&grid, 1), opts);
}

// ---------------------------------------------------------------------------
// Phase boundary

struct BoundaryPoint {
    index_t s{0};
    std::optional<index_t> mu_at_level;  ///< empty when the slice never reaches the level
};

struct PhaseBoundary {
    CellParams group;  ///< s and mu are zeroed
    std::vector<BoundaryPoint> points;
    std::optional<double> slope;
    std::optional<double> intercept;

    std::optional<index_t> at(index_t s) const {
        for (const auto& p : points)
            if (p.s == s) return p.mu_at_level;
        return std::nullopt;
    }
};

/// For each (M, N, S, n, sigma) group and each s, the smallest grid mu whose
/// success fraction reaches `level`, plus the least-squares line through the
/// defined points.
inline std::vector<PhaseBoundary> fit_phase_boundary(const PhaseTable& table, double level = 0.5) {
    std::map<CellParams, std::map<index_t, std::optional<index_t>>> groups;
    for (const auto& a : table.cells) {
        CellParams g = a.cell;
        g.s = 0;
        g.mu = 0;
        auto& slot = groups[g][a.cell.s];
        if (a.success_fraction >= level && (!slot || a.cell.mu < *slot)) slot = a.cell.mu;
    }
    std::vector<PhaseBoundary> out;
    for (const auto& [g, per_s] : groups) {
        PhaseBoundary pb;
        pb.group = g;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (const auto& [s, mu] : per_s) {
            pb.points.push_back({s, mu});
            if (!mu) continue;
            const double x = static_cast<double>(s), y = static_cast<double>(*mu);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++cnt;
        }
        const double denom = cnt * sxx - sx * sx;
        if (cnt >= 2 && denom != 0.0) {
            pb.slope = (cnt * sxy - sx * sy) / denom;
            pb.intercept = (sy - *pb.slope * sx) / cnt;
        }
        out.push_back(std::move(pb));
    }
    return out;
}

}  // namespace hihtp

#endif  // HIHTP_EXPERIMENTS_HPP
