#ifndef HIHTP_CONFIG_HPP
#define HIHTP_CONFIG_HPP

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hihtp/experiments.hpp"
#include "hihtp/serialize.hpp"

namespace hihtp {

/// Sweep description read from a JSON config file.
///
///     {
///       "name": "paper-n50",
///       "trials_per_cell": 100,
///       "base_seed": 2024,
///       "solver": {"max_iters": 10},
///       "grids": [{"n": [50], "sigma": [5, 10, 15], "s": {"from": 1, "to": 7},
///                  "mu": {"from": 10, "to": 120, "step": 10}}]
///     }
///
/// Integer lists are arrays or inclusive {"from", "to", "step"} ranges. List
/// keys at the top level are defaults for every entry of "grids"; without
/// "grids" the top level is the only grid. Demixing sweeps add "M", "N", "S"
/// and optionally "mixing" ("gaussian" or "identity").
struct SweepConfig {
    std::string name{"phase"};
    std::vector<PhaseGrid> grids;
    std::vector<DemixGrid> demix_grids;
    MixingModel mixing{MixingModel::gaussian};
};

inline std::vector<index_t> int_list_from_json(const json& j) {
    if (j.is_array()) return j.get<std::vector<index_t>>();
    if (j.is_number_integer()) return {j.get<index_t>()};
    require(j.is_object(), "integer list must be an array, a number or a range object");
    const index_t from = j.at("from").get<index_t>();
    const index_t to = j.at("to").get<index_t>();
    const index_t step = j.value("step", index_t{1});
    require(step >= 1, "range step must be positive");
    std::vector<index_t> out;
    for (index_t v = from; v <= to; v += step) out.push_back(v);
    return out;
}

inline json int_list_to_json(const std::vector<index_t>& v) { return json(v); }

inline SweepConfig sweep_config_from_json(const json& j) {
    SweepConfig cfg;
    cfg.name = j.value("name", cfg.name);
    PhaseGrid proto;
    proto.trials_per_cell = j.value("trials_per_cell", proto.trials_per_cell);
    proto.base_seed = j.value("base_seed", proto.base_seed);
    proto.success_tol = j.value("success_tol", proto.success_tol);
    if (j.contains("solver")) proto.solver = solver_config_from_json(j.at("solver"), proto.solver);
    if (j.contains("mixing")) {
        const auto m = j.at("mixing").get<std::string>();
        require(m == "gaussian" || m == "identity", "mixing must be 'gaussian' or 'identity'");
        cfg.mixing = m == "identity" ? MixingModel::identity : MixingModel::gaussian;
    }

    const bool demix = j.contains("M") || j.contains("N") || j.contains("S") ||
                       (j.contains("grids") && j.at("grids").is_array() && !j.at("grids").empty() &&
                        j.at("grids").front().contains("M"));

    auto read_grid = [&](const json& g) {
        auto pick = [&](const char* key) -> std::vector<index_t> {
            if (g.contains(key)) return int_list_from_json(g.at(key));
            if (j.contains(key)) return int_list_from_json(j.at(key));
            return {};
        };
        PhaseGrid grid = proto;
        grid.n_values = pick("n");
        grid.sigma_values = pick("sigma");
        grid.s_values = pick("s");
        grid.mu_values = pick("mu");
        if (!demix) {
            cfg.grids.push_back(std::move(grid));
            return;
        }
        DemixGrid dg{std::move(grid), pick("M"), pick("N"), pick("S"), cfg.mixing};
        cfg.demix_grids.push_back(std::move(dg));
    };

    if (j.contains("grids")) {
        for (const auto& g : j.at("grids")) read_grid(g);
    } else {
        read_grid(json::object());
    }
    return cfg;
}

inline json to_json(const SweepConfig& cfg) {
    const PhaseGrid* proto = !cfg.grids.empty() ? &cfg.grids.front()
                             : !cfg.demix_grids.empty() ? &cfg.demix_grids.front().base
                                                        : nullptr;
    json j{{"name", cfg.name}};
    if (proto) {
        j["trials_per_cell"] = proto->trials_per_cell;
        j["base_seed"] = proto->base_seed;
        j["success_tol"] = proto->success_tol;
        j["solver"] = to_json(proto->solver);
    }
    json grids = json::array();
    for (const auto& g : cfg.grids)
        grids.push_back(json{{"n", g.n_values}, {"sigma", g.sigma_values}, {"s", g.s_values}, {"mu", g.mu_values}});
    for (const auto& g : cfg.demix_grids)
        grids.push_back(json{{"n", g.base.n_values}, {"sigma", g.base.sigma_values}, {"s", g.base.s_values},
                             {"mu", g.base.mu_values}, {"M", g.M_values}, {"N", g.N_values}, {"S", g.S_values}});
    if (!cfg.demix_grids.empty()) j["mixing"] = cfg.mixing == MixingModel::identity ? "identity" : "gaussian";
    j["grids"] = grids;
    return j;
}

/// Directory holding the bundled configs (paper-n50, paper-n350, ...).
inline std::filesystem::path bundled_config_dir() {
#ifdef HIHTP_CONFIG_DIR
    return HIHTP_CONFIG_DIR;
#else
    return "configs";
#endif
}

/// `name_or_path` is a file path, or the name of a bundled config without
/// its `.json` suffix.
inline SweepConfig load_sweep_config(const std::string& name_or_path) {
    std::filesystem::path path(name_or_path);
    if (!std::filesystem::exists(path)) {
        const auto bundled = bundled_config_dir() / (name_or_path + ".json");
        require(std::filesystem::exists(bundled), "config not found: " + name_or_path);
        path = bundled;
    }
    std::ifstream in(path);
    require(in.good(), "cannot read config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed config: ") + e.what());
    }
    return sweep_config_from_json(j);
}

}  // namespace hihtp

#endif  // HIHTP_CONFIG_HPP
