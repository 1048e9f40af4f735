#ifndef HIHTP_PLOT_HPP
#define HIHTP_PLOT_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hihtp/experiments.hpp"

namespace hihtp {

namespace detail {

// White (0) to dark blue (1).
inline std::string shade(double v) {
    const auto mix = [v](int lo, int hi) { return static_cast<int>(std::lround(lo + (hi - lo) * v)); };
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(255, 8), mix(255, 48), mix(255, 107));
    return buf;
}

inline std::string group_title(const CellParams& g) {
    std::ostringstream t;
    if (g.N > 1 || g.M > 1 || g.S > 1) t << "M=" << g.M << ", N=" << g.N << ", S=" << g.S << ", ";
    t << "n=" << g.n << ", sigma=" << g.sigma;
    return t.str();
}

inline std::string group_filename(const CellParams& g) {
    std::ostringstream f;
    f << "heatmap_";
    if (g.N > 1 || g.M > 1 || g.S > 1) f << "M" << g.M << "_N" << g.N << "_S" << g.S << "_";
    f << "n" << g.n << "_sigma" << g.sigma << ".svg";
    return f.str();
}

}  // namespace detail

/// Success-fraction heatmap of one (n, sigma) slice as a standalone SVG:
/// s along the horizontal axis, mu increasing upwards.
inline std::string render_heatmap_svg(const std::vector<CellAggregate>& cells, const std::string& title) {
    std::set<index_t> s_set, mu_set;
    std::map<std::pair<index_t, index_t>, double> value;
    for (const auto& c : cells) {
        require(c.success_fraction >= 0.0 && c.success_fraction <= 1.0, "success fraction outside [0, 1]");
        s_set.insert(c.cell.s);
        mu_set.insert(c.cell.mu);
        value[{c.cell.s, c.cell.mu}] = c.success_fraction;
    }
    const std::vector<index_t> s_vals(s_set.begin(), s_set.end());
    const std::vector<index_t> mu_vals(mu_set.begin(), mu_set.end());
    const int cw = 40, ch = 24, left = 60, top = 40, bar = 16;
    const int grid_w = cw * static_cast<int>(s_vals.size());
    const int grid_h = ch * static_cast<int>(mu_vals.size());
    const int width = left + grid_w + 90, height = top + grid_h + 60;

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << left + grid_w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << title
        << "</text>\n";
    for (std::size_t xi = 0; xi < s_vals.size(); ++xi) {
        for (std::size_t yi = 0; yi < mu_vals.size(); ++yi) {
            const int x = left + cw * static_cast<int>(xi);
            const int y = top + ch * static_cast<int>(mu_vals.size() - 1 - yi);
            auto it = value.find({s_vals[xi], mu_vals[yi]});
            if (it == value.end()) {
                svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch
                    << "\" fill=\"#dddddd\"/>\n";
                continue;
            }
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\""
                << detail::shade(it->second) << "\"><title>s=" << s_vals[xi] << ", mu=" << mu_vals[yi]
                << ": " << it->second << "</title></rect>\n";
        }
    }
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << grid_w << "\" height=\"" << grid_h
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (std::size_t xi = 0; xi < s_vals.size(); ++xi)
        svg << "<text x=\"" << left + cw * static_cast<int>(xi) + cw / 2 << "\" y=\"" << top + grid_h + 15
            << "\" text-anchor=\"middle\">" << s_vals[xi] << "</text>\n";
    for (std::size_t yi = 0; yi < mu_vals.size(); ++yi)
        svg << "<text x=\"" << left - 6 << "\" y=\"" << top + ch * static_cast<int>(mu_vals.size() - 1 - yi) + ch / 2 + 4
            << "\" text-anchor=\"end\">" << mu_vals[yi] << "</text>\n";
    svg << "<text x=\"" << left + grid_w / 2 << "\" y=\"" << top + grid_h + 35 << "\" text-anchor=\"middle\">s</text>\n"
        << "<text x=\"15\" y=\"" << top + grid_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
        << top + grid_h / 2 << ")\">mu</text>\n";

    // Colour bar.
    const int bx = left + grid_w + 20;
    const int steps = 10;
    for (int i = 0; i < steps; ++i) {
        const double v = (i + 0.5) / steps;
        svg << "<rect x=\"" << bx << "\" y=\"" << top + grid_h - (i + 1) * grid_h / steps << "\" width=\"" << bar
            << "\" height=\"" << grid_h / steps + 1 << "\" fill=\"" << detail::shade(v) << "\"/>\n";
    }
    svg << "<rect x=\"" << bx << "\" y=\"" << top << "\" width=\"" << bar << "\" height=\"" << grid_h
        << "\" fill=\"none\" stroke=\"black\"/>\n"
        << "<text x=\"" << bx + bar + 4 << "\" y=\"" << top + 4 << "\">1</text>\n"
        << "<text x=\"" << bx + bar + 4 << "\" y=\"" << top + grid_h + 4 << "\">0</text>\n"
        << "</svg>\n";
    return svg.str();
}

/// Writes one heatmap per (M, N, S, n, sigma) group of `table` into `dir`
/// and returns the file paths in group order.
inline std::vector<std::filesystem::path> write_heatmaps(const PhaseTable& table, const std::filesystem::path& dir) {
    std::map<CellParams, std::vector<CellAggregate>> groups;
    for (const auto& a : table.cells) {
        CellParams g = a.cell;
        g.s = 0;
        g.mu = 0;
        groups[g].push_back(a);
    }
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> out;
    for (const auto& [g, cells] : groups) {
        const auto path = dir / detail::group_filename(g);
        std::ofstream f(path);
        require(f.good(), "cannot write " + path.string());
        f << render_heatmap_svg(cells, detail::group_title(g));
        out.push_back(path);
    }
    return out;
}

}  // namespace hihtp

#endif  // HIHTP_PLOT_HPP
