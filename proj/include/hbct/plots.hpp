#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hbct/scenario.hpp"

// Text and SVG renderings of scenario outputs: uncertainty histograms,
// compatibility-matrix heat tables and sweep curves.

namespace hbct {

struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<std::size_t> counts;

    std::size_t total() const {
        std::size_t t = 0;
        for (auto c : counts) {
            t += c;
        }
        return t;
    }
};

/// Equal-width bins over [min(0, min x), max(1, max x)]; every sample lands in a bin.
inline Histogram histogram(const std::vector<double>& xs, std::size_t bins = 20) {
    if (bins == 0) {
        throw InvalidArgument("histogram: need at least one bin");
    }
    Histogram h{0.0, 1.0, std::vector<std::size_t>(bins, 0)};
    for (double x : xs) {
        if (!std::isfinite(x)) {
            throw InvalidArgument("histogram: non-finite sample");
        }
        h.lo = std::min(h.lo, x);
        h.hi = std::max(h.hi, x);
    }
    const double width = (h.hi - h.lo) / static_cast<double>(bins);
    for (double x : xs) {
        auto b = static_cast<std::size_t>((x - h.lo) / width);
        h.counts[std::min(b, bins - 1)] += 1;
    }
    return h;
}

/// Named samples rendered into one overlaid histogram.
struct Series {
    std::string name;
    std::vector<double> values;
};

/// Bundle of results handed to `emit_plots`.
struct ReportSet {
    std::vector<ScenarioResult> runs;
    std::vector<SequentialResult> sequential;
    std::vector<SweepResult> sweeps;

    bool empty() const { return runs.empty() && sequential.empty() && sweeps.empty(); }
};

namespace plot_detail {

inline const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

inline std::string histogram_text(const std::vector<Series>& series, std::size_t bins) {
    std::vector<double> all;
    for (const auto& s : series) {
        all.insert(all.end(), s.values.begin(), s.values.end());
    }
    const auto range = histogram(all, bins);
    std::ostringstream os;
    os << "# uncertainty histogram, " << bins << " bins over [" << range.lo << ", " << range.hi << "]\n";
    os << std::setw(10) << "bin_lo";
    for (const auto& s : series) {
        os << std::setw(16) << s.name;
    }
    os << "\n";
    std::vector<Histogram> hs;
    for (const auto& s : series) {
        Histogram h{range.lo, range.hi, std::vector<std::size_t>(bins, 0)};
        const double width = (range.hi - range.lo) / static_cast<double>(bins);
        for (double x : s.values) {
            h.counts[std::min(static_cast<std::size_t>((x - range.lo) / width), bins - 1)] += 1;
        }
        hs.push_back(std::move(h));
    }
    for (std::size_t b = 0; b < bins; ++b) {
        os << std::setw(10) << std::fixed << std::setprecision(3)
           << range.lo + (range.hi - range.lo) * static_cast<double>(b) / static_cast<double>(bins);
        for (const auto& h : hs) {
            os << std::setw(16) << h.counts[b];
        }
        os << "\n";
    }
    os << std::setw(10) << "total";
    for (const auto& h : hs) {
        os << std::setw(16) << h.total();
    }
    os << "\n";
    return os.str();
}

inline std::string histogram_svg(const std::vector<Series>& series, std::size_t bins) {
    std::vector<double> all;
    for (const auto& s : series) {
        all.insert(all.end(), s.values.begin(), s.values.end());
    }
    const auto range = histogram(all, bins);
    const double W = 640, H = 360, pad = 40;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::size_t peak = 1;
    std::vector<Histogram> hs;
    for (const auto& s : series) {
        Histogram h{range.lo, range.hi, std::vector<std::size_t>(bins, 0)};
        const double width = (range.hi - range.lo) / static_cast<double>(bins);
        for (double x : s.values) {
            h.counts[std::min(static_cast<std::size_t>((x - range.lo) / width), bins - 1)] += 1;
        }
        peak = std::max(peak, *std::max_element(h.counts.begin(), h.counts.end()));
        hs.push_back(std::move(h));
    }
    const double bw = (W - 2 * pad) / static_cast<double>(bins);
    for (std::size_t k = 0; k < hs.size(); ++k) {
        const char* color = kColors[k % std::size(kColors)];
        for (std::size_t b = 0; b < bins; ++b) {
            const double h = (H - 2 * pad) * static_cast<double>(hs[k].counts[b]) / static_cast<double>(peak);
            os << "<rect x=\"" << pad + bw * static_cast<double>(b) << "\" y=\"" << H - pad - h << "\" width=\"" << bw
               << "\" height=\"" << h << "\" fill=\"" << color << "\" fill-opacity=\"0.45\"/>\n";
        }
        os << "<text x=\"" << pad + 10 << "\" y=\"" << pad + 16 * static_cast<double>(k) << "\" fill=\"" << color
           << "\" font-size=\"12\">" << series[k].name << "</text>\n";
    }
    os << "<text x=\"" << pad << "\" y=\"" << H - 10 << "\" font-size=\"11\">" << range.lo << "</text>\n";
    os << "<text x=\"" << W - pad << "\" y=\"" << H - 10 << "\" font-size=\"11\" text-anchor=\"end\">" << range.hi
       << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

inline std::string matrix_svg(const CompatMatrix& m) {
    const double cell = 70, pad = 50;
    const double side = pad + cell * static_cast<double>(m.n) + 10;
    double lo = 0.0, hi = 0.0;
    for (double v : m.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi - lo > 0 ? hi - lo : 1.0;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side << "\" height=\"" << side << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t j = 0; j < m.n; ++j) {
            const double t = (m.at(i, j) - lo) / span;
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - t)));
            const double x = pad + cell * static_cast<double>(j);
            const double y = pad + cell * static_cast<double>(i);
            os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
               << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"black\"/>\n";
            os << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 << "\" font-size=\"12\" text-anchor=\"middle\">"
               << std::fixed << std::setprecision(3) << m.at(i, j) << "</text>\n";
        }
        os << "<text x=\"" << pad - 6 << "\" y=\"" << pad + cell * (static_cast<double>(i) + 0.5)
           << "\" font-size=\"11\" text-anchor=\"end\">q" << m.generation_tags[i] << "</text>\n";
        os << "<text x=\"" << pad + cell * (static_cast<double>(i) + 0.5) << "\" y=\"" << pad - 8
           << "\" font-size=\"11\" text-anchor=\"middle\">g" << m.generation_tags[i] << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline std::string sweep_svg(const SweepResult& s) {
    const double W = 640, H = 360, pad = 50;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const std::size_t n = s.rows.size();
    auto x_at = [&](std::size_t i) {
        return n <= 1 ? W / 2 : pad + (W - 2 * pad) * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    auto y_at = [&](double v) { return H - pad - (H - 2 * pad) * std::clamp(v, 0.0, 1.0); };
    const std::pair<const char*, double SweepRow::*> lines[] = {{"self@1", &SweepRow::self_cmc1},
                                                                 {"cross@1", &SweepRow::cross_cmc1},
                                                                 {"self_mAP", &SweepRow::self_map},
                                                                 {"cross_mAP", &SweepRow::cross_map}};
    std::size_t k = 0;
    for (const auto& [name, field] : lines) {
        const char* color = kColors[k % std::size(kColors)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < n; ++i) {
            os << x_at(i) << "," << y_at(s.rows[i].*field) << " ";
        }
        os << "\"/>\n";
        os << "<text x=\"" << pad + 10 << "\" y=\"" << pad - 20 + 14 * static_cast<double>(k) << "\" fill=\"" << color
           << "\" font-size=\"12\">" << name << "</text>\n";
        ++k;
    }
    for (std::size_t i = 0; i < n; ++i) {
        os << "<text x=\"" << x_at(i) << "\" y=\"" << H - pad + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
           << s.rows[i].value << "</text>\n";
    }
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" font-size=\"12\" text-anchor=\"middle\">" << s.key
       << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

} // namespace plot_detail

/// Writes every figure the report set supports into `dir` and returns the paths
/// written. An empty set writes nothing and prints a warning to `warn`.
inline std::vector<std::filesystem::path> emit_plots(const ReportSet& reports, const std::filesystem::path& dir,
                                                     std::ostream& warn = std::cerr, std::size_t bins = 20) {
    std::vector<std::filesystem::path> written;
    if (reports.empty()) {
        warn << "warning: no reports to plot; nothing written\n";
        return written;
    }
    std::filesystem::create_directories(dir);
    auto emit = [&](const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        written.push_back(dir / name);
    };
    if (!reports.runs.empty()) {
        std::vector<Series> split{{"old_seen", {}}, {"old_unseen", {}}};
        std::vector<Series> gens{{"old_gallery", {}}, {"new_gallery", {}}};
        for (const auto& r : reports.runs) {
            split[0].values.insert(split[0].values.end(), r.old_seen_uncertainty.begin(), r.old_seen_uncertainty.end());
            split[1].values.insert(split[1].values.end(), r.old_unseen_uncertainty.begin(),
                                   r.old_unseen_uncertainty.end());
            gens[0].values.insert(gens[0].values.end(), r.old_gallery_uncertainty.begin(),
                                  r.old_gallery_uncertainty.end());
            gens[1].values.insert(gens[1].values.end(), r.new_gallery_uncertainty.begin(),
                                  r.new_gallery_uncertainty.end());
        }
        if (split[1].values.empty()) {
            split.pop_back();
        }
        emit("uncertainty_split.txt", plot_detail::histogram_text(split, bins));
        emit("uncertainty_split.svg", plot_detail::histogram_svg(split, bins));
        emit("uncertainty_generations.txt", plot_detail::histogram_text(gens, bins));
        emit("uncertainty_generations.svg", plot_detail::histogram_svg(gens, bins));
    }
    if (!reports.sequential.empty()) {
        std::vector<CompatMatrix> aligned;
        std::vector<CompatMatrix> baseline;
        for (const auto& s : reports.sequential) {
            aligned.push_back(s.aligned);
            baseline.push_back(s.baseline);
        }
        const auto ma = median_matrix(aligned);
        const auto mb = median_matrix(baseline);
        emit("matrix_aligned.txt", matrix_table(ma));
        emit("matrix_aligned.svg", plot_detail::matrix_svg(ma));
        emit("matrix_baseline.txt", matrix_table(mb));
        emit("matrix_baseline.svg", plot_detail::matrix_svg(mb));
    }
    for (const auto& s : reports.sweeps) {
        emit("sweep_" + s.key + ".txt", sweep_table(s));
        emit("sweep_" + s.key + ".svg", plot_detail::sweep_svg(s));
    }
    return written;
}

} // namespace hbct
