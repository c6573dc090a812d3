#include "philautia/heatmap.hpp"

#include "philautia/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace philautia {

namespace {

constexpr int kCellW = 72;
constexpr int kCellH = 36;

struct Rgb {
    int r, g, b;
};

constexpr Rgb kBlue{0x3b, 0x4c, 0xc0};
constexpr Rgb kWhite{0xff, 0xff, 0xff};
constexpr Rgb kRed{0xb4, 0x04, 0x26};

int lerp_channel(int a, int b, double u) {
    return int(std::lround(a + (b - a) * u));
}

// Diverging blue-white-red ramp over t in [0, 1], white at 0.5.
Rgb ramp(double t) {
    t = std::clamp(t, 0.0, 1.0);
    if (t <= 0.5) {
        const double u = t / 0.5;
        return Rgb{lerp_channel(kBlue.r, kWhite.r, u), lerp_channel(kBlue.g, kWhite.g, u),
                   lerp_channel(kBlue.b, kWhite.b, u)};
    }
    const double u = (t - 0.5) / 0.5;
    return Rgb{lerp_channel(kWhite.r, kRed.r, u), lerp_channel(kWhite.g, kRed.g, u),
               lerp_channel(kWhite.b, kRed.b, u)};
}

std::string rgb_attr(const Rgb& c) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "rgb(%d,%d,%d)", c.r, c.g, c.b);
    return buf;
}

std::string num2(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

// Value -> ramp position. Centered scales put 0 at white; min-max scales
// stretch the observed range. Flat input sits at white.
struct Scale {
    double lo = 0.0;
    double hi = 1.0;
    bool centered = false;

    double position(double v) const {
        if (centered) {
            const double limit = std::max(std::abs(lo), std::abs(hi));
            return limit <= 0.0 ? 0.5 : 0.5 + v / (2.0 * limit);
        }
        return hi <= lo ? 0.5 : (v - lo) / (hi - lo);
    }
};

std::string render(const std::vector<ModelId>& generators, const std::vector<ModelId>& evaluators,
                   const std::vector<double>& values, bool centered) {
    if (generators.empty() || evaluators.empty())
        throw ValidationError("heatmap needs a non-empty matrix");
    for (const double v : values)
        if (!std::isfinite(v)) throw ValidationError("heatmap values must be finite");

    const std::size_t rows = generators.size();
    const std::size_t cols = evaluators.size();

    Scale scale;
    scale.centered = centered;
    scale.lo = *std::min_element(values.begin(), values.end());
    scale.hi = *std::max_element(values.begin(), values.end());

    std::size_t max_gen_len = 0;
    for (const ModelId& g : generators) max_gen_len = std::max(max_gen_len, g.value.size());
    std::size_t max_eval_len = 0;
    for (const ModelId& e : evaluators) max_eval_len = std::max(max_eval_len, e.value.size());

    const int left = 24 + 7 * int(max_gen_len);
    const int top = 28 + 6 * int(max_eval_len);
    const int grid_w = int(cols) * kCellW;
    const int grid_h = int(rows) * kCellH;
    const int legend_w = 288;
    const int legend_y = top + grid_h + 28;
    const int width = left + std::max(grid_w, legend_w) + 24 + 5 * int(max_eval_len);
    const int height = legend_y + 48;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
           " " + std::to_string(height) + "\" font-family=\"sans-serif\">\n";
    svg += "<defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"0\" x2=\"1\" y2=\"0\">\n";
    for (int s = 0; s <= 10; ++s) {
        svg += "<stop offset=\"" + std::to_string(s * 10) + "%\" stop-color=\"" +
               rgb_attr(ramp(s / 10.0)) + "\"/>\n";
    }
    svg += "</linearGradient></defs>\n";
    svg += "<rect width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
           "\" fill=\"white\"/>\n";

    for (std::size_t j = 0; j < cols; ++j) {
        const int cx = left + int(j) * kCellW + kCellW / 2;
        const int cy = top - 8;
        svg += "<text x=\"" + std::to_string(cx) + "\" y=\"" + std::to_string(cy) +
               "\" font-size=\"12\" text-anchor=\"start\" transform=\"rotate(-40 " +
               std::to_string(cx) + " " + std::to_string(cy) + ")\">" +
               xml_escape(evaluators[j].value) + "</text>\n";
    }
    for (std::size_t i = 0; i < rows; ++i) {
        const int cy = top + int(i) * kCellH + kCellH / 2 + 4;
        svg += "<text x=\"" + std::to_string(left - 8) + "\" y=\"" + std::to_string(cy) +
               "\" font-size=\"12\" text-anchor=\"end\">" + xml_escape(generators[i].value) +
               "</text>\n";
    }

    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = values[i * cols + j];
            const double t = scale.position(v);
            const int x = left + int(j) * kCellW;
            const int y = top + int(i) * kCellH;
            svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(kCellW) + "\" height=\"" +
                   std::to_string(kCellH) + "\" fill=\"" + rgb_attr(ramp(t)) +
                   "\" stroke=\"white\" stroke-width=\"1\"/>\n";
            const char* ink = (t < 0.2 || t > 0.8) ? "white" : "black";
            svg += "<text x=\"" + std::to_string(x + kCellW / 2) + "\" y=\"" +
                   std::to_string(y + kCellH / 2 + 4) + "\" font-size=\"12\" text-anchor=\"middle\" fill=\"" +
                   ink + "\">" + num2(v) + "</text>\n";
        }
    }

    // legend: the ramp with its endpoints and midpoint labeled
    const double mid = scale.centered ? 0.0 : (scale.lo + scale.hi) / 2.0;
    const double lo_label = scale.centered ? -std::max(std::abs(scale.lo), std::abs(scale.hi)) : scale.lo;
    const double hi_label = scale.centered ? std::max(std::abs(scale.lo), std::abs(scale.hi)) : scale.hi;
    svg += "<rect x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(legend_y) +
           "\" width=\"" + std::to_string(legend_w) + "\" height=\"12\" fill=\"url(#ramp)\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
    svg += "<text x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(legend_y + 28) +
           "\" font-size=\"11\" text-anchor=\"start\">" + num2(lo_label) + "</text>\n";
    svg += "<text x=\"" + std::to_string(left + legend_w / 2) + "\" y=\"" +
           std::to_string(legend_y + 28) + "\" font-size=\"11\" text-anchor=\"middle\">" +
           num2(mid) + "</text>\n";
    svg += "<text x=\"" + std::to_string(left + legend_w) + "\" y=\"" +
           std::to_string(legend_y + 28) + "\" font-size=\"11\" text-anchor=\"end\">" +
           num2(hi_label) + "</text>\n";
    svg += "</svg>\n";
    return svg;
}

std::size_t write_file(const std::string& payload, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << payload;
    out.flush();
    if (!out) throw IoError("write failed: " + path);
    return payload.size();
}

} // namespace

std::string heatmap_svg(const ScoreMatrix& m) {
    return render(m.generators, m.evaluators, m.values, false);
}

std::string heatmap_svg(const StandardizedMatrix& m) {
    return render(m.generators, m.evaluators, m.values, true);
}

std::size_t render_heatmap_svg(const ScoreMatrix& m, const std::string& path) {
    return write_file(heatmap_svg(m), path);
}

std::size_t render_heatmap_svg(const StandardizedMatrix& m, const std::string& path) {
    return write_file(heatmap_svg(m), path);
}

} // namespace philautia
