#include "watermap/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "watermap/errors.hpp"
#include "watermap/io.hpp"

namespace watermap::svg {

namespace {

const char* const kPalette[] = {
    "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#eeca3b",
    "#b279a2", "#ff9da6", "#9d755d", "#bab0ac", "#2f4b7c", "#a05195",
};
constexpr int kPaletteSize = 12;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

struct Frame {
    double xmin, xmax, ymin, ymax;
    double px0, px1, py0, py1; // pixel box; py0 is the TOP edge

    double sx(double x) const {
        return px0 + (x - xmin) / (xmax - xmin) * (px1 - px0);
    }
    double sy(double y) const {
        return py1 - (y - ymin) / (ymax - ymin) * (py1 - py0);
    }
};

void pad_range(double& lo, double& hi) {
    if (hi <= lo) {
        lo -= 0.5;
        hi += 0.5;
    } else {
        double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
}

} // namespace

void write_scatter(const std::string& path, const Embedding& emb,
                   const std::vector<int>* labels) {
    if (labels && labels->size() != emb.size())
        throw ShapeError("label count does not match point count");
    auto out = open_out(path);
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
    if (emb.size()) {
        auto [xa, xb] = std::minmax_element(emb.x.begin(), emb.x.end());
        auto [ya, yb] = std::minmax_element(emb.y.begin(), emb.y.end());
        xmin = *xa;
        xmax = *xb;
        ymin = *ya;
        ymax = *yb;
    }
    pad_range(xmin, xmax);
    pad_range(ymin, ymax);
    Frame f{xmin, xmax, ymin, ymax, 10, 590, 10, 590};
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" "
           "viewBox=\"0 0 600 600\">\n";
    out << "<rect width=\"600\" height=\"600\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < emb.size(); ++i) {
        const char* color = "#4c78a8";
        if (labels) {
            int lab = (*labels)[i];
            color = kPalette[((lab % kPaletteSize) + kPaletteSize) % kPaletteSize];
        }
        out << "<circle cx=\"" << num(f.sx(emb.x[i])) << "\" cy=\""
            << num(f.sy(emb.y[i])) << "\" r=\"2\" fill=\"" << color
            << "\" fill-opacity=\"0.7\"/>\n";
    }
    out << "</svg>\n";
}

void write_trace(const std::string& path, const std::vector<TraceRecord>& trace) {
    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"400\" "
           "viewBox=\"0 0 800 400\">\n";
    out << "<rect width=\"800\" height=\"400\" fill=\"white\"/>\n";
    if (!trace.empty()) {
        double cmin = trace[0].avg_cost, cmax = cmin;
        double smin = trace[0].avg_size, smax = smin;
        for (const auto& r : trace) {
            cmin = std::min(cmin, r.avg_cost);
            cmax = std::max(cmax, r.avg_cost);
            smin = std::min(smin, r.avg_size);
            smax = std::max(smax, r.avg_size);
        }
        pad_range(cmin, cmax);
        pad_range(smin, smax);
        double emax = static_cast<double>(trace.back().epoch);
        Frame fc{1.0, std::max(emax, 2.0), cmin, cmax, 60, 740, 20, 360};
        Frame fs{1.0, std::max(emax, 2.0), smin, smax, 60, 740, 20, 360};
        auto polyline = [&](const Frame& f, bool size_axis, const char* color) {
            out << "<polyline fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.5\" points=\"";
            for (const auto& r : trace)
                out << num(f.sx(static_cast<double>(r.epoch))) << ','
                    << num(f.sy(size_axis ? r.avg_size : r.avg_cost)) << ' ';
            out << "\"/>\n";
        };
        polyline(fc, false, "#4c78a8");
        polyline(fs, true, "#e45756");
        out << "<text x=\"60\" y=\"380\" font-size=\"12\" fill=\"#4c78a8\">avg_cost "
            << io::format_double(trace.back().avg_cost) << "</text>\n";
        out << "<text x=\"400\" y=\"380\" font-size=\"12\" fill=\"#e45756\">avg_size "
            << io::format_double(trace.back().avg_size) << "</text>\n";
    }
    out << "</svg>\n";
}

namespace {

void emit_cells(std::ofstream& out, const DensityRaster& raster, double px,
                double vmax) {
    for (std::size_t iy = 0; iy < raster.height; ++iy) {
        for (std::size_t ix = 0; ix < raster.width; ++ix) {
            double v = raster.at(ix, iy);
            unsigned level =
                static_cast<unsigned>(std::lround(v / vmax * 255.0)) & 0xffu;
            if (level <= 2) continue; // background stays black
            char color[8];
            std::snprintf(color, sizeof(color), "#%02x%02x%02x", level, level,
                          level);
            out << "<rect x=\"" << num(ix * px) << "\" y=\""
                << num((raster.height - 1 - iy) * px) << "\" width=\""
                << num(px + 0.1) << "\" height=\"" << num(px + 0.1)
                << "\" fill=\"" << color << "\"/>\n";
        }
    }
}

} // namespace

void write_heatmap(const std::string& path, const DensityRaster& raster) {
    auto out = open_out(path);
    double vmax = 0.0;
    for (double v : raster.values) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;
    double px = 600.0 / static_cast<double>(std::max(raster.width, raster.height));
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" "
           "viewBox=\"0 0 600 600\">\n";
    out << "<rect width=\"600\" height=\"600\" fill=\"black\"/>\n";
    emit_cells(out, raster, px, vmax);
    out << "</svg>\n";
}

void write_overlay(const std::string& path, const DensityRaster& raster,
                   const Segmentation& seg) {
    if (seg.width != raster.width || seg.height != raster.height)
        throw ShapeError("segmentation and raster shape disagree");
    auto out = open_out(path);
    double vmax = 0.0;
    for (double v : raster.values) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;
    double px = 600.0 / static_cast<double>(std::max(raster.width, raster.height));
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" "
           "viewBox=\"0 0 600 600\">\n";
    out << "<rect width=\"600\" height=\"600\" fill=\"black\"/>\n";
    emit_cells(out, raster, px, vmax);
    const std::size_t w = seg.width;
    const std::size_t h = seg.height;
    for (std::size_t iy = 0; iy < h; ++iy) {
        for (std::size_t ix = 0; ix < w; ++ix) {
            int lab = seg.labels[iy * w + ix];
            bool border = (ix + 1 < w && seg.labels[iy * w + ix + 1] != lab) ||
                          (iy + 1 < h && seg.labels[(iy + 1) * w + ix] != lab);
            if (!border) continue;
            out << "<rect x=\"" << num(ix * px) << "\" y=\""
                << num((h - 1 - iy) * px) << "\" width=\"" << num(px + 0.1)
                << "\" height=\"" << num(px + 0.1)
                << "\" fill=\"#e45756\" fill-opacity=\"0.8\"/>\n";
        }
    }
    out << "</svg>\n";
}

void write_entropy(const std::string& path,
                   const std::vector<std::pair<std::size_t, double>>& table) {
    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"400\" "
           "viewBox=\"0 0 600 400\">\n";
    out << "<rect width=\"600\" height=\"400\" fill=\"white\"/>\n";
    if (!table.empty()) {
        double xmin = std::log10(static_cast<double>(table.front().first));
        double xmax = std::log10(static_cast<double>(table.back().first));
        Frame f{xmin, std::max(xmax, xmin + 1e-9), 0.0, 1.05, 60, 560, 20, 360};
        out << "<polyline fill=\"none\" stroke=\"#4c78a8\" stroke-width=\"1.5\" "
               "points=\"";
        for (const auto& [size, mean] : table)
            out << num(f.sx(std::log10(static_cast<double>(size)))) << ','
                << num(f.sy(mean)) << ' ';
        out << "\"/>\n";
        for (const auto& [size, mean] : table)
            out << "<circle cx=\"" << num(f.sx(std::log10(static_cast<double>(size))))
                << "\" cy=\"" << num(f.sy(mean)) << "\" r=\"3\" fill=\"#4c78a8\"/>\n";
        out << "<text x=\"60\" y=\"380\" font-size=\"12\">normalized entropy vs "
               "neighborhood size (log scale)</text>\n";
    }
    out << "</svg>\n";
}

} // namespace watermap::svg
