#include "watermap/kde.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "watermap/errors.hpp"
#include "watermap/io.hpp"
#include "watermap/kernels.hpp"

namespace watermap {

KdeBandwidths kde_bandwidths(const Embedding& points,
                             const PerplexityTarget& target) {
    const std::size_t n = points.size();
    if (n < 3) throw ShapeError("bandwidth search needs at least 3 points");
    if (target.ppx > static_cast<double>(n - 1))
        throw ConfigError("perplexity exceeds n-1 candidates");

    KdeBandwidths bw;
    bw.ppx = target.ppx;
    bw.betas.assign(n, 0.0);
    std::vector<std::size_t> failed;

    const auto& ops = kern::active();
    std::vector<double> feat(2 * n);
    for (std::size_t j = 0; j < n; ++j) {
        feat[j] = points.x[j];
        feat[n + j] = points.y[j];
    }
    std::vector<double> d2(n);
    std::vector<double> cand(n - 1);
    double point[2];
    for (std::size_t i = 0; i < n; ++i) {
        point[0] = points.x[i];
        point[1] = points.y[i];
        ops.sqdist_row(point, feat.data(), n, 2, d2.data());
        for (std::size_t j = 0, c = 0; j < n; ++j)
            if (j != i) cand[c++] = d2[j];
        try {
            bw.betas[i] = beta_search(cand, target).beta;
        } catch (const DegenerateRowError&) {
            failed.push_back(i);
        }
    }

    if (!failed.empty()) {
        bw.degenerate_rows = failed.size();
        std::vector<double> ok;
        ok.reserve(n - failed.size());
        std::size_t f = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (f < failed.size() && failed[f] == i) {
                ++f;
            } else {
                ok.push_back(bw.betas[i]);
            }
        }
        if (ok.empty())
            throw DegenerateRowError("every bandwidth row is degenerate");
        std::sort(ok.begin(), ok.end());
        double median = (ok.size() % 2 == 1)
                            ? ok[ok.size() / 2]
                            : 0.5 * (ok[ok.size() / 2 - 1] + ok[ok.size() / 2]);
        for (std::size_t i : failed) bw.betas[i] = median;
    }
    return bw;
}

KdeBandwidths fixed_bandwidths(std::size_t n, double h) {
    if (!(h > 0.0) || !std::isfinite(h))
        throw ConfigError("fixed bandwidth must be finite and > 0");
    KdeBandwidths bw;
    bw.betas.assign(n, 1.0 / (h * h));
    return bw;
}

DensityRaster estimate_density(const Embedding& points, const KdeBandwidths& bw,
                               std::size_t grid_cells, double margin) {
    const std::size_t n = points.size();
    if (n == 0) throw ShapeError("no points");
    if (bw.betas.size() != n)
        throw ShapeError("bandwidth count does not match point count");
    if (grid_cells < 1) throw GridError("grid needs at least 1 cell per axis");
    if (!(margin >= 0.0) || !std::isfinite(margin))
        throw GridError("margin must be finite and >= 0");
    double beta_min = bw.betas[0];
    for (double b : bw.betas) {
        if (!(b > 0.0) || !std::isfinite(b))
            throw ConfigError("bandwidth precisions must be finite and > 0");
        beta_min = std::min(beta_min, b);
    }
    const double hmax = 1.0 / std::sqrt(beta_min);

    auto [xmin_it, xmax_it] = std::minmax_element(points.x.begin(), points.x.end());
    auto [ymin_it, ymax_it] = std::minmax_element(points.y.begin(), points.y.end());
    double pad = margin * hmax;
    double ext_x = (*xmax_it - *xmin_it) + 2.0 * pad;
    double ext_y = (*ymax_it - *ymin_it) + 2.0 * pad;
    double side = std::max(ext_x, ext_y);
    if (!(side > 0.0)) throw GridError("grid extent is empty");

    DensityRaster raster;
    raster.width = grid_cells;
    raster.height = grid_cells;
    raster.cell_size = side / static_cast<double>(grid_cells);
    raster.x0 = 0.5 * (*xmin_it + *xmax_it) - 0.5 * side;
    raster.y0 = 0.5 * (*ymin_it + *ymax_it) - 0.5 * side;
    raster.values.assign(grid_cells * grid_cells, 0.0);

    const double area = raster.cell_size * raster.cell_size;
    const double scale = area / (static_cast<double>(n) * std::numbers::pi);
    const auto& ops = kern::active();
    for (std::size_t iy = 0; iy < grid_cells; ++iy) {
        double cy = raster.y0 + (static_cast<double>(iy) + 0.5) * raster.cell_size;
        for (std::size_t ix = 0; ix < grid_cells; ++ix) {
            double cx =
                raster.x0 + (static_cast<double>(ix) + 0.5) * raster.cell_size;
            raster.values[iy * grid_cells + ix] =
                scale * ops.kde_cell(cx, cy, points.x.data(), points.y.data(),
                                     bw.betas.data(), n);
        }
    }
    return raster;
}

void write_pgm16(const std::string& path, const DensityRaster& raster) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    double vmax = 0.0;
    for (double v : raster.values) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;
    out << "P2\n" << raster.width << ' ' << raster.height << "\n65535\n";
    // PGM rows go top to bottom; our iy axis points up.
    for (std::size_t r = 0; r < raster.height; ++r) {
        std::size_t iy = raster.height - 1 - r;
        for (std::size_t ix = 0; ix < raster.width; ++ix) {
            long q = std::lround(raster.at(ix, iy) / vmax * 65535.0);
            if (ix) out << ' ';
            out << q;
        }
        out << '\n';
    }
    if (!out) throw IoError(path + ": write failed");
}

void write_raster_values(const std::string& path, const DensityRaster& raster) {
    Matrix m(raster.height, raster.width);
    for (std::size_t iy = 0; iy < raster.height; ++iy)
        for (std::size_t ix = 0; ix < raster.width; ++ix)
            m(iy, ix) = raster.at(ix, iy);
    io::write_csv_matrix(path, m, "");
}

void write_raster_geometry(const std::string& path, const DensityRaster& raster) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << "x0,y0,cell_size,width,height\n";
    out << io::format_double(raster.x0) << ',' << io::format_double(raster.y0)
        << ',' << io::format_double(raster.cell_size) << ',' << raster.width
        << ',' << raster.height << '\n';
    if (!out) throw IoError(path + ": write failed");
}

DensityRaster read_raster(const std::string& values_path,
                          const std::string& geometry_path) {
    Matrix geom = io::read_csv_matrix(geometry_path, true);
    if (geom.rows() != 1 || geom.cols() != 5)
        throw ParseError(geometry_path + ": expected one row of x0,y0,cell_size,width,height");
    DensityRaster raster;
    raster.x0 = geom(0, 0);
    raster.y0 = geom(0, 1);
    raster.cell_size = geom(0, 2);
    raster.width = static_cast<std::size_t>(geom(0, 3));
    raster.height = static_cast<std::size_t>(geom(0, 4));
    if (raster.width < 1 || raster.height < 1 || !(raster.cell_size > 0.0))
        throw ParseError(geometry_path + ": bad grid geometry");

    Matrix vals = io::read_csv_matrix(values_path, false);
    if (vals.rows() != raster.height || vals.cols() != raster.width)
        throw ParseError(values_path + ": values shape does not match geometry");
    raster.values.assign(raster.width * raster.height, 0.0);
    for (std::size_t iy = 0; iy < raster.height; ++iy)
        for (std::size_t ix = 0; ix < raster.width; ++ix) {
            double v = vals(iy, ix);
            if (!(v >= 0.0))
                throw ParseError(values_path + ": negative density value");
            raster.values[iy * raster.width + ix] = v;
        }
    return raster;
}

} // namespace watermap
