#pragma once

#include <string>
#include <vector>

#include "watermap/matrix.hpp"
#include "watermap/similarity.hpp"

namespace watermap {

// Rasterized density on a square grid of square cells. values is row-major,
// index iy*width + ix, with iy increasing along +y. Cell (ix, iy) is centered
// at (x0 + (ix+0.5)*cell_size, y0 + (iy+0.5)*cell_size).
struct DensityRaster {
    std::size_t width = 0;
    std::size_t height = 0;
    double x0 = 0.0;
    double y0 = 0.0;
    double cell_size = 0.0;
    std::vector<double> values;

    double at(std::size_t ix, std::size_t iy) const {
        return values[iy * width + ix];
    }
    double sum() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
};

struct KdeBandwidths {
    std::vector<double> betas; // per-point precision, h_j^2 = 1/beta_j
    double ppx = 0.0;
    std::size_t degenerate_rows = 0;
};

// Per-point beta from the perplexity search over squared distances to all
// other embedded points. Degenerate rows fall back to the median beta of the
// successful rows.
KdeBandwidths kde_bandwidths(const Embedding& points,
                             const PerplexityTarget& target);

// All bandwidths equal to h (comparison mode).
KdeBandwidths fixed_bandwidths(std::size_t n, double h);

// f(c) = (A/n) sum_j (beta_j/pi) exp(-beta_j ||c - y_j||^2) at cell centers,
// A = cell area. The grid is square: the point bounding box is expanded by
// margin * max h_j on every side, then the longer extent is used for both
// axes, centered on the bounding box.
DensityRaster estimate_density(const Embedding& points, const KdeBandwidths& bw,
                               std::size_t grid_cells, double margin);

void write_pgm16(const std::string& path, const DensityRaster& raster);
void write_raster_values(const std::string& path, const DensityRaster& raster);
void write_raster_geometry(const std::string& path, const DensityRaster& raster);
DensityRaster read_raster(const std::string& values_path,
                          const std::string& geometry_path);

} // namespace watermap
