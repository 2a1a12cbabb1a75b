#pragma once

#include <vector>

#include "watermap/kde.hpp"
#include "watermap/matrix.hpp"

namespace watermap {

// Cluster labels are 1-based and ordered by peak density: label 1 owns the
// densest peak.
struct Segmentation {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<int> labels; // row-major, same layout as DensityRaster.values

    struct Peak {
        std::size_t cell = 0; // linear index
        double density = 0.0;
    };
    std::vector<Peak> peaks;

    std::size_t clusters() const { return peaks.size(); }
};

// Descending-density labeling: each cell takes the label of its densest
// already-labeled 8-neighbor; strict local maxima open new clusters; cells
// tying with unlabeled neighbors are deferred to the end of their
// equal-density run, and a fully stalled run is seeded from its first cell.
Segmentation water_track(const DensityRaster& raster);

// Brute-force hill climbing used to cross-check water_track on rasters with
// pairwise-distinct values. Ties go to the lowest linear cell index.
Segmentation steepest_ascent_oracle(const DensityRaster& raster);

// Label per point from its containing cell; overflow beyond one cell outside
// the grid raises OutOfGridError.
std::vector<int> label_points(const Segmentation& seg, const DensityRaster& geometry,
                              const Embedding& points);

} // namespace watermap
