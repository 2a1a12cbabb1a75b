#pragma once

#include <string>
#include <vector>

#include "watermap/kde.hpp"
#include "watermap/matrix.hpp"
#include "watermap/parallel_tsne.hpp"
#include "watermap/watertrack.hpp"

namespace watermap::svg {

// Scatter of the embedding; optional per-point labels pick the point color.
void write_scatter(const std::string& path, const Embedding& emb,
                   const std::vector<int>* labels);

// Cost (left axis) and size (right axis) per epoch.
void write_trace(const std::string& path, const std::vector<TraceRecord>& trace);

// Grayscale heatmap of the density raster.
void write_heatmap(const std::string& path, const DensityRaster& raster);

// Heatmap with cluster boundary cells marked.
void write_overlay(const std::string& path, const DensityRaster& raster,
                   const Segmentation& seg);

// Mean normalized entropy per neighborhood size (log x axis).
void write_entropy(const std::string& path,
                   const std::vector<std::pair<std::size_t, double>>& table);

} // namespace watermap::svg
