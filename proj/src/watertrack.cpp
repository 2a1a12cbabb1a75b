#include "watermap/watertrack.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

#include "watermap/errors.hpp"

namespace watermap {

namespace {

struct Grid {
    std::size_t w;
    std::size_t h;

    // Truncated 8-neighborhood; returns the count written into out.
    int neighbors(std::size_t cell, std::size_t* out) const {
        std::size_t x = cell % w;
        std::size_t y = cell / w;
        int count = 0;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                long nx = static_cast<long>(x) + dx;
                long ny = static_cast<long>(y) + dy;
                if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) ||
                    ny >= static_cast<long>(h))
                    continue;
                out[count++] = static_cast<std::size_t>(ny) * w +
                               static_cast<std::size_t>(nx);
            }
        }
        return count;
    }
};

void check_raster(const DensityRaster& raster) {
    if (raster.width < 1 || raster.height < 1)
        throw GridError("empty raster");
    if (raster.values.size() != raster.width * raster.height)
        throw ShapeError("raster value count does not match geometry");
    for (double v : raster.values)
        if (!std::isfinite(v) || v < 0.0)
            throw ShapeError("raster values must be finite and >= 0");
}

std::vector<std::size_t> descending_order(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (v[a] != v[b]) return v[a] > v[b];
        return a < b;
    });
    return order;
}

} // namespace

Segmentation water_track(const DensityRaster& raster) {
    check_raster(raster);
    const Grid grid{raster.width, raster.height};
    const std::vector<double>& v = raster.values;
    const std::size_t g = v.size();

    Segmentation seg;
    seg.width = raster.width;
    seg.height = raster.height;
    seg.labels.assign(g, 0);

    std::vector<std::size_t> order = descending_order(v);
    std::size_t nb[8];

    std::size_t pos = 0;
    while (pos < g) {
        std::size_t run_end = pos;
        while (run_end < g && v[order[run_end]] == v[order[pos]]) ++run_end;

        std::deque<std::size_t> pending(order.begin() + pos,
                                        order.begin() + run_end);
        std::size_t stalled = 0;
        while (!pending.empty()) {
            std::size_t c = pending.front();
            pending.pop_front();
            int count = grid.neighbors(c, nb);

            int best_label = 0;
            double best_density = 0.0;
            bool tie_with_unlabeled = false;
            for (int k = 0; k < count; ++k) {
                std::size_t m = nb[k];
                int lab = seg.labels[m];
                if (lab != 0) {
                    if (best_label == 0 || v[m] > best_density ||
                        (v[m] == best_density && lab < best_label)) {
                        best_label = lab;
                        best_density = v[m];
                    }
                } else if (v[m] >= v[c]) {
                    // Unlabeled neighbors above us cannot exist (they were
                    // processed first), so this is an equal-height tie.
                    tie_with_unlabeled = true;
                }
            }

            if (best_label != 0) {
                seg.labels[c] = best_label;
                stalled = 0;
            } else if (!tie_with_unlabeled) {
                seg.labels[c] = static_cast<int>(seg.peaks.size()) + 1;
                seg.peaks.push_back({c, v[c]});
                stalled = 0;
            } else {
                pending.push_back(c);
                ++stalled;
                if (stalled == pending.size()) {
                    // A full cycle made no progress: the run has no labeled
                    // border anywhere. Seed it from its first cell.
                    std::size_t s = pending.front();
                    pending.pop_front();
                    seg.labels[s] = static_cast<int>(seg.peaks.size()) + 1;
                    seg.peaks.push_back({s, v[s]});
                    stalled = 0;
                }
            }
        }
        pos = run_end;
    }
    return seg;
}

Segmentation steepest_ascent_oracle(const DensityRaster& raster) {
    check_raster(raster);
    const Grid grid{raster.width, raster.height};
    const std::vector<double>& v = raster.values;
    const std::size_t g = v.size();

    std::vector<std::size_t> next(g);
    std::size_t nb[8];
    for (std::size_t c = 0; c < g; ++c) {
        int count = grid.neighbors(c, nb);
        std::size_t best = c;
        double best_v = v[c];
        for (int k = 0; k < count; ++k) {
            std::size_t m = nb[k];
            if (v[m] > best_v || (v[m] == best_v && best != c && m < best)) {
                best = m;
                best_v = v[m];
            }
        }
        next[c] = best;
    }

    // Resolve every cell to its root with path shortening.
    std::vector<std::size_t> root(g);
    std::vector<std::size_t> stack;
    std::vector<char> resolved(g, 0);
    for (std::size_t c = 0; c < g; ++c) {
        if (resolved[c]) continue;
        std::size_t cur = c;
        stack.clear();
        while (!resolved[cur] && next[cur] != cur) {
            stack.push_back(cur);
            cur = next[cur];
        }
        std::size_t r = resolved[cur] ? root[cur] : cur;
        root[cur] = r;
        resolved[cur] = 1;
        for (std::size_t s : stack) {
            root[s] = r;
            resolved[s] = 1;
        }
    }

    std::vector<std::size_t> peak_cells;
    for (std::size_t c = 0; c < g; ++c)
        if (next[c] == c) peak_cells.push_back(c);
    std::sort(peak_cells.begin(), peak_cells.end(),
              [&](std::size_t a, std::size_t b) {
                  if (v[a] != v[b]) return v[a] > v[b];
                  return a < b;
              });

    Segmentation seg;
    seg.width = raster.width;
    seg.height = raster.height;
    seg.labels.assign(g, 0);
    std::vector<int> peak_label(g, 0);
    for (std::size_t k = 0; k < peak_cells.size(); ++k) {
        peak_label[peak_cells[k]] = static_cast<int>(k) + 1;
        seg.peaks.push_back({peak_cells[k], v[peak_cells[k]]});
    }
    for (std::size_t c = 0; c < g; ++c) seg.labels[c] = peak_label[root[c]];
    return seg;
}

std::vector<int> label_points(const Segmentation& seg,
                              const DensityRaster& geometry,
                              const Embedding& points) {
    if (seg.width != geometry.width || seg.height != geometry.height)
        throw ShapeError("segmentation and raster geometry disagree");
    if (!(geometry.cell_size > 0.0)) throw GridError("bad cell size");
    std::vector<int> labels(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        double fx = (points.x[i] - geometry.x0) / geometry.cell_size;
        double fy = (points.y[i] - geometry.y0) / geometry.cell_size;
        long ix = static_cast<long>(std::floor(fx));
        long iy = static_cast<long>(std::floor(fy));
        if (ix < -1 || iy < -1 || ix > static_cast<long>(seg.width) ||
            iy > static_cast<long>(seg.height))
            throw OutOfGridError("point " + std::to_string(i) +
                                 " lies more than one cell outside the grid");
        ix = std::clamp(ix, 0L, static_cast<long>(seg.width) - 1);
        iy = std::clamp(iy, 0L, static_cast<long>(seg.height) - 1);
        labels[i] = seg.labels[static_cast<std::size_t>(iy) * seg.width +
                               static_cast<std::size_t>(ix)];
    }
    return labels;
}

} // namespace watermap
