#include "patchcue/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace patchcue {

namespace {

void check_box_shape(const PixelBBox& b, const char* who) {
    if (b.x1 > b.x2 || b.y1 > b.y2) {
        throw std::invalid_argument(std::string(who) + ": inverted pixel box");
    }
    if (b.normalized && (b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > 1.0 || b.y2 > 1.0)) {
        throw std::invalid_argument(std::string(who) +
                                    ": normalized box coordinates must lie in [0,1]");
    }
}

}  // namespace

PatchSet::PatchSet(std::vector<PatchCoord> cells) : cells_(std::move(cells)) {
    std::sort(cells_.begin(), cells_.end());
    cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
}

bool PatchSet::contains(PatchCoord p) const {
    return std::binary_search(cells_.begin(), cells_.end(), p);
}

PatchGrid make_grid(int raw_height, int raw_width, int patch_h, int patch_w) {
    if (raw_height <= 0 || raw_width <= 0 || patch_h <= 0 || patch_w <= 0) {
        throw std::invalid_argument("make_grid: all dimensions must be positive");
    }
    PatchGrid g;
    g.patch_height = patch_h;
    g.patch_width = patch_w;
    g.image_height = ((raw_height + patch_h - 1) / patch_h) * patch_h;
    g.image_width = ((raw_width + patch_w - 1) / patch_w) * patch_w;
    return g;
}

PatchCoord pixel_to_patch(PixelPoint p, const PatchGrid& grid) {
    if (p.x < 0 || p.y < 0 || p.x >= grid.image_width || p.y >= grid.image_height) {
        throw std::out_of_range("pixel_to_patch: point outside grid");
    }
    return {p.y / grid.patch_height, p.x / grid.patch_width};
}

PatchBBox pixel_bbox_to_patch_bbox(const PixelBBox& b, const PatchGrid& grid) {
    check_box_shape(b, "pixel_bbox_to_patch_bbox");
    double x1 = b.x1, y1 = b.y1, x2 = b.x2, y2 = b.y2;
    if (b.normalized) {
        x1 *= grid.image_width;
        x2 *= grid.image_width;
        y1 *= grid.image_height;
        y2 *= grid.image_height;
        // A max coordinate of exactly 1.0 scales to W (or H), one past the
        // last pixel; clamp into the image.
        x1 = std::min(x1, double(grid.image_width - 1));
        x2 = std::min(x2, double(grid.image_width - 1));
        y1 = std::min(y1, double(grid.image_height - 1));
        y2 = std::min(y2, double(grid.image_height - 1));
    } else if (x1 < 0.0 || y1 < 0.0 || x2 > grid.image_width - 1 ||
               y2 > grid.image_height - 1) {
        throw std::invalid_argument("pixel_bbox_to_patch_bbox: box outside grid");
    }
    PatchBBox pb;
    pb.r1 = int(std::floor(y1 / grid.patch_height));
    pb.c1 = int(std::floor(x1 / grid.patch_width));
    pb.r2 = int(std::floor(y2 / grid.patch_height));
    pb.c2 = int(std::floor(x2 / grid.patch_width));
    return pb;
}

PatchSet expand_patch_set(const PatchBBox& pb) {
    if (pb.r1 > pb.r2 || pb.c1 > pb.c2) {
        throw std::invalid_argument("expand_patch_set: inverted patch box");
    }
    std::vector<PatchCoord> cells;
    cells.reserve(std::size_t(pb.cell_count()));
    for (int r = pb.r1; r <= pb.r2; ++r) {
        for (int c = pb.c1; c <= pb.c2; ++c) {
            cells.push_back({r, c});
        }
    }
    return PatchSet(std::move(cells));
}

PixelBBox patch_bbox_to_pixel_bbox(const PatchBBox& pb, const PatchGrid& grid) {
    if (pb.r1 > pb.r2 || pb.c1 > pb.c2 || !in_grid(pb, grid)) {
        throw std::out_of_range("patch_bbox_to_pixel_bbox: patch box outside grid");
    }
    PixelBBox b;
    b.x1 = double(pb.c1) * grid.patch_width;
    b.y1 = double(pb.r1) * grid.patch_height;
    b.x2 = double(pb.c2 + 1) * grid.patch_width - 1;
    b.y2 = double(pb.r2 + 1) * grid.patch_height - 1;
    return b;
}

double iou(const PixelBBox& a, const PixelBBox& b) {
    if (a.normalized != b.normalized) {
        throw std::invalid_argument("iou: mixed normalized/absolute boxes");
    }
    check_box_shape(a, "iou");
    check_box_shape(b, "iou");
    const double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
    const double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
    if (area_a == 0.0 || area_b == 0.0) {
        return a == b ? 1.0 : 0.0;
    }
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (area_a + area_b - inter);
}

double area_fraction(const PatchBBox& pb, const PatchGrid& grid) {
    return double(pb.cell_count()) / double(grid.cell_count());
}

bool in_grid(const PatchBBox& pb, const PatchGrid& grid) {
    return pb.r1 >= 0 && pb.c1 >= 0 && pb.r1 <= pb.r2 && pb.c1 <= pb.c2 &&
           pb.r2 < grid.rows() && pb.c2 < grid.cols();
}

}  // namespace patchcue
