#pragma once

#include <compare>
#include <cstddef>
#include <vector>

// Pixel- and patch-coordinate types plus the conversions between them.
// An image of H x W pixels is partitioned into non-overlapping h x w cells;
// a pixel (x, y) lives in cell (r, c) = (floor(y/h), floor(x/w)). All box
// corners, pixel and patch alike, are inclusive.

namespace patchcue {

inline constexpr int kDefaultPatchSize = 28;

/// Image dimensions plus patch cell size. Construct via make_grid so the
/// image dimensions are always exact multiples of the patch size.
struct PatchGrid {
    int image_height = 0;                  // H
    int image_width = 0;                   // W
    int patch_height = kDefaultPatchSize;  // h
    int patch_width = kDefaultPatchSize;   // w

    int rows() const { return image_height / patch_height; }
    int cols() const { return image_width / patch_width; }
    long long cell_count() const { return 1LL * rows() * cols(); }

    bool operator==(const PatchGrid&) const = default;
};

struct PixelPoint {
    int x = 0;  // column
    int y = 0;  // row
};

/// Axis-aligned pixel box, corners inclusive. When `normalized` is set all
/// coordinates lie in [0,1] and are scaled by (W, H) before patch
/// conversion.
struct PixelBBox {
    double x1 = 0;
    double y1 = 0;
    double x2 = 0;
    double y2 = 0;
    bool normalized = false;

    bool operator==(const PixelBBox&) const = default;
};

struct PatchCoord {
    int r = 0;
    int c = 0;

    auto operator<=>(const PatchCoord&) const = default;
};

/// Rectangular patch region [(r1,c1), (r2,c2)], corners inclusive.
struct PatchBBox {
    int r1 = 0;
    int c1 = 0;
    int r2 = 0;
    int c2 = 0;

    long long cell_count() const { return 1LL * (r2 - r1 + 1) * (c2 - c1 + 1); }

    bool operator==(const PatchBBox&) const = default;
};

/// Set of patch cells, stored sorted and deduplicated.
class PatchSet {
  public:
    PatchSet() = default;
    explicit PatchSet(std::vector<PatchCoord> cells);

    const std::vector<PatchCoord>& cells() const { return cells_; }
    std::size_t size() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }
    bool contains(PatchCoord p) const;

    bool operator==(const PatchSet&) const = default;

  private:
    std::vector<PatchCoord> cells_;
};

/// Builds a grid for a raw image, rounding H and W up to the next multiple
/// of the patch size (conceptual padding; nothing is cropped).
/// Throws std::invalid_argument on non-positive input.
PatchGrid make_grid(int raw_height, int raw_width, int patch_h = kDefaultPatchSize,
                    int patch_w = kDefaultPatchSize);

/// (r, c) = (floor(y/h), floor(x/w)). Throws std::out_of_range when the
/// point lies outside the grid.
PatchCoord pixel_to_patch(PixelPoint p, const PatchGrid& grid);

/// Converts a pixel box to its patch-box representation by flooring both
/// corners. Normalized boxes are scaled by (W, H) first, with the scaled
/// coordinates clamped to the last valid pixel so x=1.0 does not spill into
/// a phantom column. Throws std::invalid_argument on inverted or
/// out-of-bounds boxes.
PatchBBox pixel_bbox_to_patch_bbox(const PixelBBox& b, const PatchGrid& grid);

/// The inclusive rectangle of cells covered by a patch box.
PatchSet expand_patch_set(const PatchBBox& pb);

/// Inverse mapping: the exact pixel footprint [(c1*w, r1*h), ((c2+1)*w-1,
/// (r2+1)*h-1)] of a patch box. Throws std::out_of_range when the box does
/// not fit the grid.
PixelBBox patch_bbox_to_pixel_bbox(const PatchBBox& pb, const PatchGrid& grid);

/// Intersection over union with continuous box-area semantics,
/// area = (x2-x1)*(y2-y1). Zero-area boxes score 1.0 iff identical, else
/// 0.0. Throws std::invalid_argument when one box is normalized and the
/// other is not, or when a box is inverted.
double iou(const PixelBBox& a, const PixelBBox& b);

/// Fraction of the grid covered by a patch box: cell count / (rows*cols).
double area_fraction(const PatchBBox& pb, const PatchGrid& grid);

/// True when every cell of the box lies inside the grid.
bool in_grid(const PatchBBox& pb, const PatchGrid& grid);

}  // namespace patchcue
