#pragma once

#include <cstddef>
#include <vector>

// Shape-adaptive cropping: pick the sub-image grid that best matches an
// image's resolution and aspect ratio, then lay out crop rectangles for the
// global view, the selected grid, and its 2x-subdivided finer scales.
namespace hvfa::sac {

struct ImageDims {
  long long height = 0;
  long long width = 0;
};

struct GridSpec {
  int rows = 1;  // n_h
  int cols = 1;  // n_w

  int count() const { return rows * cols; }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Every (rows, cols) with rows * cols <= max_subimages, ordered by sub-image
// count and then by rows. That order is also the tie-break order of
// select_grid.
class GridCatalog {
 public:
  GridCatalog(int max_subimages, int encoder_height, int encoder_width);

  int max_subimages() const { return max_subimages_; }
  int encoder_height() const { return encoder_height_; }
  int encoder_width() const { return encoder_width_; }
  const std::vector<GridSpec>& grids() const { return grids_; }
  bool contains(GridSpec g) const;

 private:
  int max_subimages_;
  int encoder_height_;
  int encoder_width_;
  std::vector<GridSpec> grids_;
};

struct Rect {
  long long top = 0;
  long long left = 0;
  long long height = 0;
  long long width = 0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct CropPlan {
  GridSpec grid;
  std::vector<Rect> rects;  // row-major over the grid
  int resize_height = 0;
  int resize_width = 0;
  int scale_index = 0;  // 0 = global view
};

struct GridScore {
  GridSpec grid;
  double resolution = 0.0;  // s_rr
  double shape = 0.0;       // s_ra
  double total() const { return resolution + shape; }
};

// IoU of two axis-parallel boxes anchored at the origin:
// min(h)·min(w) / (h_a·w_a + h_b·w_b - intersection). Throws DomainError on a
// nonpositive extent.
double iou_aligned(double h_a, double w_a, double h_b, double w_b);

// Resolution coherence: IoU of the image against the grid's encoder canvas.
double resolution_score(ImageDims image, GridSpec grid, const GridCatalog& catalog);
// Shape similarity: IoU of (cols·H/W, cols) against (rows, cols).
double shape_score(ImageDims image, GridSpec grid);

std::vector<GridScore> score_grids(ImageDims image, const GridCatalog& catalog);
GridSpec select_grid(ImageDims image, const GridCatalog& catalog);

// Rectangles with boundaries at the nearest integer to i·H/rows and
// j·W/cols (exact halves round down). Throws DegenerateInputError when the
// grid has more rows or columns than the image has pixels.
CropPlan crop_plan(ImageDims image, GridSpec grid, const GridCatalog& catalog, int scale_index = 0);

// [global 1x1, g*, 2g*] for local_scales == 2, plus 4g* for local_scales == 3.
std::vector<CropPlan> pyramid_plan(ImageDims image, const GridCatalog& catalog, int local_scales);

}  // namespace hvfa::sac
