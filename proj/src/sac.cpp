#include "hvfa/sac.hpp"

#include <algorithm>
#include <string>

#include "hvfa/errors.hpp"

namespace hvfa::sac {

namespace {

// Nearest integer to num/den for nonnegative num and positive den, with exact
// halves rounded down.
long long round_ratio(long long num, long long den) {
  const long long q = num / den;
  const long long r = num % den;
  return 2 * r > den ? q + 1 : q;
}

void check_image(ImageDims image) {
  if (image.height < 1 || image.width < 1) {
    throw DomainError("image extents must be positive, got " + std::to_string(image.height) + "x" +
                      std::to_string(image.width));
  }
}

}  // namespace

GridCatalog::GridCatalog(int max_subimages, int encoder_height, int encoder_width)
    : max_subimages_(max_subimages), encoder_height_(encoder_height), encoder_width_(encoder_width) {
  if (max_subimages < 1) throw ConfigError("grid catalog needs max_subimages >= 1");
  if (encoder_height < 1 || encoder_width < 1) throw ConfigError("encoder input size must be positive");
  for (int count = 1; count <= max_subimages; ++count) {
    for (int rows = 1; rows <= count; ++rows) {
      if (count % rows == 0) grids_.push_back({rows, count / rows});
    }
  }
}

bool GridCatalog::contains(GridSpec g) const {
  return std::find(grids_.begin(), grids_.end(), g) != grids_.end();
}

double iou_aligned(double h_a, double w_a, double h_b, double w_b) {
  if (!(h_a > 0) || !(w_a > 0) || !(h_b > 0) || !(w_b > 0)) {
    throw DomainError("iou_aligned: box extents must be positive");
  }
  const double inter = std::min(h_a, h_b) * std::min(w_a, w_b);
  return inter / (h_a * w_a + h_b * w_b - inter);
}

double resolution_score(ImageDims image, GridSpec grid, const GridCatalog& catalog) {
  check_image(image);
  return iou_aligned(static_cast<double>(image.height), static_cast<double>(image.width),
                     static_cast<double>(grid.rows) * catalog.encoder_height(),
                     static_cast<double>(grid.cols) * catalog.encoder_width());
}

double shape_score(ImageDims image, GridSpec grid) {
  check_image(image);
  const double cols = grid.cols;
  return iou_aligned(cols * static_cast<double>(image.height) / static_cast<double>(image.width), cols,
                     static_cast<double>(grid.rows), cols);
}

std::vector<GridScore> score_grids(ImageDims image, const GridCatalog& catalog) {
  std::vector<GridScore> scores;
  scores.reserve(catalog.grids().size());
  for (const auto& g : catalog.grids()) {
    scores.push_back({g, resolution_score(image, g, catalog), shape_score(image, g)});
  }
  return scores;
}

GridSpec select_grid(ImageDims image, const GridCatalog& catalog) {
  const auto scores = score_grids(image, catalog);
  // Catalog order encodes the tie-break, so only a strictly better score wins.
  const GridScore* best = &scores.front();
  for (const auto& s : scores) {
    if (s.total() > best->total()) best = &s;
  }
  return best->grid;
}

CropPlan crop_plan(ImageDims image, GridSpec grid, const GridCatalog& catalog, int scale_index) {
  check_image(image);
  if (grid.rows < 1 || grid.cols < 1) throw DomainError("grid extents must be positive");
  if (grid.rows > image.height || grid.cols > image.width) {
    throw DegenerateInputError("grid " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                               " exceeds image pixels " + std::to_string(image.height) + "x" +
                               std::to_string(image.width));
  }
  CropPlan plan;
  plan.grid = grid;
  plan.resize_height = catalog.encoder_height();
  plan.resize_width = catalog.encoder_width();
  plan.scale_index = scale_index;
  plan.rects.reserve(static_cast<std::size_t>(grid.count()));
  for (int i = 0; i < grid.rows; ++i) {
    const long long top = round_ratio(i * image.height, grid.rows);
    const long long bottom = round_ratio((i + 1) * image.height, grid.rows);
    for (int j = 0; j < grid.cols; ++j) {
      const long long left = round_ratio(j * image.width, grid.cols);
      const long long right = round_ratio((j + 1) * image.width, grid.cols);
      plan.rects.push_back({top, left, bottom - top, right - left});
    }
  }
  return plan;
}

std::vector<CropPlan> pyramid_plan(ImageDims image, const GridCatalog& catalog, int local_scales) {
  if (local_scales != 2 && local_scales != 3) {
    throw ConfigError("pyramid_plan supports 2 or 3 local scales, got " + std::to_string(local_scales));
  }
  std::vector<CropPlan> plans;
  plans.push_back(crop_plan(image, {1, 1}, catalog, 0));
  GridSpec g = select_grid(image, catalog);
  for (int s = 1; s <= local_scales; ++s) {
    plans.push_back(crop_plan(image, g, catalog, s));
    g = {2 * g.rows, 2 * g.cols};
  }
  return plans;
}

}  // namespace hvfa::sac
