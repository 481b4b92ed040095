#include "fedlab/cover.hpp"

#include <stdexcept>
#include <string>

namespace fedlab {
namespace {

std::size_t flat_size(const std::vector<std::size_t>& shape) {
  if (shape.empty()) {
    throw std::invalid_argument("cover shape must not be empty");
  }
  std::size_t d = 1;
  for (std::size_t s : shape) {
    if (s == 0) throw std::invalid_argument("cover shape has a zero dimension");
    d *= s;
  }
  return d;
}

void build_reverse_index(Cover& cover) {
  cover.covering.assign(cover.dim, {});
  for (std::uint32_t b = 0; b < cover.groups.size(); ++b) {
    for (std::uint32_t j : cover.groups[b]) {
      cover.covering[j].push_back(b);
    }
  }
}

}  // namespace

Cover build_cover(const std::vector<std::size_t>& shape, CoverPolicy policy) {
  Cover cover;
  cover.dim = flat_size(shape);
  if (policy == CoverPolicy::singleton) {
    cover.groups.resize(cover.dim);
    for (std::size_t j = 0; j < cover.dim; ++j) {
      cover.groups[j] = {static_cast<std::uint32_t>(j)};
    }
  } else {
    if (shape.size() != 2) {
      throw std::invalid_argument(
          "row_col cover requires exactly 2 dimensions, got " +
          std::to_string(shape.size()));
    }
    const std::size_t rows = shape[0];
    const std::size_t cols = shape[1];
    cover.groups.resize(rows + cols);
    for (std::size_t r = 0; r < rows; ++r) {
      cover.groups[r].reserve(cols);
      for (std::size_t c = 0; c < cols; ++c) {
        cover.groups[r].push_back(static_cast<std::uint32_t>(r * cols + c));
      }
    }
    for (std::size_t c = 0; c < cols; ++c) {
      auto& g = cover.groups[rows + c];
      g.reserve(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        g.push_back(static_cast<std::uint32_t>(r * cols + c));
      }
    }
  }
  build_reverse_index(cover);
  return cover;
}

CoverStats cover_stats(const Cover& cover) {
  CoverStats stats;
  stats.q = cover.groups.size();
  stats.fraction = cover.dim == 0
                       ? 0.0
                       : static_cast<double>(stats.q) /
                             static_cast<double>(cover.dim);
  return stats;
}

void validate_cover(const Cover& cover, std::size_t d) {
  for (const auto& group : cover.groups) {
    for (std::uint32_t j : group) {
      if (j >= d) {
        throw std::invalid_argument("coordinate " + std::to_string(j) +
                                    " out of range for dimension " +
                                    std::to_string(d));
      }
    }
  }
  std::vector<char> seen(d, 0);
  for (const auto& group : cover.groups) {
    for (std::uint32_t j : group) seen[j] = 1;
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (!seen[j]) {
      throw std::invalid_argument("coordinate " + std::to_string(j) +
                                  " uncovered");
    }
  }
}

CoverStats manifest_stats(const ShapeManifest& manifest) {
  std::size_t total_q = 0;
  std::size_t total_d = 0;
  for (const auto& shape : manifest) {
    const auto policy =
        shape.size() == 2 ? CoverPolicy::row_col : CoverPolicy::singleton;
    // Only the counts are needed; building the full index for huge layers
    // would be wasteful, so compute q and d directly.
    const std::size_t d = flat_size(shape);
    total_d += d;
    total_q += policy == CoverPolicy::row_col ? shape[0] + shape[1] : d;
  }
  CoverStats stats;
  stats.q = total_q;
  stats.fraction =
      total_d == 0 ? 0.0
                   : static_cast<double>(total_q) / static_cast<double>(total_d);
  return stats;
}

}  // namespace fedlab
