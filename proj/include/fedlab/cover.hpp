#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fedlab {

// A cover partitions nothing — it is a family of index groups whose union
// must be every model coordinate.  Groups may overlap.  Compressed adaptive
// state keeps one accumulator per group instead of one per coordinate.
struct Cover {
  // groups[b] lists the flat coordinate indices in group b, ascending.
  std::vector<std::vector<std::uint32_t>> groups;
  // covering[j] lists the ids of the groups containing coordinate j,
  // ascending (the precomputed reverse index used by the per-coordinate
  // min reduction).
  std::vector<std::vector<std::uint32_t>> covering;
  // Total coordinate count the cover was built for.
  std::size_t dim = 0;
};

enum class CoverPolicy { singleton, row_col };

// Builds a cover for a tensor of the given shape (flattened row-major).
//   singleton — one group per coordinate (exact, q = d).
//   row_col   — one group per row plus one per column; requires the shape to
//               have exactly two dimensions.
// Throws std::invalid_argument on an empty/zero shape or a policy/shape
// mismatch.
Cover build_cover(const std::vector<std::size_t>& shape, CoverPolicy policy);

struct CoverStats {
  std::size_t q = 0;      // number of groups
  double fraction = 0.0;  // q / d, the compressed-state fraction
};

CoverStats cover_stats(const Cover& cover);

// Verifies every coordinate in [0, d) belongs to at least one group and no
// group references an out-of-range coordinate.  Throws std::invalid_argument
// naming the first offending coordinate (e.g. "coordinate 1 uncovered").
void validate_cover(const Cover& cover, std::size_t d);

// A list of tensor shapes describing a whole model; used to estimate the
// aggregate compressed-state fraction across layers.
using ShapeManifest = std::vector<std::vector<std::size_t>>;

// Sum of group counts over per-layer covers (row_col for 2-D layers,
// singleton otherwise) divided by the total coordinate count.
CoverStats manifest_stats(const ShapeManifest& manifest);

}  // namespace fedlab
