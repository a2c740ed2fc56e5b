#pragma once

#include <cstdint>
#include <vector>

#include "gravis/image.hpp"
#include "gravis/rng.hpp"
#include "gravis/vgl.hpp"

namespace gravis {

struct AugmentationSpec {
  double crop_scale_lo = 0.3;   // area fraction
  double crop_scale_hi = 1.0;
  double flip_probability = 0.5;
  double rotation_max_degrees = 45.0;
  double color_jitter_strength = 0.4;  // max fractional shift per channel op
  double blur_probability = 0.5;
  double blur_sigma_lo = 0.1;
  double blur_sigma_hi = 2.0;
  int output_size = 32;  // square

  void validate() const;
};

// The parameters actually sampled for one view; kept so any view can be
// re-derived and audited.
struct ViewProvenance {
  std::size_t source_index = 0;
  std::size_t view_index = 0;
  double crop_scale = 1.0;
  int crop_x = 0;
  int crop_y = 0;
  int crop_w = 0;
  int crop_h = 0;
  bool flipped = false;
  double angle_degrees = 0.0;
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  bool blurred = false;
  double blur_sigma = 0.0;
};

struct EnlargedBatch {
  std::vector<Image> views;
  std::vector<GroupId> groups;
  std::vector<ViewProvenance> provenance;

  std::size_t size() const { return views.size(); }
  // Checks each group id occurs exactly views_per_group times.
  void validate_group_counts(std::size_t views_per_group) const;
};

// One stochastic view: area-scaled crop + resize, horizontal flip, rotation
// (bilinear, reflected borders), color jitter, optional gaussian blur.
// Deterministic given the stream state. Throws ImageTooSmall when the source
// is smaller than the output size.
Image augment_view(const Image& img, const AugmentationSpec& spec, Rng& stream);

// augment_view plus the record of what was sampled.
Image augment_view(const Image& img, const AugmentationSpec& spec, Rng& stream,
                   ViewProvenance* prov);

// N >= 2: every source yields N views, group id floor(k / N). N == 0: every
// source yields 2 byte-identical unaugmented (resize-only) views. N == 1 is
// rejected with InvalidN. Per-view streams derive from
// hash(master_seed, source_index, view_index).
EnlargedBatch build_enlarged_batch(const std::vector<Image>& sources,
                                   std::size_t n_aug,
                                   const AugmentationSpec& spec,
                                   std::uint64_t master_seed);

// One uniform permutation applied jointly to views, groups and provenance.
EnlargedBatch shuffle_batch(const EnlargedBatch& batch, Rng& stream);

}  // namespace gravis
