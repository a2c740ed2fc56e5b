#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gravis/image.hpp"
#include "gravis/vgl.hpp"

namespace gravis {

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  int class_id = 0;
  GroupId source_id = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int image_size = 32;
  int num_classes = 1;
};

// Lesion-like synthetic sources: textured skin-tone background plus a few
// class-colored elliptical blobs with irregular boundaries.
struct SynthConfig {
  std::size_t num_sources = 200;
  int num_classes = 3;
  int image_size = 32;
  std::uint64_t seed = 0;
  int blob_count_lo = 1;
  int blob_count_hi = 3;
  double background_texture_amplitude = 12.0;  // in 8-bit pixel units
};

// Writes num_sources PPM files plus manifest.json into out_dir. Classes are
// assigned round-robin. Deterministic from the seed.
DatasetManifest generate_synthetic_dataset(const SynthConfig& cfg,
                                           const std::string& out_dir);

// A single source image without touching the filesystem.
Image synth_source_image(const SynthConfig& cfg, std::size_t source_index);

void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Loads every image of the manifest, resolving paths against the manifest's
// directory.
std::vector<Image> load_manifest_images(const DatasetManifest& manifest,
                                        const std::string& manifest_path);

}  // namespace gravis
