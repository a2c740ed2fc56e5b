#include "gravis/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gravis/errors.hpp"
#include "gravis/rng.hpp"
#include "json.hpp"

namespace gravis {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Rgb {
  double r, g, b;
};

// One palette entry per class, cycled beyond six classes.
const Rgb kPalette[6] = {
    {92, 58, 48},    // dark brown
    {160, 62, 58},   // reddish
    {88, 92, 122},   // blue-gray
    {62, 46, 40},    // near-black brown
    {116, 112, 60},  // olive
    {122, 70, 130},  // violet
};

struct Blob {
  double cx, cy;          // center, pixels
  double ax, ay;          // semi-axes, pixels
  double angle;           // orientation
  double wobble_amp[3];   // boundary irregularity harmonics 2, 3, 5
  double wobble_phase[3];
  Rgb color;
};

}  // namespace

Image synth_source_image(const SynthConfig& cfg, std::size_t source_index) {
  const int S = cfg.image_size;
  Rng rng(hash_seed(cfg.seed, 0x5E17, source_index));
  const int class_id = static_cast<int>(source_index % cfg.num_classes);

  // Skin-tone background with a low-frequency sinusoidal texture and a touch
  // of per-pixel noise.
  const double base_r = 224.0 + rng.uniform(-10.0, 10.0);
  const double base_g = 172.0 + rng.uniform(-10.0, 10.0);
  const double base_b = 150.0 + rng.uniform(-10.0, 10.0);
  struct Wave {
    double fx, fy, phase, amp;
  };
  Wave waves[3];
  for (Wave& w : waves) {
    w.fx = rng.uniform(0.5, 3.0) * 2.0 * kPi / S;
    w.fy = rng.uniform(0.5, 3.0) * 2.0 * kPi / S;
    w.phase = rng.uniform(0.0, 2.0 * kPi);
    w.amp = rng.uniform(0.3, 1.0);
  }

  const int blobs =
      cfg.blob_count_lo +
      static_cast<int>(rng.next_below(
          static_cast<std::uint64_t>(cfg.blob_count_hi - cfg.blob_count_lo + 1)));
  std::vector<Blob> blob_list;
  const Rgb base_color = kPalette[class_id % 6];
  for (int k = 0; k < blobs; ++k) {
    Blob b;
    b.cx = rng.uniform(0.25 * S, 0.75 * S);
    b.cy = rng.uniform(0.25 * S, 0.75 * S);
    b.ax = rng.uniform(S / 8.0, S / 3.0);
    b.ay = rng.uniform(S / 8.0, S / 3.0);
    b.angle = rng.uniform(0.0, kPi);
    for (int ww = 0; ww < 3; ++ww) {
      b.wobble_amp[ww] = rng.uniform(0.0, 0.15);
      b.wobble_phase[ww] = rng.uniform(0.0, 2.0 * kPi);
    }
    b.color = {std::clamp(base_color.r + rng.uniform(-15.0, 15.0), 0.0, 255.0),
               std::clamp(base_color.g + rng.uniform(-15.0, 15.0), 0.0, 255.0),
               std::clamp(base_color.b + rng.uniform(-15.0, 15.0), 0.0, 255.0)};
    blob_list.push_back(b);
  }

  const int harmonics[3] = {2, 3, 5};
  Image img(S, S);
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      double tex = 0.0;
      for (const Wave& w : waves)
        tex += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
      tex *= cfg.background_texture_amplitude / 3.0;
      const double noise =
          rng.uniform(-0.25, 0.25) * cfg.background_texture_amplitude;
      double r = base_r + tex + noise;
      double g = base_g + tex * 0.8 + noise;
      double b = base_b + tex * 0.7 + noise;

      for (const Blob& blob : blob_list) {
        const double dx = x - blob.cx;
        const double dy = y - blob.cy;
        const double ca = std::cos(blob.angle);
        const double sa = std::sin(blob.angle);
        const double u = (ca * dx + sa * dy) / blob.ax;
        const double v = (-sa * dx + ca * dy) / blob.ay;
        const double rho = std::sqrt(u * u + v * v);
        const double theta = std::atan2(v, u);
        double boundary = 1.0;
        for (int ww = 0; ww < 3; ++ww)
          boundary += blob.wobble_amp[ww] *
                      std::sin(harmonics[ww] * theta + blob.wobble_phase[ww]);
        // Soft edge roughly one pixel wide.
        const double edge = 1.0 / std::max(blob.ax, blob.ay);
        const double alpha =
            std::clamp((boundary - rho) / edge * 0.5 + 0.5, 0.0, 1.0);
        r = r * (1.0 - alpha) + blob.color.r * alpha;
        g = g * (1.0 - alpha) + blob.color.g * alpha;
        b = b * (1.0 - alpha) + blob.color.b * alpha;
      }
      img.at(x, y, 0) = static_cast<std::uint8_t>(std::lround(std::clamp(r, 0.0, 255.0)));
      img.at(x, y, 1) = static_cast<std::uint8_t>(std::lround(std::clamp(g, 0.0, 255.0)));
      img.at(x, y, 2) = static_cast<std::uint8_t>(std::lround(std::clamp(b, 0.0, 255.0)));
    }
  }
  return img;
}

DatasetManifest generate_synthetic_dataset(const SynthConfig& cfg,
                                           const std::string& out_dir) {
  if (cfg.num_classes < 1 || cfg.num_sources < static_cast<std::size_t>(cfg.num_classes))
    throw OutOfRange("need num_sources >= num_classes >= 1");
  if (cfg.blob_count_lo < 0 || cfg.blob_count_lo > cfg.blob_count_hi)
    throw OutOfRange("blob count range must satisfy 0 <= lo <= hi");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir + ": " + ec.message());

  DatasetManifest manifest;
  manifest.image_size = cfg.image_size;
  manifest.num_classes = cfg.num_classes;
  for (std::size_t i = 0; i < cfg.num_sources; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05zu.ppm", i);
    const Image img = synth_source_image(cfg, i);
    save_ppm(img, (std::filesystem::path(out_dir) / name).string());
    ManifestEntry entry;
    entry.path = name;
    entry.class_id = static_cast<int>(i % cfg.num_classes);
    entry.source_id = static_cast<GroupId>(i);
    manifest.entries.push_back(std::move(entry));
  }
  save_manifest(manifest,
                (std::filesystem::path(out_dir) / "manifest.json").string());
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["image_size"] = manifest.image_size;
  j["num_classes"] = manifest.num_classes;
  j["entries"] = nlohmann::json::array();
  for (const ManifestEntry& e : manifest.entries)
    j["entries"].push_back({{"path", e.path},
                            {"class_id", e.class_id},
                            {"source_id", e.source_id}});
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoFailure("short write to " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure(path + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.image_size = j.at("image_size").get<int>();
    m.num_classes = j.at("num_classes").get<int>();
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.path = je.at("path").get<std::string>();
      e.class_id = je.at("class_id").get<int>();
      e.source_id = je.at("source_id").get<GroupId>();
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure(path + ": " + e.what());
  }
  return m;
}

std::vector<Image> load_manifest_images(const DatasetManifest& manifest,
                                        const std::string& manifest_path) {
  const std::filesystem::path dir =
      std::filesystem::path(manifest_path).parent_path();
  std::vector<Image> images;
  images.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries)
    images.push_back(load_ppm((dir / e.path).string()));
  return images;
}

}  // namespace gravis
