#include "gravis/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gravis/errors.hpp"

namespace gravis {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Working representation between pipeline stages: float RGB on the 0..255
// scale, clamped back to bytes only once at the end.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // w*h*3

  FloatImage(int w, int h)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  float& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Crop a rectangle of the source and bilinearly resize it to size x size.
FloatImage crop_resize(const Image& src, int cx, int cy, int cw, int ch,
                       int size) {
  FloatImage out(size, size);
  const double sx = static_cast<double>(cw) / size;
  const double sy = static_cast<double>(ch) / size;
  for (int y = 0; y < size; ++y) {
    const double fy = cy + (y + 0.5) * sy - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(fy)), cy, cy + ch - 1);
    const int y1 = std::min(y0 + 1, cy + ch - 1);
    const double wy = std::clamp(fy - y0, 0.0, 1.0);
    for (int x = 0; x < size; ++x) {
      const double fx = cx + (x + 0.5) * sx - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(fx)), cx, cx + cw - 1);
      const int x1 = std::min(x0 + 1, cx + cw - 1);
      const double wx = std::clamp(fx - x0, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double top =
            src.at(x0, y0, c) * (1.0 - wx) + src.at(x1, y0, c) * wx;
        const double bot =
            src.at(x0, y1, c) * (1.0 - wx) + src.at(x1, y1, c) * wx;
        out.at(x, y, c) = static_cast<float>(top * (1.0 - wy) + bot * wy);
      }
    }
  }
  return out;
}

void flip_inplace(FloatImage& img) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width / 2; ++x)
      for (int c = 0; c < 3; ++c)
        std::swap(img.at(x, y, c), img.at(img.width - 1 - x, y, c));
}

// Bilinear sample with symmetric reflection outside the frame.
float sample_reflect(const FloatImage& img, double fx, double fy, int c) {
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double wx = fx - x0;
  const double wy = fy - y0;
  const int xa = reflect_index(x0, img.width);
  const int xb = reflect_index(x0 + 1, img.width);
  const int ya = reflect_index(y0, img.height);
  const int yb = reflect_index(y0 + 1, img.height);
  const double top = img.at(xa, ya, c) * (1.0 - wx) + img.at(xb, ya, c) * wx;
  const double bot = img.at(xa, yb, c) * (1.0 - wx) + img.at(xb, yb, c) * wx;
  return static_cast<float>(top * (1.0 - wy) + bot * wy);
}

FloatImage rotate(const FloatImage& img, double degrees) {
  FloatImage out(img.width, img.height);
  const double rad = degrees * kPi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double cxm = (img.width - 1) / 2.0;
  const double cym = (img.height - 1) / 2.0;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double dx = x - cxm;
      const double dy = y - cym;
      const double sxp = cxm + cs * dx + sn * dy;   // inverse rotation
      const double syp = cym - sn * dx + cs * dy;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = sample_reflect(img, sxp, syp, c);
    }
  }
  return out;
}

double luma(float r, float g, float b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

void color_jitter(FloatImage& img, double brightness, double contrast,
                  double saturation) {
  const std::size_t npix = static_cast<std::size_t>(img.width) * img.height;
  for (float& v : img.data) v = static_cast<float>(v * brightness);
  double mean_gray = 0.0;
  for (std::size_t p = 0; p < npix; ++p)
    mean_gray += luma(img.data[p * 3], img.data[p * 3 + 1], img.data[p * 3 + 2]);
  mean_gray /= static_cast<double>(npix);
  for (std::size_t p = 0; p < npix; ++p) {
    for (int c = 0; c < 3; ++c) {
      float& v = img.data[p * 3 + c];
      v = static_cast<float>(mean_gray + (v - mean_gray) * contrast);
    }
    const double l =
        luma(img.data[p * 3], img.data[p * 3 + 1], img.data[p * 3 + 2]);
    for (int c = 0; c < 3; ++c) {
      float& v = img.data[p * 3 + c];
      v = static_cast<float>(l + (v - l) * saturation);
    }
  }
}

void gaussian_blur(FloatImage& img, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    sum += kernel[k + radius];
  }
  for (double& k : kernel) k /= sum;

  FloatImage tmp(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] * img.at(reflect_index(x + k, img.width), y, c);
        tmp.at(x, y, c) = static_cast<float>(acc);
      }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] * tmp.at(x, reflect_index(y + k, img.height), c);
        img.at(x, y, c) = static_cast<float>(acc);
      }
}

Image quantize(const FloatImage& img) {
  Image out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.pixels[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(static_cast<double>(img.data[i]), 0.0, 255.0)));
  return out;
}

Image plain_resize_view(const Image& src, const AugmentationSpec& spec) {
  if (src.width < spec.output_size || src.height < spec.output_size)
    throw ImageTooSmall("source " + std::to_string(src.width) + "x" +
                        std::to_string(src.height) + " is below output size " +
                        std::to_string(spec.output_size));
  if (src.width == spec.output_size && src.height == spec.output_size) return src;
  return resize_bilinear(src, spec.output_size, spec.output_size);
}

}  // namespace

void AugmentationSpec::validate() const {
  if (!(crop_scale_lo > 0.0) || crop_scale_lo > crop_scale_hi || crop_scale_hi > 1.0)
    throw OutOfRange("crop_scale range must satisfy 0 < lo <= hi <= 1");
  if (flip_probability < 0.0 || flip_probability > 1.0)
    throw OutOfRange("flip_probability outside [0,1]");
  if (rotation_max_degrees < 0.0) throw OutOfRange("negative rotation_max_degrees");
  if (color_jitter_strength < 0.0) throw OutOfRange("negative color_jitter_strength");
  if (blur_probability < 0.0 || blur_probability > 1.0)
    throw OutOfRange("blur_probability outside [0,1]");
  if (!(blur_sigma_lo > 0.0) || blur_sigma_lo > blur_sigma_hi)
    throw OutOfRange("blur_sigma range must satisfy 0 < lo <= hi");
  if (output_size <= 0) throw OutOfRange("output_size must be positive");
}

void EnlargedBatch::validate_group_counts(std::size_t views_per_group) const {
  std::vector<std::size_t> counts;
  for (GroupId g : groups) {
    if (counts.size() <= g) counts.resize(g + 1, 0);
    ++counts[g];
  }
  for (std::size_t g = 0; g < counts.size(); ++g)
    if (counts[g] != 0 && counts[g] != views_per_group)
      throw ShapeMismatch("group " + std::to_string(g) + " occurs " +
                          std::to_string(counts[g]) + " times, expected " +
                          std::to_string(views_per_group));
}

Image augment_view(const Image& img, const AugmentationSpec& spec, Rng& stream) {
  return augment_view(img, spec, stream, nullptr);
}

Image augment_view(const Image& img, const AugmentationSpec& spec, Rng& stream,
                   ViewProvenance* prov) {
  spec.validate();
  if (img.width < spec.output_size || img.height < spec.output_size)
    throw ImageTooSmall("source " + std::to_string(img.width) + "x" +
                        std::to_string(img.height) + " is below output size " +
                        std::to_string(spec.output_size));

  // Draw order is fixed; every parameter is consumed from the stream exactly
  // once so provenance stays stable across spec edits.
  const double scale = stream.uniform(spec.crop_scale_lo, spec.crop_scale_hi);
  const int cw = std::clamp(
      static_cast<int>(std::lround(img.width * std::sqrt(scale))), 1, img.width);
  const int ch = std::clamp(
      static_cast<int>(std::lround(img.height * std::sqrt(scale))), 1, img.height);
  const int cx = static_cast<int>(stream.next_below(img.width - cw + 1));
  const int cy = static_cast<int>(stream.next_below(img.height - ch + 1));
  const bool flipped = stream.bernoulli(spec.flip_probability);
  const double angle =
      stream.uniform(-spec.rotation_max_degrees, spec.rotation_max_degrees);
  const double s = spec.color_jitter_strength;
  const double brightness = stream.uniform(1.0 - s, 1.0 + s);
  const double contrast = stream.uniform(1.0 - s, 1.0 + s);
  const double saturation = stream.uniform(1.0 - s, 1.0 + s);
  const bool blurred = stream.bernoulli(spec.blur_probability);
  const double sigma = stream.uniform(spec.blur_sigma_lo, spec.blur_sigma_hi);

  FloatImage work = crop_resize(img, cx, cy, cw, ch, spec.output_size);
  if (flipped) flip_inplace(work);
  if (angle != 0.0) work = rotate(work, angle);
  if (s > 0.0) color_jitter(work, brightness, contrast, saturation);
  if (blurred) gaussian_blur(work, sigma);

  if (prov) {
    prov->crop_scale = scale;
    prov->crop_x = cx;
    prov->crop_y = cy;
    prov->crop_w = cw;
    prov->crop_h = ch;
    prov->flipped = flipped;
    prov->angle_degrees = angle;
    prov->brightness = brightness;
    prov->contrast = contrast;
    prov->saturation = saturation;
    prov->blurred = blurred;
    prov->blur_sigma = blurred ? sigma : 0.0;
  }
  return quantize(work);
}

EnlargedBatch build_enlarged_batch(const std::vector<Image>& sources,
                                   std::size_t n_aug,
                                   const AugmentationSpec& spec,
                                   std::uint64_t master_seed) {
  if (sources.empty()) throw DatasetTooSmall("no source images given");
  if (n_aug == 1)
    throw InvalidN("N = 1 leaves anchors without positive pairs; use 0 or >= 2");
  spec.validate();

  EnlargedBatch batch;
  const std::size_t per_group = (n_aug == 0) ? 2 : n_aug;
  batch.views.reserve(sources.size() * per_group);
  batch.groups.reserve(sources.size() * per_group);
  batch.provenance.reserve(sources.size() * per_group);

  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (n_aug == 0) {
      const Image view = plain_resize_view(sources[i], spec);
      for (std::size_t j = 0; j < 2; ++j) {
        ViewProvenance prov;
        prov.source_index = i;
        prov.view_index = j;
        prov.crop_w = sources[i].width;
        prov.crop_h = sources[i].height;
        batch.views.push_back(view);
        batch.groups.push_back(static_cast<GroupId>(i));
        batch.provenance.push_back(prov);
      }
    } else {
      for (std::size_t j = 0; j < n_aug; ++j) {
        Rng stream(hash_seed(master_seed, i, j));
        ViewProvenance prov;
        prov.source_index = i;
        prov.view_index = j;
        batch.views.push_back(augment_view(sources[i], spec, stream, &prov));
        batch.groups.push_back(static_cast<GroupId>(i));
        batch.provenance.push_back(prov);
      }
    }
  }
  return batch;
}

EnlargedBatch shuffle_batch(const EnlargedBatch& batch, Rng& stream) {
  std::vector<std::size_t> perm(batch.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) {
    const std::size_t j = stream.next_below(i);
    std::swap(perm[i - 1], perm[j]);
  }
  EnlargedBatch out;
  out.views.reserve(batch.size());
  out.groups.reserve(batch.size());
  out.provenance.reserve(batch.size());
  for (std::size_t k : perm) {
    out.views.push_back(batch.views[k]);
    out.groups.push_back(batch.groups[k]);
    out.provenance.push_back(batch.provenance[k]);
  }
  return out;
}

}  // namespace gravis
