#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "nvskit/image.hpp"
#include "nvskit/rasterizer.hpp"

namespace nvskit {

/// Band half-width in instance-id units. 0.25 ids equals 0.5 / n_objects in
/// the [-1, 1] mask encoding.
inline constexpr double kDefaultRemovalBand = 0.25;

/// Paints white every pixel whose de-normalized predicted mask value lies
/// within +-band of instance_id. rgb is [0,1] RGB; mask_hat is single
/// channel in [-1, 1].
inline ImageF remove_object(const ImageF& rgb, const ImageF& mask_hat, int instance_id, int n_objects,
                            double band = kDefaultRemovalBand) {
  if (n_objects < 1) throw std::invalid_argument("remove_object: n_objects must be positive");
  if (instance_id < 1 || instance_id > n_objects)
    throw std::invalid_argument("remove_object: instance_id " + std::to_string(instance_id) + " outside [1, " +
                                std::to_string(n_objects) + "]");
  if (!(band >= 0.0)) throw std::invalid_argument("remove_object: band must be non-negative");
  if (rgb.channels != 3 || mask_hat.channels != 1 || rgb.width != mask_hat.width || rgb.height != mask_hat.height)
    throw std::invalid_argument("remove_object: need an RGB image and a same-size single-channel mask");
  ImageF out = rgb;
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x) {
      const double id = denormalize_instance_value(mask_hat.at(x, y), n_objects);
      if (std::abs(id - instance_id) <= band)
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = 1.0f;
    }
  return out;
}

/// Pixels the removal would repaint, as a binary mask.
inline Mask removal_region(const ImageF& mask_hat, int instance_id, int n_objects, double band = kDefaultRemovalBand) {
  Mask m(mask_hat.width, mask_hat.height, 1, 0);
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = std::abs(denormalize_instance_value(mask_hat.data[i], n_objects) - instance_id) <= band ? 1 : 0;
  return m;
}

}  // namespace nvskit
