#pragma once

#include "panogs/image.hpp"

namespace panogs {

/// SSIM with the conventional 11x11 Gaussian window (sigma 1.5),
/// C1 = 0.01^2, C2 = 0.03^2, peak 1.0. Windows must lie fully inside the
/// image ("valid" windows); the score is the channel-averaged mean over
/// window centers, optionally restricted to centers where mask is set.
struct SsimResult {
  double value = 1.0;  // 1.0 when no window qualifies
  size_t count = 0;    // number of window centers used
};

SsimResult ssim(const Image& a, const Image& b, const Mask* mask = nullptr);

/// d(mean SSIM)/d(a), same restriction as the forward pass.
Image ssim_backward(const Image& a, const Image& b, const Mask* mask = nullptr);

}  // namespace panogs
