#include "qoe.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace ivy {

namespace {

void check_domain(double goodput, double qdelay, double loss) {
  if (!(goodput >= 0)) fail_config("goodput must be non-negative");
  if (!(qdelay >= 0)) fail_config("queuing delay must be non-negative");
  if (!(loss >= 0 && loss <= 1)) fail_config("loss must be within [0,1]");
}

}  // namespace

double video_mos(double goodput_kbps, double queuing_delay_ms, double loss,
                 const QoeParams& p) {
  check_domain(goodput_kbps, queuing_delay_ms, loss);
  double r = std::log(1.0 + goodput_kbps / p.video_rate_half_kbps) /
             std::log(1.0 + p.video_rate_max_kbps / p.video_rate_half_kbps);
  r = std::clamp(r, 0.0, 1.0);
  double d = std::exp(-queuing_delay_ms / p.video_delay_scale_ms);
  double l = std::pow(1.0 - loss, p.video_loss_exp);
  return 1.0 + 4.0 * r * d * l;
}

double audio_mos(double goodput_kbps, double queuing_delay_ms, double loss,
                 const QoeParams& p) {
  check_domain(goodput_kbps, queuing_delay_ms, loss);
  double r = std::min(1.0, goodput_kbps / p.audio_rate_full_kbps);
  double d = std::exp(-queuing_delay_ms / p.audio_delay_scale_ms);
  double l = std::pow(1.0 - loss, p.audio_loss_exp);
  return 1.0 + 3.6 * r * d * l;
}

}  // namespace ivy
