#pragma once

namespace ivy {

// MOS proxy constants. Video rate credit saturates at rate_max and halves
// its log argument at rate_half; delay terms decay exponentially.
struct QoeParams {
  double video_rate_half_kbps = 300.0;
  double video_rate_max_kbps = 8000.0;
  double video_delay_scale_ms = 250.0;
  double video_loss_exp = 8.0;
  double audio_rate_full_kbps = 40.0;
  double audio_delay_scale_ms = 400.0;
  double audio_loss_exp = 4.0;
};

// 1 + 4 * R * D * L, in [1, 5]. goodput in kbps, queuing delay in ms,
// loss a fraction in [0, 1]. Throws on out-of-domain inputs.
double video_mos(double goodput_kbps, double queuing_delay_ms, double loss,
                 const QoeParams& p = {});

// 1 + 3.6 * rate_credit * delay_credit * loss_credit, in [1, 4.6].
double audio_mos(double goodput_kbps, double queuing_delay_ms, double loss,
                 const QoeParams& p = {});

}  // namespace ivy
