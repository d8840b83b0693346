#include "bwe.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace ivy {

const char* estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kSafeFilter: return "safe_filter";
    case EstimatorKind::kProbeMax: return "probe_max";
    case EstimatorKind::kLossTolerant: return "loss_tolerant";
  }
  return "?";
}

EstimatorKind estimator_kind_from_name(const std::string& name) {
  for (EstimatorKind k : {EstimatorKind::kSafeFilter, EstimatorKind::kProbeMax,
                          EstimatorKind::kLossTolerant}) {
    if (name == estimator_name(k)) return k;
  }
  fail_config("unknown estimator name '" + name + "'");
}

EstimatorState step_estimator(EstimatorKind kind, const BweParams& p,
                              EstimatorState s, const EstimatorObs& obs) {
  if (!s.primed) {
    s.baseline_owd_ms = obs.owd_ms;
    s.primed = true;
  } else {
    s.baseline_owd_ms =
        std::min(obs.owd_ms, s.baseline_owd_ms + p.baseline_drift_ms);
  }
  double qdelay = std::max(0.0, obs.owd_ms - s.baseline_owd_ms);

  s.srecv_kbps =
      (1.0 - p.srecv_alpha) * s.srecv_kbps + p.srecv_alpha * obs.recv_rate_kbps;
  int total = obs.lost_pkts + obs.recv_pkts;
  double loss_frac = total > 0 ? double(obs.lost_pkts) / total : 0.0;
  s.loss_ewma = (1.0 - p.loss_alpha) * s.loss_ewma + p.loss_alpha * loss_frac;

  bool cooling = s.cooldown_ticks > 0;
  if (cooling) --s.cooldown_ticks;

  double est = s.estimate_kbps;
  double cap = p.max_estimate_kbps;

  switch (kind) {
    case EstimatorKind::kSafeFilter: {
      cap = std::min(cap, p.sf_cap_kbps);
      if (qdelay > p.sf_backoff_above_ms) {
        if (!cooling) {
          est *= p.sf_backoff;
          s.cooldown_ticks = p.sf_cooldown_ticks;
        }
      } else if (!cooling && qdelay < p.sf_grow_below_ms) {
        est += p.sf_step_kbps;
      }
      break;
    }
    case EstimatorKind::kProbeMax: {
      bool congested =
          s.loss_ewma > p.pm_loss_backoff || qdelay > p.pm_qdelay_gate_ms;
      if (congested) {
        if (!cooling) {
          est *= p.pm_backoff;
          s.cooldown_ticks = p.pm_cooldown_ticks;
        }
        s.probe_age_ticks = 0;
        s.drain_ticks = 0;
      } else if (s.drain_ticks > 0) {
        // Scheduled drain: undershoot hard so the queue empties and the
        // owd floor re-anchors at the true base delay.
        --s.drain_ticks;
        est = std::min(est, s.srecv_kbps * p.pm_drain_mult);
      } else if (!cooling && s.loss_ewma < p.zero_loss_eps) {
        if (++s.probe_age_ticks >= p.pm_reanchor_ticks) {
          s.probe_age_ticks = 0;
          s.drain_ticks = p.pm_drain_ticks;
        } else if (qdelay < p.pm_grow_below_ms) {
          est = std::min(std::max(est * p.pm_growth,
                                  s.srecv_kbps * p.pm_recover_mult),
                         s.srecv_kbps * p.pm_srecv_mult);
        } else {
          // Standing queue but no congestion signal yet: drain it by
          // sending slightly under the observed delivery rate.
          est = std::min(est, s.srecv_kbps * p.pm_hold_mult);
        }
      }
      break;
    }
    case EstimatorKind::kLossTolerant: {
      bool congested =
          qdelay > p.lt_qdelay_gate_ms ||
          (s.loss_ewma > p.lt_loss_backoff && qdelay > p.lt_loss_qdelay_ms);
      if (congested) {
        if (!cooling) {
          est *= p.lt_backoff;
          s.cooldown_ticks = p.pm_cooldown_ticks;
        }
      } else if (!cooling) {
        est = std::min(est * p.pm_growth, s.srecv_kbps * p.pm_srecv_mult);
      }
      break;
    }
  }

  s.estimate_kbps = std::clamp(est, p.min_estimate_kbps, cap);
  return s;
}

Estimator::Estimator(EstimatorKind kind, const BweParams& p)
    : kind_(kind), params_(p) {
  reset();
}

void Estimator::reset() {
  state_ = EstimatorState{};
  state_.estimate_kbps = params_.init_estimate_kbps;
  // Warm-start the smoothed receive rate so the srecv-coupled growth cap
  // does not bind against an empty history.
  state_.srecv_kbps = params_.init_estimate_kbps;
}

double Estimator::update(const EstimatorObs& obs) {
  state_ = step_estimator(kind_, params_, state_, obs);
  return state_.estimate_kbps;
}

std::vector<Estimator> make_pool(const std::vector<std::string>& names,
                                 const BweParams& p) {
  if (names.empty()) fail_config("estimator pool must not be empty");
  std::vector<Estimator> pool;
  pool.reserve(names.size());
  for (const std::string& n : names)
    pool.emplace_back(estimator_kind_from_name(n), p);
  return pool;
}

}  // namespace ivy
