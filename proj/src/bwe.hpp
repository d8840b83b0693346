#pragma once

#include <string>
#include <vector>

namespace ivy {

// What an estimator sees each 60 ms tick. Derived from TickStats; no
// ground-truth fields (capacity, base delay) leak in here.
struct EstimatorObs {
  double recv_rate_kbps = 0;
  double owd_ms = 0;
  int lost_pkts = 0;
  int recv_pkts = 0;
};

enum class EstimatorKind { kSafeFilter, kProbeMax, kLossTolerant };

const char* estimator_name(EstimatorKind k);
EstimatorKind estimator_kind_from_name(const std::string& name);

struct BweParams {
  double init_estimate_kbps = 300.0;
  double min_estimate_kbps = 10.0;
  double max_estimate_kbps = 8000.0;
  double srecv_alpha = 0.1;          // smoothed receive-rate EWMA weight
  double loss_alpha = 0.05;          // loss-fraction EWMA weight
  double baseline_drift_ms = 0.25;   // per-tick upward drift of the owd floor
  double zero_loss_eps = 0.001;      // loss EWMA below this counts as clean

  // SafeFilter: additive probe, tight delay backoff, modest rate cap.
  double sf_cap_kbps = 1000.0;
  double sf_step_kbps = 20.0;
  double sf_grow_below_ms = 25.0;
  double sf_backoff_above_ms = 50.0;
  double sf_backoff = 0.85;
  int sf_cooldown_ticks = 10;

  // ProbeMax: multiplicative probe while the path is perfectly clean,
  // draining back under the smoothed receive rate once queuing shows, so
  // a clean link is held near capacity with a shallow queue. Because the
  // owd floor drifts upward, a standing queue slowly disappears from the
  // measurement; a scheduled hard drain every pm_reanchor_ticks empties
  // the queue so the floor re-anchors at the true base delay. Any
  // residual loss freezes the probe; loss > 2% or queuing delay > 150 ms
  // backs it off outright.
  double pm_growth = 1.08;
  double pm_srecv_mult = 1.25;
  double pm_grow_below_ms = 50.0;
  double pm_hold_mult = 0.85;
  double pm_recover_mult = 0.9;  // post-drain floor: back to ~srecv in one tick
  double pm_drain_mult = 0.5;
  int pm_reanchor_ticks = 100;
  int pm_drain_ticks = 4;
  double pm_loss_backoff = 0.02;
  double pm_qdelay_gate_ms = 150.0;
  double pm_backoff = 0.7;
  int pm_cooldown_ticks = 20;

  // LossTolerant: ProbeMax dynamics, but loss alone never triggers a
  // backoff; loss counts only when the queue is also standing, and the
  // pure-delay gate sits deeper than ProbeMax's.
  double lt_loss_backoff = 0.02;
  double lt_loss_qdelay_ms = 75.0;
  double lt_qdelay_gate_ms = 250.0;
  double lt_backoff = 0.6;  // deep enough to fully drain the gate-depth queue
};

struct EstimatorState {
  double estimate_kbps = 0;
  double srecv_kbps = 0;
  double baseline_owd_ms = 0;
  double loss_ewma = 0;
  int cooldown_ticks = 0;
  int probe_age_ticks = 0;  // ProbeMax: clean ticks since the last re-anchor
  int drain_ticks = 0;      // ProbeMax: remaining ticks of a scheduled drain
  bool primed = false;      // baseline set on first observation
};

// Pure: identical (state, obs) in always gives identical (state, estimate)
// out, which is what keeps shadow estimators equivalent to active ones.
EstimatorState step_estimator(EstimatorKind kind, const BweParams& p,
                              EstimatorState s, const EstimatorObs& obs);

class Estimator {
 public:
  Estimator(EstimatorKind kind, const BweParams& p);

  void reset();
  double update(const EstimatorObs& obs);  // returns the new estimate
  double estimate() const { return state_.estimate_kbps; }
  EstimatorKind kind() const { return kind_; }
  const char* name() const { return estimator_name(kind_); }
  const EstimatorState& state() const { return state_; }
  EstimatorState& state() { return state_; }

 private:
  EstimatorKind kind_;
  BweParams params_;
  EstimatorState state_;
};

// Pool from comma-free name list; rejects empty lists and unknown names.
std::vector<Estimator> make_pool(const std::vector<std::string>& names,
                                 const BweParams& p);

}  // namespace ivy
