#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "meta_state.hpp"
#include "sim.hpp"

namespace ivy {

struct Checkpoint;

// Feature scaling for build_state. Lost-packet and interarrival features
// saturate at 1; everything else stays in [0,1] by construction.
struct StateNorm {
  double rate_scale_kbps = 8000.0;
  double lost_scale = 100.0;
  double owd_scale_ms = 1000.0;
  double interarrival_scale_ms = 100.0;
};

// windows: most recent interval's QoS windows, oldest first, at most 10.
// actions: most recent action indices, oldest first, at most 5. Missing
// history zero-pads the oldest slots.
MetaState build_state(const std::vector<QosWindow>& windows,
                      const std::vector<int>& actions, int pool_size,
                      const StateNorm& norm = {});

enum class UtilityKind { kVivace, kPower, kPowerVariant, kThroughput };

const char* utility_name(UtilityKind k);

struct UtilityParams {
  double vivace_exponent = 0.9;
  double vivace_rtt_coef = 0.009;
  double vivace_loss_coef = 11.35;
};

// rate in kbps, loss a fraction, delay in ms, drtt_dt in ms per second.
// power rejects delay <= 0; vivace ignores negative delay slopes.
double utility_value(UtilityKind k, double rate_kbps, double loss,
                     double delay_ms, double drtt_dt, const UtilityParams& p);

struct DecideContext {
  int interval_index = 0;
  const MetaState& state;
  const std::vector<double>& estimates;  // current estimate per pool entry
};

struct WindowContext {
  int interval_index = 0;
  int window_in_interval = 0;
  int windows_per_interval = 0;
  const QosWindow& window;
  int recv_pkts = 0;
  const std::vector<double>& estimates;
};

class Metapolicy {
 public:
  virtual ~Metapolicy() = default;
  virtual std::string name() const = 0;
  virtual void reset(std::uint64_t call_seed) { (void)call_seed; }
  // Called at the start of every decision interval; returns a pool index.
  virtual int decide(const DecideContext& ctx) = 0;
  // Called after each QoS window closes; a non-negative return switches
  // the active estimator mid-interval (used by explore-exploit probing).
  virtual int on_window(const WindowContext& ctx) {
    (void)ctx;
    return -1;
  }
};

std::unique_ptr<Metapolicy> make_fixed_policy(int action,
                                              const std::string& name);
// I.i.d. uniform over the pool, deterministic in the call seed.
std::unique_ptr<Metapolicy> make_random_policy(int pool_size);

enum class RuleKind { kJitter, kDelta, kAllRules };

// Two-estimator QoS rules over safe_filter / probe_max. delta_sigma must
// be positive for kDelta and kAllRules.
std::unique_ptr<Metapolicy> make_rule_policy(
    RuleKind kind, const std::vector<std::string>& pool_names,
    double jitter_thresh_ms, double delta_sigma);

// Conservative start, one split-interval probe, then commit to the
// utility argmax for the rest of the call.
std::unique_ptr<Metapolicy> make_explore_exploit_policy(
    UtilityKind utility, const std::vector<std::string>& pool_names,
    const UtilityParams& up);

// Greedy actor from a trained checkpoint.
std::unique_ptr<Metapolicy> make_learned_policy(
    std::shared_ptr<const Checkpoint> ckpt);

struct DatasetSummary {
  std::vector<double> feature_mean;  // per state dimension
  std::vector<double> feature_std;   // population std
  double gap_sigma = 0;              // std of |safe_filter - probe_max| gaps
  bool gap_degenerate = false;       // no gaps recorded, or zero spread
  std::size_t n_transitions = 0;
  std::size_t n_calls = 0;
};

DatasetSummary dataset_stats(const Dataset& ds);

}  // namespace ivy
