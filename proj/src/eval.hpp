// A/B harness: runs a suite of metapolicies over a shared schedule of
// generated traces, aggregates per-call MOS into per-regime rows with
// confidence intervals and Welch p-values against a reference policy.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bwe.hpp"
#include "meta.hpp"
#include "rl.hpp"
#include "sim.hpp"
#include "stats.hpp"
#include "trace.hpp"

namespace ivy {

struct PolicySpec {
  std::string name;  // report label
  // Fresh instance per call; instances are stateful and not shared
  // between worker threads.
  std::function<std::unique_ptr<Metapolicy>()> make;
};

// Builds the factory for a policy label. Labels: an estimator name
// (fixed policy), "random", "jitter", "delta", "all_rules",
// "explore_<utility>", or "ivy" (needs ckpt). delta_sigma feeds the
// delta rule and must be positive when that rule is requested.
PolicySpec make_policy_spec(const std::string& label,
                            const std::vector<std::string>& pool,
                            double jitter_thresh_ms, double delta_sigma,
                            const UtilityParams& up,
                            std::shared_ptr<const Checkpoint> ckpt);

struct EvalSetup {
  std::vector<std::string> pool;
  BweParams bwe;
  SimParams sim;
  std::vector<Regime> regimes;  // defaults to eval_regimes() when empty
  int calls_per_regime = 50;
  std::uint64_t seed = 1;
  bool paired = true;  // same traces and seeds across policies
  int threads = 0;     // 0 = hardware concurrency
  bool record_timelines = false;
};

struct ReportRow {
  std::string policy;
  std::string regime;
  int n = 0;
  double video_mos = 0, video_ci = 0;
  double audio_mos = 0, audio_ci = 0;
  double p_video = 1, p_audio = 1;  // Welch vs the reference policy
};

struct CallRow {
  std::string policy;
  std::string regime;
  int call_index = 0;
  std::string call_id;
  double video_mos = 0, audio_mos = 0;
};

struct TimelineRow {
  std::string policy;
  std::string call_id;
  int interval_index = 0;
  int action = 0;
};

struct Report {
  std::vector<ReportRow> rows;     // |policies| x |regimes|, policy-major
  std::vector<CallRow> calls;      // audit trail, schedule order
  std::vector<TimelineRow> timelines;

  // Per-call video (or audio) MOS samples for one policy pooled over the
  // given regimes, in schedule order. Empty regime list = all.
  std::vector<double> samples(const std::string& policy,
                              const std::vector<std::string>& regimes,
                              bool audio = false) const;
};

Report run_ab(const std::vector<PolicySpec>& policies,
              std::size_t reference_index, const EvalSetup& setup);

// run_ab on the nonstationary regime with action timelines captured.
Report run_nonstationary(const std::vector<PolicySpec>& policies,
                         std::size_t reference_index, EvalSetup setup,
                         int n_calls = 30);

struct AblationArm {
  double interval_s = 6.0;
  std::shared_ptr<const Checkpoint> ckpt;  // trained at interval_s
};

// One section per arm: the arm's learned policy against each fixed
// estimator, labels suffixed "@<interval>s". Arm checkpoints must match
// their interval.
Report run_interval_ablation(const std::vector<AblationArm>& arms,
                             const EvalSetup& setup);

std::string report_to_csv(const Report& r);
std::string calls_to_csv(const Report& r);
// Rows for one policy, pinned header call_id,interval_index,action.
std::string timelines_to_csv(const Report& r, const std::string& policy);

}  // namespace ivy
