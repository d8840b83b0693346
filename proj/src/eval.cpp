#include "eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "error.hpp"
#include "rng.hpp"

namespace ivy {

namespace {

const std::uint64_t kTraceSalt = 0xE7A1ULL;
const std::uint64_t kCallSalt = 0xE7A2ULL;
const std::uint64_t kUnpairedSalt = 0xE7A3ULL;

int pool_index(const std::vector<std::string>& pool, const std::string& name) {
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i] == name) return int(i);
  return -1;
}

}  // namespace

PolicySpec make_policy_spec(const std::string& label,
                            const std::vector<std::string>& pool,
                            double jitter_thresh_ms, double delta_sigma,
                            const UtilityParams& up,
                            std::shared_ptr<const Checkpoint> ckpt) {
  PolicySpec spec;
  spec.name = label;
  int fixed = pool_index(pool, label);
  if (fixed >= 0) {
    spec.make = [fixed, label] { return make_fixed_policy(fixed, label); };
  } else if (label == "random") {
    int n = int(pool.size());
    spec.make = [n] { return make_random_policy(n); };
  } else if (label == "jitter" || label == "delta" || label == "all_rules") {
    RuleKind kind = label == "jitter"  ? RuleKind::kJitter
                    : label == "delta" ? RuleKind::kDelta
                                       : RuleKind::kAllRules;
    spec.make = [kind, pool, jitter_thresh_ms, delta_sigma] {
      return make_rule_policy(kind, pool, jitter_thresh_ms, delta_sigma);
    };
  } else if (label.rfind("explore_", 0) == 0) {
    std::string util = label.substr(8);
    UtilityKind kind;
    if (util == "vivace")
      kind = UtilityKind::kVivace;
    else if (util == "power")
      kind = UtilityKind::kPower;
    else if (util == "power_variant")
      kind = UtilityKind::kPowerVariant;
    else if (util == "throughput")
      kind = UtilityKind::kThroughput;
    else
      fail_config("unknown utility in policy label '" + label + "'");
    spec.make = [kind, pool, up] {
      return make_explore_exploit_policy(kind, pool, up);
    };
  } else if (label == "ivy") {
    if (!ckpt) fail_config("policy 'ivy' needs a trained checkpoint");
    if (ckpt->pool != pool)
      fail_config("checkpoint estimator pool does not match the eval pool");
    spec.make = [ckpt] { return make_learned_policy(ckpt); };
  } else {
    fail_config("unknown policy label '" + label +
                "' (expected an estimator name, random, jitter, delta, "
                "all_rules, explore_<utility>, or ivy)");
  }
  return spec;
}

namespace {

struct CallResult {
  double video_mos = 0;
  double audio_mos = 0;
  std::string call_id;
  std::vector<int> actions;
};

}  // namespace

std::vector<double> Report::samples(const std::string& policy,
                                    const std::vector<std::string>& regimes,
                                    bool audio) const {
  std::vector<double> out;
  for (const CallRow& c : calls) {
    if (c.policy != policy) continue;
    if (!regimes.empty() &&
        std::find(regimes.begin(), regimes.end(), c.regime) == regimes.end())
      continue;
    out.push_back(audio ? c.audio_mos : c.video_mos);
  }
  return out;
}

Report run_ab(const std::vector<PolicySpec>& policies,
              std::size_t reference_index, const EvalSetup& setup) {
  if (policies.empty()) fail_config("no policies to evaluate");
  if (reference_index >= policies.size())
    fail_config("reference policy index out of range");
  if (setup.calls_per_regime < 2)
    fail_config("need at least two calls per regime for the statistics");
  if (setup.pool.size() < 2) fail_config("pool must have at least two entries");
  std::vector<Regime> regimes =
      setup.regimes.empty() ? eval_regimes() : setup.regimes;
  if (regimes.empty()) fail_config("no regimes to evaluate");

  std::size_t np = policies.size(), nr = regimes.size(),
              nc = std::size_t(setup.calls_per_regime);
  std::size_t njobs = np * nr * nc;
  std::vector<CallResult> results(njobs);

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_err;

  auto worker = [&] {
    for (;;) {
      std::size_t j = next.fetch_add(1);
      if (j >= njobs) return;
      try {
        std::size_t p = j / (nr * nc);
        std::size_t r = (j / nc) % nr;
        std::size_t c = j % nc;
        Regime regime = regimes[r];
        std::uint64_t base =
            mix_seed(setup.seed, std::uint64_t(static_cast<int>(regime)));
        if (!setup.paired) base = mix_seed(base, mix_seed(kUnpairedSalt, p));
        std::uint64_t trace_seed = mix_seed(mix_seed(base, kTraceSalt), c);
        std::uint64_t call_seed = mix_seed(mix_seed(base, kCallSalt), c);

        Trace trace =
            generate_trace(regime, trace_seed, setup.sim.call_duration_s);
        trace.id = std::string(regime_tag(regime)) + "-" + std::to_string(c);
        std::vector<Estimator> pool = make_pool(setup.pool, setup.bwe);
        std::unique_ptr<Metapolicy> policy = policies[p].make();
        CallLog log = run_call(trace, *policy, pool, setup.sim, call_seed);

        CallResult& res = results[j];
        res.video_mos = log.mean_video_mos;
        res.audio_mos = log.mean_audio_mos;
        res.call_id = trace.id;
        if (setup.record_timelines)
          for (const DecisionRecord& d : log.records)
            res.actions.push_back(d.action);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_err) first_err = std::current_exception();
        next.store(njobs);  // stop remaining work
        return;
      }
    }
  };

  unsigned hw = std::thread::hardware_concurrency();
  std::size_t want = setup.threads > 0 ? std::size_t(setup.threads)
                                       : std::size_t(hw ? hw : 1);
  std::size_t nthreads = std::min(want, njobs);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < nthreads; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  if (first_err) std::rethrow_exception(first_err);

  // Deterministic reduction in schedule order, independent of which
  // worker produced each slot.
  Report report;
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t r = 0; r < nr; ++r) {
      std::vector<double> vid, aud, ref_vid, ref_aud;
      for (std::size_t c = 0; c < nc; ++c) {
        const CallResult& res = results[(p * nr + r) * nc + c];
        vid.push_back(res.video_mos);
        aud.push_back(res.audio_mos);
        const CallResult& ref = results[(reference_index * nr + r) * nc + c];
        ref_vid.push_back(ref.video_mos);
        ref_aud.push_back(ref.audio_mos);

        CallRow row;
        row.policy = policies[p].name;
        row.regime = regime_tag(regimes[r]);
        row.call_index = int(c);
        row.call_id = res.call_id;
        row.video_mos = res.video_mos;
        row.audio_mos = res.audio_mos;
        report.calls.push_back(row);
        if (setup.record_timelines)
          for (std::size_t k = 0; k < res.actions.size(); ++k)
            report.timelines.push_back(
                {policies[p].name, res.call_id, int(k), res.actions[k]});
      }
      ReportRow row;
      row.policy = policies[p].name;
      row.regime = regime_tag(regimes[r]);
      MeanCi mv = mean_ci95(vid), ma = mean_ci95(aud);
      row.n = mv.n;
      row.video_mos = mv.mean;
      row.video_ci = mv.ci_half;
      row.audio_mos = ma.mean;
      row.audio_ci = ma.ci_half;
      if (p == reference_index) {
        row.p_video = 1.0;
        row.p_audio = 1.0;
      } else {
        row.p_video = welch_t_test(vid, ref_vid).p;
        row.p_audio = welch_t_test(aud, ref_aud).p;
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

Report run_nonstationary(const std::vector<PolicySpec>& policies,
                         std::size_t reference_index, EvalSetup setup,
                         int n_calls) {
  setup.regimes = {Regime::kNonstationary};
  setup.calls_per_regime = n_calls;
  setup.record_timelines = true;
  return run_ab(policies, reference_index, setup);
}

Report run_interval_ablation(const std::vector<AblationArm>& arms,
                             const EvalSetup& setup) {
  if (arms.empty()) fail_config("no ablation arms");
  Report merged;
  for (const AblationArm& arm : arms) {
    if (!arm.ckpt) fail_config("ablation arm is missing a checkpoint");
    if (std::fabs(arm.ckpt->interval_s - arm.interval_s) > 1e-9)
      fail_config("ablation checkpoint was trained at a different interval");
    if (arm.ckpt->pool != setup.pool)
      fail_config("ablation checkpoint pool does not match the eval pool");

    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "@%gs", arm.interval_s);
    EvalSetup arm_setup = setup;
    arm_setup.sim.decision_interval_s = arm.interval_s;
    arm_setup.sim.windows_per_interval();  // rejects non-multiples of 600 ms

    std::vector<PolicySpec> suite;
    UtilityParams up;
    suite.push_back(
        make_policy_spec("ivy", setup.pool, 25.0, 0.0, up, arm.ckpt));
    suite[0].name += suffix;
    for (const std::string& est : setup.pool) {
      suite.push_back(make_policy_spec(est, setup.pool, 25.0, 0.0, up, {}));
      suite.back().name += suffix;
    }
    Report part = run_ab(suite, 0, arm_setup);
    merged.rows.insert(merged.rows.end(), part.rows.begin(), part.rows.end());
    merged.calls.insert(merged.calls.end(), part.calls.begin(),
                        part.calls.end());
  }
  return merged;
}

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string report_to_csv(const Report& r) {
  std::string out =
      "policy,regime,n,video_mos,video_ci,audio_mos,audio_ci,p_video,"
      "p_audio\n";
  for (const ReportRow& row : r.rows) {
    out += row.policy + "," + row.regime + "," + std::to_string(row.n) + "," +
           fmt_g(row.video_mos) + "," + fmt_g(row.video_ci) + "," +
           fmt_g(row.audio_mos) + "," + fmt_g(row.audio_ci) + "," +
           fmt_g(row.p_video) + "," + fmt_g(row.p_audio) + "\n";
  }
  return out;
}

std::string calls_to_csv(const Report& r) {
  std::string out = "policy,regime,call_index,call_id,video_mos,audio_mos\n";
  for (const CallRow& c : r.calls) {
    out += c.policy + "," + c.regime + "," + std::to_string(c.call_index) +
           "," + c.call_id + "," + fmt_g(c.video_mos) + "," +
           fmt_g(c.audio_mos) + "\n";
  }
  return out;
}

std::string timelines_to_csv(const Report& r, const std::string& policy) {
  std::string out = "call_id,interval_index,action\n";
  for (const TimelineRow& t : r.timelines) {
    if (t.policy != policy) continue;
    out += t.call_id + "," + std::to_string(t.interval_index) + "," +
           std::to_string(t.action) + "\n";
  }
  return out;
}

}  // namespace ivy
