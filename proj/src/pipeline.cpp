#include "pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <vector>

#include "error.hpp"
#include "eval.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "trace.hpp"

namespace fs = std::filesystem;

namespace ivy {

namespace {

const std::uint64_t kGenSalt = 0x6E17ULL;
const std::uint64_t kCollectSalt = 0xC011EC7ULL;

void check_positive(double v, const char* key) {
  if (!(v > 0)) fail_config(std::string("config key '") + key +
                            "' must be positive");
}

std::size_t thread_count(const Config& cfg, std::size_t njobs) {
  int t = cfg.get_int("run.threads");
  if (t < 0) fail_config("config key 'run.threads' must be >= 0");
  unsigned hw = std::thread::hardware_concurrency();
  std::size_t want = t > 0 ? std::size_t(t) : std::size_t(hw ? hw : 1);
  return std::min(want, njobs);
}

// Runs fn(i) for i in [0, n) across workers; slot-indexed outputs keep
// the reduction independent of completion order.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t nthreads, Fn fn) {
  if (n == 0) return;
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_err;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_err) first_err = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < nthreads; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  if (first_err) std::rethrow_exception(first_err);
}

void ensure_parent(const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// Writes through `writer(tmp)` then renames tmp over path.
template <typename Writer>
void atomic_commit(const std::string& path, Writer writer) {
  ensure_parent(path);
  std::string tmp = path + ".tmp";
  writer(tmp);
  fs::rename(tmp, path);
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& content) {
  atomic_commit(path, [&](const std::string& tmp) {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) fail_input("cannot open '" + tmp + "' for writing");
    f << content;
    if (!f.good()) fail_input("write failed for '" + tmp + "'");
  });
}

SimParams sim_params_from(const Config& cfg) {
  SimParams sp;
  sp.decision_interval_s = cfg.get_double("run.decision_interval");
  sp.call_duration_s = cfg.get_double("run.call_duration");
  sp.video_start_delay_s = cfg.get_double("run.video_start_delay");
  check_positive(sp.decision_interval_s, "run.decision_interval");
  check_positive(sp.call_duration_s, "run.call_duration");
  if (sp.video_start_delay_s < 0)
    fail_config("config key 'run.video_start_delay' must be >= 0");
  sp.qoe = qoe_params_from(cfg);
  sp.windows_per_interval();  // validates the 600 ms divisibility rule
  return sp;
}

QoeParams qoe_params_from(const Config& cfg) {
  QoeParams q;
  q.video_rate_half_kbps = cfg.get_double("qoe.video_rate_half");
  q.video_rate_max_kbps = cfg.get_double("qoe.video_rate_max");
  q.video_delay_scale_ms = cfg.get_double("qoe.video_delay_scale");
  q.video_loss_exp = cfg.get_double("qoe.video_loss_exp");
  q.audio_rate_full_kbps = cfg.get_double("qoe.audio_rate_full");
  q.audio_delay_scale_ms = cfg.get_double("qoe.audio_delay_scale");
  q.audio_loss_exp = cfg.get_double("qoe.audio_loss_exp");
  return q;
}

BweParams bwe_params_from(const Config& cfg) {
  BweParams p;
  p.init_estimate_kbps = cfg.get_double("bwe.init");
  p.min_estimate_kbps = cfg.get_double("bwe.min");
  p.max_estimate_kbps = cfg.get_double("bwe.max");
  p.srecv_alpha = cfg.get_double("bwe.srecv_alpha");
  p.loss_alpha = cfg.get_double("bwe.loss_alpha");
  p.baseline_drift_ms = cfg.get_double("bwe.baseline_drift");
  p.zero_loss_eps = cfg.get_double("bwe.zero_loss_eps");
  p.sf_cap_kbps = cfg.get_double("bwe.sf_cap");
  p.sf_step_kbps = cfg.get_double("bwe.sf_step");
  p.sf_grow_below_ms = cfg.get_double("bwe.sf_grow_below");
  p.sf_backoff_above_ms = cfg.get_double("bwe.sf_backoff_above");
  p.sf_backoff = cfg.get_double("bwe.sf_backoff");
  p.sf_cooldown_ticks = cfg.get_int("bwe.sf_cooldown");
  p.pm_growth = cfg.get_double("bwe.pm_growth");
  p.pm_srecv_mult = cfg.get_double("bwe.pm_srecv_mult");
  p.pm_grow_below_ms = cfg.get_double("bwe.pm_grow_below");
  p.pm_hold_mult = cfg.get_double("bwe.pm_hold_mult");
  p.pm_recover_mult = cfg.get_double("bwe.pm_recover_mult");
  p.pm_drain_mult = cfg.get_double("bwe.pm_drain_mult");
  p.pm_reanchor_ticks = cfg.get_int("bwe.pm_reanchor_ticks");
  p.pm_drain_ticks = cfg.get_int("bwe.pm_drain_ticks");
  p.pm_loss_backoff = cfg.get_double("bwe.pm_loss_backoff");
  p.pm_qdelay_gate_ms = cfg.get_double("bwe.pm_qdelay_gate");
  p.pm_backoff = cfg.get_double("bwe.pm_backoff");
  p.pm_cooldown_ticks = cfg.get_int("bwe.pm_cooldown");
  p.lt_qdelay_gate_ms = cfg.get_double("bwe.lt_qdelay_gate");
  p.lt_backoff = cfg.get_double("bwe.lt_backoff");
  p.lt_loss_backoff = cfg.get_double("bwe.lt_loss_backoff");
  p.lt_loss_qdelay_ms = cfg.get_double("bwe.lt_loss_qdelay");
  if (p.min_estimate_kbps <= 0 || p.max_estimate_kbps <= p.min_estimate_kbps)
    fail_config("bwe.min and bwe.max must satisfy 0 < min < max");
  return p;
}

IqlConfig iql_config_from(const Config& cfg) {
  IqlConfig c;
  c.gamma = cfg.get_double("train.gamma");
  c.tau = cfg.get_double("train.tau");
  c.beta = cfg.get_double("train.beta");
  c.adv_clip = cfg.get_double("train.adv_clip");
  c.lr = cfg.get_double("train.lr");
  c.polyak = cfg.get_double("train.polyak");
  c.batch = cfg.get_int("train.batch");
  c.epochs = cfg.get_int("train.epochs");
  c.hidden = cfg.get_int("train.hidden");
  c.seed = cfg.get_u64("train.seed");
  if (c.gamma < 0 || c.gamma >= 1)
    fail_config("config key 'train.gamma' must lie in [0,1)");
  if (c.tau <= 0 || c.tau >= 1)
    fail_config("config key 'train.tau' must lie in (0,1)");
  check_positive(c.lr, "train.lr");
  if (c.polyak <= 0 || c.polyak > 1)
    fail_config("config key 'train.polyak' must lie in (0,1]");
  if (c.batch < 1) fail_config("config key 'train.batch' must be >= 1");
  if (c.epochs < 0) fail_config("config key 'train.epochs' must be >= 0");
  if (c.hidden < 1) fail_config("config key 'train.hidden' must be >= 1");
  return c;
}

UtilityParams utility_params_from(const Config& cfg) {
  UtilityParams up;
  up.vivace_exponent = cfg.get_double("eval.vivace_exponent");
  up.vivace_rtt_coef = cfg.get_double("eval.vivace_rtt_coef");
  up.vivace_loss_coef = cfg.get_double("eval.vivace_loss_coef");
  return up;
}

void cmd_gen_traces(const Config& cfg) {
  std::string dir = cfg.get_str("paths.traces");
  int per_regime = cfg.get_int("run.gen_traces");
  if (per_regime < 1) fail_config("config key 'run.gen_traces' must be >= 1");
  double duration = cfg.get_double("run.call_duration");
  check_positive(duration, "run.call_duration");
  std::uint64_t seed = cfg.get_u64("run.seed");

  std::vector<Regime> regimes = collect_regimes();
  regimes.push_back(Regime::kNonstationary);
  for (Regime r : regimes) {
    std::uint64_t base =
        mix_seed(mix_seed(seed, kGenSalt), std::uint64_t(static_cast<int>(r)));
    for (int i = 0; i < per_regime; ++i) {
      Trace t = generate_trace(r, mix_seed(base, std::uint64_t(i)), duration);
      std::string path = dir + "/" + regime_tag(r) + "-" + std::to_string(i) +
                         ".ivt";
      atomic_commit(path,
                    [&](const std::string& tmp) { save_trace(t, tmp); });
    }
  }
  std::fprintf(stderr, "wrote %zu traces to %s\n",
               regimes.size() * std::size_t(per_regime), dir.c_str());
}

Dataset collect_dataset(const Config& cfg, int calls, const SimParams& sim) {
  if (calls < 1) fail_config("collection needs at least one call");
  std::vector<std::string> pool_names = cfg.get_list("run.pool");
  BweParams bwe = bwe_params_from(cfg);
  make_pool(pool_names, bwe);  // validates names up front
  std::uint64_t seed = cfg.get_u64("run.seed");
  const std::vector<Regime>& regimes = collect_regimes();

  std::size_t n_calls = std::size_t(calls);
  std::vector<CallLog> logs(n_calls);
  std::atomic<int> done{0};
  parallel_for(std::size_t(calls), thread_count(cfg, std::size_t(calls)),
               [&](std::size_t c) {
                 Rng rng(mix_seed(mix_seed(seed, kCollectSalt),
                                  std::uint64_t(c)));
                 Regime regime =
                     regimes[rng.uniform_int(std::uint32_t(regimes.size()))];
                 std::uint64_t trace_seed = rng.next_u64();
                 std::uint64_t call_seed = rng.next_u64();
                 Trace trace =
                     generate_trace(regime, trace_seed, sim.call_duration_s);
                 trace.id = "c" + std::to_string(c) + "-" + regime_tag(regime);
                 std::vector<Estimator> pool = make_pool(pool_names, bwe);
                 std::unique_ptr<Metapolicy> policy =
                     make_random_policy(int(pool.size()));
                 logs[c] = run_call(trace, *policy, pool, sim, call_seed);
                 logs[c].estimates.clear();  // only decisions are kept
                 int d = done.fetch_add(1) + 1;
                 if (d % 500 == 0)
                   std::fprintf(stderr, "collected %d/%d calls\n", d, calls);
               });

  Dataset ds;
  ds.pool_size = int(pool_names.size());
  ds.interval_s = sim.decision_interval_s;
  for (const CallLog& log : logs) append_transitions(ds, log);
  return ds;
}

void cmd_collect(const Config& cfg) {
  SimParams sim = sim_params_from(cfg);
  Dataset ds = collect_dataset(cfg, cfg.get_int("run.collect_calls"), sim);
  std::string path = cfg.get_str("paths.dataset");
  ensure_parent(path);
  std::string tmp = path + ".tmp";
  save_dataset(ds, tmp);
  fs::rename(tmp, path);
  std::string tmp_gaps = gaps_sidecar_path(tmp);
  std::string gaps = gaps_sidecar_path(path);
  if (fs::exists(tmp_gaps))
    fs::rename(tmp_gaps, gaps);
  else
    fs::remove(gaps);  // never leave a stale sidecar behind
  std::fprintf(stderr, "dataset: %zu transitions from %d calls -> %s\n",
               ds.transitions.size(), cfg.get_int("run.collect_calls"),
               path.c_str());
}

namespace {

std::string losses_to_csv(const std::vector<EpochLoss>& losses) {
  std::string out = "epoch,loss_v,loss_q,loss_pi\n";
  char buf[160];
  for (const EpochLoss& e : losses) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", e.epoch, e.loss_v,
                  e.loss_q, e.loss_pi);
    out += buf;
  }
  return out;
}

}  // namespace

void cmd_train(const Config& cfg) {
  Dataset ds = load_dataset(cfg.get_str("paths.dataset"));
  std::vector<std::string> pool = cfg.get_list("run.pool");
  if (int(pool.size()) != ds.pool_size)
    fail_config("run.pool has " + std::to_string(pool.size()) +
                " entries but the dataset was collected with " +
                std::to_string(ds.pool_size));
  IqlConfig icfg = iql_config_from(cfg);
  Checkpoint ck = init_checkpoint(kMetaStateDim, pool, ds.interval_s, icfg);
  std::vector<EpochLoss> losses = train(ck, ds);
  if (!losses.empty()) {
    const EpochLoss& last = losses.back();
    std::fprintf(stderr, "trained %d epochs: loss_v=%.4g loss_q=%.4g "
                 "loss_pi=%.4g\n",
                 icfg.epochs, last.loss_v, last.loss_q, last.loss_pi);
  }
  atomic_commit(cfg.get_str("paths.checkpoint"), [&](const std::string& tmp) {
    save_checkpoint(ck, tmp);
  });
  atomic_write_text(cfg.get_str("paths.loss_trace"), losses_to_csv(losses));
}

namespace {

EvalSetup eval_setup_from(const Config& cfg) {
  EvalSetup setup;
  setup.pool = cfg.get_list("run.pool");
  setup.bwe = bwe_params_from(cfg);
  setup.sim = sim_params_from(cfg);
  setup.calls_per_regime = cfg.get_int("run.eval_calls");
  setup.seed = cfg.get_u64("run.seed");
  setup.paired = cfg.get_bool("run.paired");
  setup.threads = cfg.get_int("run.threads");
  return setup;
}

double delta_sigma_from(const Config& cfg) {
  double sigma = cfg.get_double("eval.delta_sigma");
  if (sigma > 0) return sigma;
  if (sigma < 0) fail_config("config key 'eval.delta_sigma' must be >= 0");
  Dataset ds = load_dataset(cfg.get_str("paths.dataset"));
  DatasetSummary summary = dataset_stats(ds);
  if (summary.gap_degenerate)
    fail_config(
        "dataset has no usable estimate-gap spread for the delta rule; "
        "set eval.delta_sigma explicitly");
  return summary.gap_sigma;
}

}  // namespace

void cmd_eval(const Config& cfg) {
  std::shared_ptr<const Checkpoint> ck = std::make_shared<Checkpoint>(
      load_checkpoint(cfg.get_str("paths.checkpoint")));
  EvalSetup setup = eval_setup_from(cfg);
  if (ck->pool != setup.pool)
    fail_config("checkpoint pool does not match run.pool");
  double jitter = cfg.get_double("eval.jitter_threshold");
  double sigma = delta_sigma_from(cfg);
  UtilityParams up = utility_params_from(cfg);

  std::vector<std::string> labels = {"ivy"};
  for (const std::string& est : setup.pool) labels.push_back(est);
  for (const char* u :
       {"explore_vivace", "explore_power", "explore_power_variant",
        "explore_throughput"})
    labels.push_back(u);
  labels.push_back("jitter");
  labels.push_back("delta");
  labels.push_back("all_rules");
  labels.push_back("random");

  std::vector<PolicySpec> suite;
  for (const std::string& label : labels)
    suite.push_back(make_policy_spec(label, setup.pool, jitter, sigma, up, ck));

  std::string dir = cfg.get_str("paths.reports");
  Report rep = run_ab(suite, 0, setup);
  atomic_write_text(dir + "/report.csv", report_to_csv(rep));
  atomic_write_text(dir + "/report_calls.csv", calls_to_csv(rep));

  std::vector<PolicySpec> ns_suite;
  ns_suite.push_back(suite[0]);  // ivy
  for (std::size_t i = 0; i < setup.pool.size(); ++i)
    ns_suite.push_back(suite[1 + i]);
  Report ns = run_nonstationary(ns_suite, 0, setup,
                                cfg.get_int("run.nonstationary_calls"));
  atomic_write_text(dir + "/nonstationary.csv", report_to_csv(ns));
  atomic_write_text(dir + "/nonstationary_calls.csv", calls_to_csv(ns));
  for (const PolicySpec& p : ns_suite)
    atomic_write_text(dir + "/timeline_" + p.name + ".csv",
                      timelines_to_csv(ns, p.name));
  std::fprintf(stderr, "reports written to %s\n", dir.c_str());
}

void cmd_ablate(const Config& cfg) {
  std::vector<double> intervals = cfg.get_double_list("run.ablate_intervals");
  if (intervals.empty())
    fail_config("config key 'run.ablate_intervals' must list intervals");
  int collect_calls = cfg.get_int("run.ablate_collect_calls");
  int epochs = cfg.get_int("run.ablate_epochs");

  EvalSetup setup = eval_setup_from(cfg);
  std::vector<AblationArm> arms;
  for (double interval : intervals) {
    SimParams sim = setup.sim;
    sim.decision_interval_s = interval;
    sim.windows_per_interval();  // rejects non-multiples of 600 ms
    std::fprintf(stderr, "ablation arm %.3gs: collecting %d calls\n", interval,
                 collect_calls);
    Dataset ds = collect_dataset(cfg, collect_calls, sim);
    IqlConfig icfg = iql_config_from(cfg);
    icfg.epochs = epochs;
    Checkpoint ck = init_checkpoint(kMetaStateDim, setup.pool, interval, icfg);
    train(ck, ds);
    arms.push_back({interval, std::make_shared<Checkpoint>(std::move(ck))});
  }
  Report rep = run_interval_ablation(arms, setup);
  std::string dir = cfg.get_str("paths.reports");
  atomic_write_text(dir + "/ablation.csv", report_to_csv(rep));
  atomic_write_text(dir + "/ablation_calls.csv", calls_to_csv(rep));
  std::fprintf(stderr, "ablation report written to %s\n", dir.c_str());
}

std::string cmd_stats(const Config& cfg) {
  Dataset ds = load_dataset(cfg.get_str("paths.dataset"));
  DatasetSummary s = dataset_stats(ds);
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "transitions: %zu\ncalls: %zu\n",
                s.n_transitions, s.n_calls);
  out += buf;
  std::snprintf(buf, sizeof buf, "pool_size: %d\ninterval_s: %.9g\n",
                ds.pool_size, ds.interval_s);
  out += buf;
  if (s.gap_degenerate)
    out += "delta_sigma: degenerate (no estimate-gap spread)\n";
  else {
    std::snprintf(buf, sizeof buf, "delta_sigma: %.9g\n", s.gap_sigma);
    out += buf;
  }
  out += "feature,mean,std\n";
  for (std::size_t i = 0; i < s.feature_mean.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", i, s.feature_mean[i],
                  s.feature_std[i]);
    out += buf;
  }
  std::fputs(out.c_str(), stdout);
  return out;
}

void run_command(const std::string& command, const Config& cfg) {
  if (command == "gen-traces")
    cmd_gen_traces(cfg);
  else if (command == "collect")
    cmd_collect(cfg);
  else if (command == "train")
    cmd_train(cfg);
  else if (command == "eval")
    cmd_eval(cfg);
  else if (command == "ablate")
    cmd_ablate(cfg);
  else if (command == "stats")
    cmd_stats(cfg);
  else
    fail_config("unknown command '" + command + "'");
}

}  // namespace ivy
