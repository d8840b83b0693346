#include "meta.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "error.hpp"
#include "rl.hpp"
#include "rng.hpp"

namespace ivy {

namespace {

const std::uint64_t kPolicySalt = 0x5EEDF00DULL;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

int find_estimator(const std::vector<std::string>& pool_names,
                   const std::string& name) {
  for (std::size_t i = 0; i < pool_names.size(); ++i)
    if (pool_names[i] == name) return int(i);
  fail_config("policy requires estimator '" + name + "' in the pool");
}

// Population standard deviation.
double pop_std(const std::deque<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= double(xs.size());
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / double(xs.size()));
}

}  // namespace

MetaState build_state(const std::vector<QosWindow>& windows,
                      const std::vector<int>& actions, int pool_size,
                      const StateNorm& norm) {
  if (pool_size < 2) fail_config("pool size must be at least 2");
  if (int(windows.size()) > kStateWindows)
    fail_config("build_state takes at most " + std::to_string(kStateWindows) +
                " windows");
  if (int(actions.size()) > kStateActionHist)
    fail_config("build_state takes at most " +
                std::to_string(kStateActionHist) + " actions");

  MetaState s{};
  int pad = kStateWindows - int(windows.size());
  for (int i = 0; i < int(windows.size()); ++i) {
    const QosWindow& w = windows[i];
    int col = pad + i;  // newest ends up last, oldest slots stay zero
    s[0 * kStateWindows + col] = float(clamp01(w.recv_rate_kbps / norm.rate_scale_kbps));
    s[1 * kStateWindows + col] = float(clamp01(w.lost_pkts / norm.lost_scale));
    s[2 * kStateWindows + col] = float(clamp01(w.owd_ms / norm.owd_scale_ms));
    s[3 * kStateWindows + col] =
        float(clamp01(w.interarrival_ms / norm.interarrival_scale_ms));
    s[4 * kStateWindows + col] = float(clamp01(w.video_prop));
    s[5 * kStateWindows + col] = float(clamp01(w.audio_prop));
  }
  int abase = kStateWindows * kStateFeatures;
  int apad = kStateActionHist - int(actions.size());
  for (int i = 0; i < int(actions.size()); ++i) {
    int a = actions[i];
    if (a < 0 || a >= pool_size)
      fail_config("action index " + std::to_string(a) + " outside pool");
    s[abase + apad + i] = float(double(a) / double(pool_size - 1));
  }
  return s;
}

const char* utility_name(UtilityKind k) {
  switch (k) {
    case UtilityKind::kVivace: return "vivace";
    case UtilityKind::kPower: return "power";
    case UtilityKind::kPowerVariant: return "power_variant";
    case UtilityKind::kThroughput: return "throughput";
  }
  return "?";
}

double utility_value(UtilityKind k, double rate_kbps, double loss,
                     double delay_ms, double drtt_dt, const UtilityParams& p) {
  if (!(rate_kbps >= 0)) fail_config("utility rate must be non-negative");
  if (!(loss >= 0 && loss <= 1)) fail_config("utility loss must be in [0,1]");
  switch (k) {
    case UtilityKind::kVivace:
      return std::pow(rate_kbps, p.vivace_exponent) -
             p.vivace_rtt_coef * rate_kbps * std::max(0.0, drtt_dt) -
             p.vivace_loss_coef * loss * rate_kbps;
    case UtilityKind::kPower:
      if (!(delay_ms > 0)) fail_config("power utility requires delay > 0");
      return rate_kbps / delay_ms;
    case UtilityKind::kPowerVariant:
      if (!(delay_ms > 0)) fail_config("power utility requires delay > 0");
      return rate_kbps * (1.0 - loss) / delay_ms;
    case UtilityKind::kThroughput:
      return rate_kbps;
  }
  fail_config("unknown utility kind");
}

namespace {

class FixedPolicy : public Metapolicy {
 public:
  FixedPolicy(int action, std::string name)
      : action_(action), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  int decide(const DecideContext&) override { return action_; }

 private:
  int action_;
  std::string name_;
};

class RandomPolicy : public Metapolicy {
 public:
  explicit RandomPolicy(int pool_size) : pool_size_(pool_size), rng_(0) {
    if (pool_size < 1) fail_config("pool size must be positive");
  }
  std::string name() const override { return "random"; }
  void reset(std::uint64_t call_seed) override {
    rng_ = Rng(mix_seed(call_seed, kPolicySalt));
  }
  int decide(const DecideContext&) override {
    return int(rng_.uniform_int(std::uint32_t(pool_size_)));
  }

 private:
  int pool_size_;
  Rng rng_;
};

class RulePolicy : public Metapolicy {
 public:
  RulePolicy(RuleKind kind, const std::vector<std::string>& pool_names,
             double jitter_thresh_ms, double delta_sigma)
      : kind_(kind),
        sf_(find_estimator(pool_names, "safe_filter")),
        pm_(find_estimator(pool_names, "probe_max")),
        jitter_thresh_ms_(jitter_thresh_ms),
        delta_sigma_(delta_sigma) {
    if (kind != RuleKind::kJitter && !(delta_sigma > 0))
      fail_config("delta rule needs a positive sigma (see dataset stats)");
  }

  std::string name() const override {
    switch (kind_) {
      case RuleKind::kJitter: return "jitter";
      case RuleKind::kDelta: return "delta";
      case RuleKind::kAllRules: return "all_rules";
    }
    return "?";
  }

  void reset(std::uint64_t) override { owd_hist_.clear(); }

  int decide(const DecideContext& ctx) override {
    bool unstable = false;
    if (kind_ == RuleKind::kJitter || kind_ == RuleKind::kAllRules)
      unstable |= pop_std(owd_hist_) > jitter_thresh_ms_;
    if (kind_ == RuleKind::kDelta || kind_ == RuleKind::kAllRules)
      unstable |=
          std::abs(ctx.estimates[sf_] - ctx.estimates[pm_]) > delta_sigma_;
    return unstable ? sf_ : pm_;
  }

  int on_window(const WindowContext& ctx) override {
    owd_hist_.push_back(ctx.window.owd_ms);
    while (int(owd_hist_.size()) > kStateWindows) owd_hist_.pop_front();
    return -1;
  }

 private:
  RuleKind kind_;
  int sf_, pm_;
  double jitter_thresh_ms_;
  double delta_sigma_;
  std::deque<double> owd_hist_;
};

// Conservative until the third decision interval; that one runs
// safe_filter for its first half and probe_max for its second, each half
// is scored with the QoS utility, and the argmax runs out the call.
class ExploreExploitPolicy : public Metapolicy {
 public:
  ExploreExploitPolicy(UtilityKind utility,
                       const std::vector<std::string>& pool_names,
                       const UtilityParams& up)
      : utility_(utility),
        up_(up),
        sf_(find_estimator(pool_names, "safe_filter")),
        pm_(find_estimator(pool_names, "probe_max")) {}

  std::string name() const override {
    return std::string("explore_") + utility_name(utility_);
  }

  void reset(std::uint64_t) override {
    committed_ = -1;
    mini_[0].clear();
    mini_[1].clear();
  }

  int decide(const DecideContext& ctx) override {
    if (ctx.interval_index < kExploreInterval) return sf_;
    if (ctx.interval_index == kExploreInterval) return sf_;
    if (committed_ < 0) committed_ = pick();
    return committed_;
  }

  int on_window(const WindowContext& ctx) override {
    if (ctx.interval_index != kExploreInterval) return -1;
    int half = ctx.windows_per_interval / 2;
    if (half < 1) fail_config("explore-exploit needs at least two windows "
                              "per decision interval");
    Obs o{ctx.window.recv_rate_kbps, ctx.window.owd_ms, ctx.window.lost_pkts,
          double(ctx.recv_pkts)};
    mini_[ctx.window_in_interval < half ? 0 : 1].push_back(o);
    // switch the sender to probe_max as the second half opens
    return ctx.window_in_interval == half - 1 ? pm_ : -1;
  }

 private:
  struct Obs {
    double rate, owd, lost, recvd;
  };

  double mini_utility(const std::vector<Obs>& m) const {
    double rate = 0, owd = 0, lost = 0, recvd = 0;
    for (const Obs& o : m) {
      rate += o.rate;
      owd += o.owd;
      lost += o.lost;
      recvd += o.recvd;
    }
    int n = int(m.size());
    rate /= n;
    owd /= n;
    double loss = (lost + recvd) > 0 ? lost / (lost + recvd) : 0.0;
    // least-squares slope of owd against time, in ms per second
    double drtt = 0;
    if (n >= 2) {
      double dt = 0.6;  // window spacing in seconds
      double tbar = dt * (n - 1) / 2.0, num = 0, den = 0;
      for (int i = 0; i < n; ++i) {
        double x = i * dt - tbar;
        num += x * m[i].owd;
        den += x * x;
      }
      drtt = num / den;
    }
    return utility_value(utility_, rate, loss, owd, drtt, up_);
  }

  int pick() const {
    if (mini_[0].empty() || mini_[1].empty())
      return sf_;  // probe never ran (call shorter than three intervals)
    double usf = mini_utility(mini_[0]);
    double upm = mini_utility(mini_[1]);
    return upm > usf ? pm_ : sf_;  // ties stay conservative
  }

  static constexpr int kExploreInterval = 2;

  UtilityKind utility_;
  UtilityParams up_;
  int sf_, pm_;
  int committed_ = -1;
  std::vector<Obs> mini_[2];
};

class LearnedPolicy : public Metapolicy {
 public:
  explicit LearnedPolicy(std::shared_ptr<const Checkpoint> ckpt)
      : ckpt_(std::move(ckpt)) {
    if (!ckpt_) fail_config("learned policy needs a checkpoint");
  }
  std::string name() const override { return "ivy"; }
  int decide(const DecideContext& ctx) override {
    return act(*ckpt_, ctx.state);
  }

 private:
  std::shared_ptr<const Checkpoint> ckpt_;
};

}  // namespace

std::unique_ptr<Metapolicy> make_fixed_policy(int action,
                                              const std::string& name) {
  if (action < 0) fail_config("fixed policy action must be non-negative");
  return std::make_unique<FixedPolicy>(action, name);
}

std::unique_ptr<Metapolicy> make_random_policy(int pool_size) {
  return std::make_unique<RandomPolicy>(pool_size);
}

std::unique_ptr<Metapolicy> make_rule_policy(
    RuleKind kind, const std::vector<std::string>& pool_names,
    double jitter_thresh_ms, double delta_sigma) {
  return std::make_unique<RulePolicy>(kind, pool_names, jitter_thresh_ms,
                                      delta_sigma);
}

std::unique_ptr<Metapolicy> make_explore_exploit_policy(
    UtilityKind utility, const std::vector<std::string>& pool_names,
    const UtilityParams& up) {
  return std::make_unique<ExploreExploitPolicy>(utility, pool_names, up);
}

std::unique_ptr<Metapolicy> make_learned_policy(
    std::shared_ptr<const Checkpoint> ckpt) {
  return std::make_unique<LearnedPolicy>(std::move(ckpt));
}

DatasetSummary dataset_stats(const Dataset& ds) {
  if (ds.transitions.empty()) fail_config("dataset is empty");
  std::size_t dim = ds.transitions.front().s.size();
  DatasetSummary sum;
  sum.n_transitions = ds.transitions.size();
  sum.feature_mean.assign(dim, 0.0);
  sum.feature_std.assign(dim, 0.0);

  std::vector<std::string> seen_calls;
  for (const Transition& t : ds.transitions) {
    for (std::size_t i = 0; i < dim; ++i) sum.feature_mean[i] += t.s[i];
    if (seen_calls.empty() || seen_calls.back() != t.call)
      seen_calls.push_back(t.call);
  }
  sum.n_calls = seen_calls.size();
  double n = double(sum.n_transitions);
  for (std::size_t i = 0; i < dim; ++i) sum.feature_mean[i] /= n;
  for (const Transition& t : ds.transitions)
    for (std::size_t i = 0; i < dim; ++i) {
      double d = t.s[i] - sum.feature_mean[i];
      sum.feature_std[i] += d * d;
    }
  for (std::size_t i = 0; i < dim; ++i)
    sum.feature_std[i] = std::sqrt(sum.feature_std[i] / n);

  if (ds.gaps.empty()) {
    sum.gap_degenerate = true;
  } else {
    double gm = 0;
    for (float g : ds.gaps) gm += g;
    gm /= double(ds.gaps.size());
    double var = 0;
    for (float g : ds.gaps) var += (g - gm) * (g - gm);
    sum.gap_sigma = std::sqrt(var / double(ds.gaps.size()));
    sum.gap_degenerate = !(sum.gap_sigma > 0);
  }
  return sum;
}

}  // namespace ivy
