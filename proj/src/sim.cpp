#include "sim.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "meta.hpp"

namespace ivy {

namespace {

const std::uint64_t kSimSalt = 0x51ED0CA11ULL;

int rounded_ratio(double num, double den) {
  return int(std::floor(num / den + 0.5));
}

// Take the integer part of a fractional packet accumulator.
int drain_acc(double& acc) {
  int n = int(std::floor(acc + 1e-9));
  acc -= n;
  return n;
}

struct SegmentCursor {
  const Trace* trace;
  std::size_t idx = 0;
  double seg_end = 0;

  explicit SegmentCursor(const Trace& t) : trace(&t) {
    seg_end = t.segments.at(0).duration_s;
  }
  const Segment& at(double t) {
    while (idx + 1 < trace->segments.size() && t >= seg_end - 1e-9) {
      ++idx;
      seg_end += trace->segments[idx].duration_s;
    }
    return trace->segments[idx];
  }
};

}  // namespace

int SimParams::windows_per_interval() const {
  double w = decision_interval_s / (tick_s * window_ticks);
  int wi = rounded_ratio(decision_interval_s, tick_s * window_ticks);
  if (wi < 1 || std::abs(w - wi) > 1e-9)
    fail_config("decision interval must be a positive multiple of the window "
                "length");
  return wi;
}

TickStats step_tick(LinkState& link, const Segment& seg, double send_rate_kbps,
                    Rng& rng, const SimParams& sp) {
  if (!(send_rate_kbps > 0)) fail_config("send rate must be positive");
  if (!(seg.capacity_kbps > 0)) fail_config("segment capacity must be positive");

  const double dt = sp.tick_s;
  double audio_rate = std::min(send_rate_kbps, sp.audio_rate_kbps);
  double video_rate =
      link.video_enabled ? std::max(0.0, send_rate_kbps - audio_rate) : 0.0;

  const double audio_pkt_kbit = sp.audio_pkt_bytes * 8.0 / 1000.0;
  const double video_pkt_kbit = sp.video_pkt_bytes * 8.0 / 1000.0;

  link.audio_sent_acc += sp.audio_pkt_per_s * dt;
  link.video_sent_acc += video_rate * dt / video_pkt_kbit;
  int audio_sent = drain_acc(link.audio_sent_acc);
  int video_sent = drain_acc(link.video_sent_acc);

  // Random loss: expected fraction at the fluid level, integer packet
  // counts drawn binomially from this tick's sent packets.
  int lost_random = rng.binomial(audio_sent + video_sent, seg.random_loss);
  double in_audio = audio_rate * dt * (1.0 - seg.random_loss);
  double in_video = video_rate * dt * (1.0 - seg.random_loss);

  double pool = link.queue_kbit() + in_audio + in_video;
  double drained = std::min(pool, seg.capacity_kbps * dt);
  double drained_audio =
      pool > 0 ? drained * (link.queue_audio_kbit + in_audio) / pool : 0.0;
  double drained_video = drained - drained_audio;
  link.queue_audio_kbit += in_audio - drained_audio;
  link.queue_video_kbit += in_video - drained_video;

  // Overflow above the buffer cap is congestive loss, shed proportionally.
  int dropped = 0;
  double qcap = seg.capacity_kbps * sp.queue_cap_s;
  double qtot = link.queue_kbit();
  if (qtot > qcap) {
    double drop = qtot - qcap;
    double drop_audio = drop * link.queue_audio_kbit / qtot;
    double drop_video = drop - drop_audio;
    link.queue_audio_kbit -= drop_audio;
    link.queue_video_kbit -= drop_video;
    link.drop_acc += drop_audio / audio_pkt_kbit + drop_video / video_pkt_kbit;
    dropped = drain_acc(link.drop_acc);
  }

  link.audio_recv_acc += drained_audio / audio_pkt_kbit;
  link.video_recv_acc += drained_video / video_pkt_kbit;

  TickStats ts;
  ts.send_rate_kbps = send_rate_kbps;
  ts.recv_rate_kbps = drained / dt;
  ts.owd_ms = seg.base_owd_ms + 1000.0 * link.queue_kbit() / seg.capacity_kbps;
  ts.lost_pkts = lost_random + dropped;
  ts.audio_pkts = drain_acc(link.audio_recv_acc);
  ts.video_pkts = drain_acc(link.video_recv_acc);
  ts.queue_kbits = link.queue_kbit();
  return ts;
}

QosWindow aggregate_window(const std::vector<TickStats>& ticks,
                           const SimParams& sp) {
  if (int(ticks.size()) != sp.window_ticks)
    fail_config("aggregate_window expects exactly " +
                std::to_string(sp.window_ticks) + " ticks, got " +
                std::to_string(ticks.size()));
  QosWindow w;
  double window_ms = sp.window_ticks * sp.tick_s * 1000.0;
  long video = 0, audio = 0;
  for (const TickStats& t : ticks) {
    w.recv_rate_kbps += t.recv_rate_kbps;
    w.owd_ms += t.owd_ms;
    w.lost_pkts += t.lost_pkts;
    video += t.video_pkts;
    audio += t.audio_pkts;
  }
  w.recv_rate_kbps /= sp.window_ticks;
  w.owd_ms /= sp.window_ticks;
  long total = video + audio;
  w.interarrival_ms = total > 0 ? window_ms / double(total) : window_ms;
  w.video_prop = total > 0 ? double(video) / double(total) : 0.0;
  w.audio_prop = total > 0 ? double(audio) / double(total) : 0.0;
  return w;
}

CallLog run_call(const Trace& trace, Metapolicy& policy,
                 std::vector<Estimator>& pool, const SimParams& sp,
                 std::uint64_t seed) {
  if (pool.empty()) fail_config("estimator pool must not be empty");
  if (trace.segments.empty()) fail_config("trace has no segments");
  int wpi = sp.windows_per_interval();
  int n_intervals =
      int(std::floor(sp.call_duration_s / sp.decision_interval_s + 1e-9));
  if (n_intervals < 1)
    fail_config("call duration must cover at least one decision interval");

  Rng rng(mix_seed(seed, kSimSalt));
  for (Estimator& e : pool) e.reset();
  policy.reset(seed);

  int sf_idx = -1, pm_idx = -1;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].kind() == EstimatorKind::kSafeFilter) sf_idx = int(i);
    if (pool[i].kind() == EstimatorKind::kProbeMax) pm_idx = int(i);
  }

  CallLog log;
  log.trace_id = trace.id;
  log.policy = policy.name();
  log.seed = seed;
  log.pool_size = int(pool.size());
  log.interval_s = sp.decision_interval_s;
  log.estimates.assign(pool.size(), {});

  LinkState link;
  SegmentCursor cursor(trace);
  std::vector<double> estimates(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i)
    estimates[i] = pool[i].estimate();

  std::vector<int> action_hist;
  std::vector<QosWindow> interval_windows;
  std::vector<TickStats> tick_buf;
  MetaState state = build_state({}, {}, int(pool.size()));

  double t = 0;
  double mos_v_sum = 0, mos_a_sum = 0;
  long n_windows = 0;

  for (int iv = 0; iv < n_intervals; ++iv) {
    DecideContext dc{iv, state, estimates};
    int action = policy.decide(dc);
    if (action < 0 || action >= int(pool.size()))
      fail_config("policy '" + policy.name() + "' returned invalid action " +
                  std::to_string(action));
    if (sf_idx >= 0 && pm_idx >= 0)
      log.decision_gaps.push_back(
          float(std::abs(estimates[sf_idx] - estimates[pm_idx])));

    int active = action;
    interval_windows.clear();
    double iv_mos_v = 0, iv_mos_a = 0;

    for (int w = 0; w < wpi; ++w) {
      tick_buf.clear();
      double video_kbit = 0, audio_kbit = 0, base_owd = 0;
      long lost_sum = 0, recvd = 0;
      for (int k = 0; k < sp.window_ticks; ++k) {
        const Segment& seg = cursor.at(t);
        link.video_enabled = t >= sp.video_start_delay_s - 1e-9;
        double send = pool[active].estimate();
        TickStats ts = step_tick(link, seg, send, rng, sp);
        tick_buf.push_back(ts);
        // goodput split for the MOS inputs, from the fluid quantities
        video_kbit += ts.video_pkts * sp.video_pkt_bytes * 8.0 / 1000.0;
        audio_kbit += ts.audio_pkts * sp.audio_pkt_bytes * 8.0 / 1000.0;
        base_owd += seg.base_owd_ms;
        lost_sum += ts.lost_pkts;
        recvd += ts.video_pkts + ts.audio_pkts;

        EstimatorObs obs{ts.recv_rate_kbps, ts.owd_ms, ts.lost_pkts,
                         ts.video_pkts + ts.audio_pkts};
        for (std::size_t e = 0; e < pool.size(); ++e) {
          estimates[e] = pool[e].update(obs);
          log.estimates[e].push_back(float(estimates[e]));
        }
        t += sp.tick_s;
      }
      QosWindow qw = aggregate_window(tick_buf, sp);
      interval_windows.push_back(qw);

      double window_s = sp.window_ticks * sp.tick_s;
      double qdelay = std::max(0.0, qw.owd_ms - base_owd / sp.window_ticks);
      double loss_frac =
          (lost_sum + recvd) > 0
              ? double(lost_sum) / double(lost_sum + recvd)
              : 0.0;
      double mv = video_mos(video_kbit / window_s, qdelay, loss_frac, sp.qoe);
      double ma = audio_mos(audio_kbit / window_s, qdelay, loss_frac, sp.qoe);
      iv_mos_v += mv;
      iv_mos_a += ma;
      mos_v_sum += mv;
      mos_a_sum += ma;
      ++n_windows;

      WindowContext wc{iv, w, wpi, qw, int(recvd), estimates};
      int switch_to = policy.on_window(wc);
      if (switch_to >= 0) {
        if (switch_to >= int(pool.size()))
          fail_config("policy '" + policy.name() +
                      "' requested invalid estimator " +
                      std::to_string(switch_to));
        active = switch_to;
      }
    }

    DecisionRecord rec;
    rec.state = state;
    rec.action = action;
    rec.reward = float(iv_mos_v / wpi);
    rec.audio_mos = float(iv_mos_a / wpi);
    log.records.push_back(rec);

    action_hist.push_back(action);
    std::vector<int> last_actions(
        action_hist.end() -
            std::min<std::size_t>(action_hist.size(), kStateActionHist),
        action_hist.end());
    state = build_state(interval_windows, last_actions, int(pool.size()));
  }

  log.final_state = state;
  log.mean_video_mos = mos_v_sum / double(n_windows);
  log.mean_audio_mos = mos_a_sum / double(n_windows);
  return log;
}

}  // namespace ivy
