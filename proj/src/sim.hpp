#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bwe.hpp"
#include "meta_state.hpp"
#include "qoe.hpp"
#include "rng.hpp"
#include "trace.hpp"

namespace ivy {

class Metapolicy;

struct SimParams {
  double tick_s = 0.06;
  int window_ticks = 10;               // 600 ms QoS windows
  double decision_interval_s = 6.0;
  double call_duration_s = 120.0;
  double queue_cap_s = 0.4;            // bottleneck buffer, seconds at capacity
  double audio_rate_kbps = 40.0;
  double audio_pkt_per_s = 50.0;
  double audio_pkt_bytes = 80.0;
  double video_pkt_bytes = 1000.0;
  double video_start_delay_s = 0.0;    // audio-only lead-in when > 0
  QoeParams qoe;

  int windows_per_interval() const;    // validates divisibility
};

// One 60 ms step of the bottleneck. Queue is fluid (kilobits) split into
// audio/video components so received packet proportions stay meaningful.
struct LinkState {
  double queue_audio_kbit = 0;
  double queue_video_kbit = 0;
  bool video_enabled = true;
  // fractional packet carries
  double audio_sent_acc = 0;
  double video_sent_acc = 0;
  double audio_recv_acc = 0;
  double video_recv_acc = 0;
  double drop_acc = 0;

  double queue_kbit() const { return queue_audio_kbit + queue_video_kbit; }
};

struct TickStats {
  double send_rate_kbps = 0;
  double recv_rate_kbps = 0;
  double owd_ms = 0;
  int lost_pkts = 0;     // random losses plus queue-overflow drops
  int video_pkts = 0;    // received
  int audio_pkts = 0;    // received
  double queue_kbits = 0;
};

TickStats step_tick(LinkState& link, const Segment& seg, double send_rate_kbps,
                    Rng& rng, const SimParams& sp);

struct QosWindow {
  double recv_rate_kbps = 0;   // mean
  double lost_pkts = 0;        // sum
  double owd_ms = 0;           // mean
  double interarrival_ms = 0;  // window length / received packets
  double video_prop = 0;
  double audio_prop = 0;
};

// Requires exactly sp.window_ticks entries.
QosWindow aggregate_window(const std::vector<TickStats>& ticks,
                           const SimParams& sp);

struct DecisionRecord {
  MetaState state{};
  int action = 0;
  float reward = 0;     // mean video MOS over the interval
  float audio_mos = 0;  // mean audio MOS over the interval
};

struct CallLog {
  std::string trace_id;
  std::string policy;
  std::uint64_t seed = 0;
  int pool_size = 0;
  double interval_s = 0;
  std::vector<DecisionRecord> records;
  MetaState final_state{};
  // Per-estimator estimate after each tick's update, for the whole call.
  std::vector<std::vector<float>> estimates;
  // |safe_filter - probe_max| at each decision instant; empty when the
  // pool lacks either one.
  std::vector<float> decision_gaps;
  double mean_video_mos = 0;
  double mean_audio_mos = 0;
};

// Simulates one call end to end. All randomness comes from `seed`;
// shadow estimators run on every tick, the policy's chosen one sends.
CallLog run_call(const Trace& trace, Metapolicy& policy,
                 std::vector<Estimator>& pool, const SimParams& sp,
                 std::uint64_t seed);

}  // namespace ivy
