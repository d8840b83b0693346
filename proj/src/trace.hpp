#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ivy {

enum class Regime {
  kStableLbw,
  kFluctLbw,
  kBurstLbw,
  kStableHbw,
  kFluctHbw,
  kBurstHbw,
  kLte,
  kNonstationary,
};

// The six fixed-band regimes used for A/B evaluation, in report order.
const std::vector<Regime>& eval_regimes();
// Those six plus lte; the sampling pool for offline collection.
const std::vector<Regime>& collect_regimes();

const char* regime_tag(Regime r);
Regime regime_from_tag(const std::string& tag);

struct Band {
  double lo_kbps;
  double hi_kbps;
};

// Capacity bands per regime family.
Band lbw_band();
Band hbw_band();
Band lte_band();

struct Segment {
  double duration_s = 0;
  double capacity_kbps = 0;
  double base_owd_ms = 0;
  double random_loss = 0;  // fraction in [0, 1]

  bool operator==(const Segment&) const = default;
};

struct Trace {
  std::string id;
  Regime regime = Regime::kStableLbw;
  std::uint64_t seed = 0;
  std::vector<Segment> segments;

  double total_duration() const;
  bool operator==(const Trace&) const = default;
};

// Deterministic in (regime, seed, duration): the same triple always yields
// the same trace, independent of call site.
Trace generate_trace(Regime regime, std::uint64_t seed, double duration_s);

void save_trace(const Trace& t, const std::string& path);
Trace load_trace(const std::string& path);

}  // namespace ivy
