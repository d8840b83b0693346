#include "trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "error.hpp"
#include "rng.hpp"

namespace ivy {

namespace {

const double kBaseOwdLoMs = 20.0;
const double kBaseOwdHiMs = 80.0;
const double kFluctSegLoS = 5.0;
const double kFluctSegHiS = 15.0;
const double kBurstQuietLoS = 4.0;
const double kBurstQuietHiS = 10.0;
const double kBurstLossLoS = 2.0;
const double kBurstLossHiS = 6.0;
const double kQuietLossHi = 0.01;
const double kBurstLossLo = 0.05;
const double kBurstLossHi = 0.15;
// lte swings stay within a per-trace neighborhood instead of the full band,
// and carry light random loss; see lte_segments below.
const double kLteCenterLo = 900.0;
const double kLteCenterHi = 2400.0;
const double kLteSegLoS = 8.0;
const double kLteSegHiS = 20.0;
const double kLteLossLo = 0.01;
const double kLteLossHi = 0.04;
// Constrained links carry residual random loss; clean high-capacity
// paths do not. This asymmetry is what separates loss-shy from
// loss-tolerant estimators across bands.
const double kLbwLossLo = 0.002;
const double kLbwLossHi = 0.01;

double clampd(double x, double lo, double hi) {
  return std::min(hi, std::max(lo, x));
}

void stable_segments(Trace& t, Rng& rng, Band band, double duration,
                     double loss_lo, double loss_hi) {
  double owd = rng.uniform(kBaseOwdLoMs, kBaseOwdHiMs);
  double loss = rng.uniform(loss_lo, loss_hi);
  t.segments.push_back(
      {duration, rng.uniform(band.lo_kbps, band.hi_kbps), owd, loss});
}

void fluct_segments(Trace& t, Rng& rng, Band band, double duration,
                    double loss_lo, double loss_hi) {
  double owd = rng.uniform(kBaseOwdLoMs, kBaseOwdHiMs);
  double left = duration;
  while (left > 1e-9) {
    double dur = std::min(left, rng.uniform(kFluctSegLoS, kFluctSegHiS));
    double loss = rng.uniform(loss_lo, loss_hi);
    t.segments.push_back(
        {dur, rng.uniform(band.lo_kbps, band.hi_kbps), owd, loss});
    left -= dur;
  }
}

void burst_segments(Trace& t, Rng& rng, Band band, double duration) {
  double owd = rng.uniform(kBaseOwdLoMs, kBaseOwdHiMs);
  double cap = rng.uniform(band.lo_kbps, band.hi_kbps);
  double left = duration;
  bool quiet = true;  // always open with a quiet period
  while (left > 1e-9) {
    double dur = quiet ? rng.uniform(kBurstQuietLoS, kBurstQuietHiS)
                       : rng.uniform(kBurstLossLoS, kBurstLossHiS);
    double loss = quiet ? rng.uniform(0.0, kQuietLossHi)
                        : rng.uniform(kBurstLossLo, kBurstLossHi);
    dur = std::min(left, dur);
    t.segments.push_back({dur, cap, owd, loss});
    left -= dur;
    quiet = !quiet;
  }
}

void lte_segments(Trace& t, Rng& rng, double duration) {
  Band band = lte_band();
  double owd = rng.uniform(kBaseOwdLoMs, kBaseOwdHiMs);
  double center = rng.uniform(kLteCenterLo, kLteCenterHi);
  double left = duration;
  while (left > 1e-9) {
    double dur = std::min(left, rng.uniform(kLteSegLoS, kLteSegHiS));
    double cap = clampd(rng.uniform(0.75 * center, 1.3 * center),
                        band.lo_kbps, band.hi_kbps);
    t.segments.push_back({dur, cap, owd, rng.uniform(kLteLossLo, kLteLossHi)});
    left -= dur;
  }
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void parse_fail(const std::string& path, int line,
                             const std::string& what) {
  fail_input(path + ":" + std::to_string(line) + ": " + what);
}

double parse_double_field(const std::string& path, int line,
                          const std::string& key, const std::string& text) {
  try {
    size_t pos = 0;
    double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    parse_fail(path, line, "bad value for '" + key + "': '" + text + "'");
  }
}

}  // namespace

const std::vector<Regime>& eval_regimes() {
  static const std::vector<Regime> r = {
      Regime::kStableLbw, Regime::kFluctLbw, Regime::kBurstLbw,
      Regime::kStableHbw, Regime::kFluctHbw, Regime::kBurstHbw};
  return r;
}

const std::vector<Regime>& collect_regimes() {
  static const std::vector<Regime> r = {
      Regime::kStableLbw, Regime::kFluctLbw, Regime::kBurstLbw,
      Regime::kStableHbw, Regime::kFluctHbw, Regime::kBurstHbw, Regime::kLte};
  return r;
}

const char* regime_tag(Regime r) {
  switch (r) {
    case Regime::kStableLbw: return "stable_lbw";
    case Regime::kFluctLbw: return "fluct_lbw";
    case Regime::kBurstLbw: return "burst_lbw";
    case Regime::kStableHbw: return "stable_hbw";
    case Regime::kFluctHbw: return "fluct_hbw";
    case Regime::kBurstHbw: return "burst_hbw";
    case Regime::kLte: return "lte";
    case Regime::kNonstationary: return "nonstationary";
  }
  return "?";
}

Regime regime_from_tag(const std::string& tag) {
  for (Regime r : {Regime::kStableLbw, Regime::kFluctLbw, Regime::kBurstLbw,
                   Regime::kStableHbw, Regime::kFluctHbw, Regime::kBurstHbw,
                   Regime::kLte, Regime::kNonstationary}) {
    if (tag == regime_tag(r)) return r;
  }
  fail_config("unknown regime tag '" + tag + "'");
}

Band lbw_band() { return {150.0, 500.0}; }
Band hbw_band() { return {2000.0, 8000.0}; }
Band lte_band() { return {600.0, 3000.0}; }

double Trace::total_duration() const {
  double s = 0;
  for (const Segment& seg : segments) s += seg.duration_s;
  return s;
}

Trace generate_trace(Regime regime, std::uint64_t seed, double duration_s) {
  if (duration_s <= 0) fail_config("trace duration must be positive");
  Trace t;
  t.regime = regime;
  t.seed = seed;
  t.id = std::string(regime_tag(regime)) + "-" + std::to_string(seed);
  Rng rng(mix_seed(seed, 0x7261CEULL + std::uint64_t(regime)));
  switch (regime) {
    case Regime::kStableLbw:
      stable_segments(t, rng, lbw_band(), duration_s, kLbwLossLo, kLbwLossHi);
      break;
    case Regime::kFluctLbw:
      fluct_segments(t, rng, lbw_band(), duration_s, kLbwLossLo, kLbwLossHi);
      break;
    case Regime::kBurstLbw: burst_segments(t, rng, lbw_band(), duration_s); break;
    case Regime::kStableHbw:
      stable_segments(t, rng, hbw_band(), duration_s, 0.0, 0.0);
      break;
    case Regime::kFluctHbw:
      fluct_segments(t, rng, hbw_band(), duration_s, 0.0, 0.0);
      break;
    case Regime::kBurstHbw: burst_segments(t, rng, hbw_band(), duration_s); break;
    case Regime::kLte: lte_segments(t, rng, duration_s); break;
    case Regime::kNonstationary: {
      // Thirds: low band, then lte-like, then high band. Base delay is
      // redrawn per phase, mimicking a path change.
      double third = duration_s / 3.0;
      stable_segments(t, rng, lbw_band(), third, kLbwLossLo, kLbwLossHi);
      lte_segments(t, rng, third);
      stable_segments(t, rng, hbw_band(), third, 0.0, 0.0);
      break;
    }
  }
  return t;
}

void save_trace(const Trace& t, const std::string& path) {
  std::ostringstream out;
  out << "IVYTRACE v1\n";
  out << "id=" << t.id << " regime=" << regime_tag(t.regime)
      << " seed=" << t.seed << "\n";
  for (const Segment& s : t.segments) {
    out << "seg dur=" << fmt_double(s.duration_s)
        << " cap=" << fmt_double(s.capacity_kbps)
        << " owd=" << fmt_double(s.base_owd_ms)
        << " loss=" << fmt_double(s.random_loss) << "\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) fail_input("cannot open '" + path + "' for writing");
  f << out.str();
  if (!f.good()) fail_input("write failed for '" + path + "'");
}

Trace load_trace(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_input("cannot open trace file '" + path + "'");
  std::string line;
  int lineno = 0;

  auto next_line = [&]() -> bool {
    while (std::getline(f, line)) {
      ++lineno;
      if (!line.empty()) return true;
    }
    return false;
  };

  if (!next_line() || line != "IVYTRACE v1")
    parse_fail(path, lineno, "expected magic 'IVYTRACE v1'");

  if (!next_line()) parse_fail(path, lineno, "missing trace header line");
  Trace t;
  {
    std::istringstream hs(line);
    std::string tok;
    bool got_id = false, got_regime = false, got_seed = false;
    while (hs >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos)
        parse_fail(path, lineno, "expected key=value, got '" + tok + "'");
      std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "id") {
        t.id = val;
        got_id = true;
      } else if (key == "regime") {
        try {
          t.regime = regime_from_tag(val);
        } catch (const Error&) {
          parse_fail(path, lineno, "unknown regime '" + val + "'");
        }
        got_regime = true;
      } else if (key == "seed") {
        try {
          t.seed = std::stoull(val);
        } catch (const std::exception&) {
          parse_fail(path, lineno, "bad seed '" + val + "'");
        }
        got_seed = true;
      } else {
        parse_fail(path, lineno, "unknown header key '" + key + "'");
      }
    }
    if (!got_id || !got_regime || !got_seed)
      parse_fail(path, lineno, "header needs id=, regime=, seed=");
  }

  while (next_line()) {
    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head != "seg")
      parse_fail(path, lineno, "expected 'seg' record, got '" + head + "'");
    Segment seg;
    bool got_dur = false, got_cap = false, got_owd = false, got_loss = false;
    std::string tok;
    while (ss >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos)
        parse_fail(path, lineno, "expected key=value, got '" + tok + "'");
      std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      double v = parse_double_field(path, lineno, key, val);
      if (key == "dur") {
        seg.duration_s = v;
        got_dur = true;
      } else if (key == "cap") {
        seg.capacity_kbps = v;
        got_cap = true;
      } else if (key == "owd") {
        seg.base_owd_ms = v;
        got_owd = true;
      } else if (key == "loss") {
        seg.random_loss = v;
        got_loss = true;
      } else {
        parse_fail(path, lineno, "unknown segment key '" + key + "'");
      }
    }
    if (!got_dur || !got_cap || !got_owd || !got_loss)
      parse_fail(path, lineno, "segment needs dur=, cap=, owd=, loss=");
    if (seg.duration_s <= 0)
      parse_fail(path, lineno, "field 'dur' must be positive");
    if (seg.capacity_kbps <= 0)
      parse_fail(path, lineno, "field 'cap' must be positive");
    if (seg.base_owd_ms < 0)
      parse_fail(path, lineno, "field 'owd' must be non-negative");
    if (seg.random_loss < 0 || seg.random_loss > 1)
      parse_fail(path, lineno, "field 'loss' must be within [0,1]");
    t.segments.push_back(seg);
  }
  if (t.segments.empty()) parse_fail(path, lineno, "trace has no segments");
  return t;
}

}  // namespace ivy
