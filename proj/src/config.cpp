#include "config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace ivy {

const std::vector<ConfigKey>& Config::keys() {
  static const std::vector<ConfigKey> k = {
      {"paths.traces", "out/traces", "directory for generated trace files"},
      {"paths.dataset", "out/dataset.ivd", "offline experience dataset file"},
      {"paths.checkpoint", "out/policy.ivc", "trained policy checkpoint file"},
      {"paths.loss_trace", "out/loss.csv", "per-epoch training loss file"},
      {"paths.reports", "out/reports", "directory for evaluation reports"},

      {"run.seed", "1", "master seed for traces, calls, and collection"},
      {"run.pool", "safe_filter,probe_max,loss_tolerant",
       "estimator pool, comma separated"},
      {"run.gen_traces", "5", "trace files per regime for gen-traces"},
      {"run.call_duration", "120", "call length in seconds"},
      {"run.decision_interval", "6",
       "seconds between estimator selections; multiple of 0.6"},
      {"run.collect_calls", "2000", "random-policy calls to collect"},
      {"run.eval_calls", "50", "evaluation calls per policy per regime"},
      {"run.nonstationary_calls", "30", "calls for the nonstationary scenario"},
      {"run.ablate_intervals", "1.2,3,4.8,6",
       "decision intervals for the ablation, seconds"},
      {"run.ablate_collect_calls", "400",
       "collection calls per ablation interval"},
      {"run.ablate_epochs", "60", "training epochs per ablation interval"},
      {"run.threads", "0", "worker threads; 0 = all hardware threads"},
      {"run.paired", "true", "same traces and seeds across evaluated policies"},
      {"run.video_start_delay", "0", "audio-only lead-in seconds per call"},

      {"train.gamma", "0.99", "discount factor"},
      {"train.tau", "0.7", "expectile for the value fit"},
      {"train.beta", "3.0", "advantage weighting temperature"},
      {"train.adv_clip", "100", "ceiling on the advantage weight"},
      {"train.lr", "3e-4", "SGD learning rate"},
      {"train.polyak", "0.005", "target-network averaging rate"},
      {"train.batch", "128", "transitions per gradient step"},
      {"train.epochs", "200", "passes over the dataset"},
      {"train.hidden", "128", "width of both hidden layers"},
      {"train.seed", "1", "weight init and shuffling seed"},

      {"qoe.video_rate_half", "300", "kbps where video quality reaches ~half"},
      {"qoe.video_rate_max", "8000", "kbps where video quality saturates"},
      {"qoe.video_delay_scale", "250", "ms scale of video delay penalty"},
      {"qoe.video_loss_exp", "8", "video loss penalty exponent"},
      {"qoe.audio_rate_full", "40", "kbps for full audio quality"},
      {"qoe.audio_delay_scale", "400", "ms scale of audio delay penalty"},
      {"qoe.audio_loss_exp", "4", "audio loss penalty exponent"},

      {"bwe.init", "300", "initial estimate, kbps"},
      {"bwe.min", "10", "estimate floor, kbps"},
      {"bwe.max", "8000", "estimate ceiling, kbps"},
      {"bwe.srecv_alpha", "0.1", "receive-rate EWMA weight"},
      {"bwe.loss_alpha", "0.05", "loss-fraction EWMA weight"},
      {"bwe.baseline_drift", "0.25", "owd floor drift, ms per tick"},
      {"bwe.zero_loss_eps", "0.001", "loss EWMA treated as clean below this"},
      {"bwe.sf_cap", "1000", "safe_filter rate cap, kbps"},
      {"bwe.sf_step", "20", "safe_filter additive step, kbps per tick"},
      {"bwe.sf_grow_below", "25", "safe_filter grows under this qdelay, ms"},
      {"bwe.sf_backoff_above", "50",
       "safe_filter backs off over this qdelay, ms"},
      {"bwe.sf_backoff", "0.85", "safe_filter multiplicative backoff"},
      {"bwe.sf_cooldown", "10", "safe_filter ticks without growth after backoff"},
      {"bwe.pm_growth", "1.08", "probe_max growth factor per tick"},
      {"bwe.pm_srecv_mult", "1.25", "probe_max bound over smoothed receive"},
      {"bwe.pm_grow_below", "50", "probe_max grows under this qdelay, ms"},
      {"bwe.pm_hold_mult", "0.85",
       "probe_max drain fraction of smoothed receive"},
      {"bwe.pm_recover_mult", "0.9",
       "probe_max post-drain growth floor over smoothed receive"},
      {"bwe.pm_drain_mult", "0.5",
       "probe_max scheduled-drain fraction of smoothed receive"},
      {"bwe.pm_reanchor_ticks", "100",
       "probe_max clean ticks between scheduled queue drains"},
      {"bwe.pm_drain_ticks", "4", "probe_max scheduled drain length, ticks"},
      {"bwe.pm_loss_backoff", "0.02", "probe_max loss EWMA backoff threshold"},
      {"bwe.pm_qdelay_gate", "150", "probe_max qdelay gate, ms"},
      {"bwe.pm_backoff", "0.7", "probe_max multiplicative backoff"},
      {"bwe.pm_cooldown", "20", "probe_max ticks without growth after backoff"},
      {"bwe.lt_qdelay_gate", "250", "loss_tolerant qdelay gate, ms"},
      {"bwe.lt_backoff", "0.6", "loss_tolerant multiplicative backoff"},
      {"bwe.lt_loss_backoff", "0.02",
       "loss_tolerant loss threshold when queued"},
      {"bwe.lt_loss_qdelay", "75",
       "loss_tolerant counts loss only over this qdelay, ms"},

      {"eval.jitter_threshold", "25", "owd std threshold for the jitter rule, ms"},
      {"eval.delta_sigma", "0",
       "estimate-gap sigma for the delta rule; 0 = from dataset"},
      {"eval.vivace_exponent", "0.9", "vivace utility rate exponent"},
      {"eval.vivace_rtt_coef", "0.009", "vivace delay-gradient coefficient"},
      {"eval.vivace_loss_coef", "11.35", "vivace loss coefficient"},
  };
  return k;
}

Config::Config() {
  values_.reserve(keys().size());
  for (const ConfigKey& k : keys()) values_.push_back(k.def);
}

std::size_t Config::index_of(const std::string& key) const {
  const std::vector<ConfigKey>& ks = keys();
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (key == ks[i].name) return i;
  fail_config("unknown config key '" + key + "'");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace((unsigned char)s[a])) ++a;
  while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
  return s.substr(a, b - a);
}

}  // namespace

void Config::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail_input("cannot open config file '" + path + "'");
  std::string line, section;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail_config(path + ":" + std::to_string(lineno) +
                    ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail_config(path + ":" + std::to_string(lineno) +
                  ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!section.empty() && key.find('.') == std::string::npos)
      key = section + "." + key;
    set(key, val);
  }
}

void Config::set(const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos)
    fail_config("expected 'section.key=value', got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  values_[index_of(key)] = value;
}

const std::string& Config::get_str(const std::string& key) const {
  return values_[index_of(key)];
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get_str(key);
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    fail_config("config key '" + key + "' needs a number, got '" + v + "'");
  return x;
}

int Config::get_int(const std::string& key) const {
  double x = get_double(key);
  int i = int(x);
  if (double(i) != x)
    fail_config("config key '" + key + "' needs an integer");
  return i;
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string& v = get_str(key);
  char* end = nullptr;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    fail_config("config key '" + key + "' needs an unsigned integer, got '" +
                v + "'");
  return std::uint64_t(x);
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get_str(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail_config("config key '" + key + "' needs true or false, got '" + v + "'");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get_str(key));
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!trim(tok).empty()) out.push_back(trim(tok));
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& tok : get_list(key)) {
    char* end = nullptr;
    double x = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      fail_config("config key '" + key + "' needs numbers, got '" + tok + "'");
    out.push_back(x);
  }
  return out;
}

std::string Config::dump() const {
  std::string out;
  const std::vector<ConfigKey>& ks = keys();
  for (std::size_t i = 0; i < ks.size(); ++i)
    out += std::string(ks[i].name) + " = " + values_[i] + "\n";
  return out;
}

}  // namespace ivy
