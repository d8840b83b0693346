#include "dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "error.hpp"
#include "sim.hpp"

namespace ivy {

namespace {

// Shortest float32 round-trip form.
std::string fmt_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", double(v));
  return buf;
}

std::string fmt_state(const MetaState& s) {
  std::string out;
  out.reserve(s.size() * 10);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out.push_back(',');
    out += fmt_float(s[i]);
  }
  return out;
}

[[noreturn]] void parse_fail(const std::string& path, int line,
                             const std::string& what) {
  fail_input(path + ":" + std::to_string(line) + ": " + what);
}

MetaState parse_state(const std::string& path, int line,
                      const std::string& text) {
  MetaState s{};
  std::size_t pos = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t next = text.find(',', pos);
    std::string tok = text.substr(
        pos, next == std::string::npos ? std::string::npos : next - pos);
    try {
      std::size_t used = 0;
      s[i] = std::stof(tok, &used);
      if (used != tok.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      parse_fail(path, line,
                 "bad state component " + std::to_string(i) + ": '" + tok + "'");
    }
    if (next == std::string::npos) {
      if (i + 1 != s.size())
        parse_fail(path, line, "state has fewer than " +
                                   std::to_string(s.size()) + " components");
      pos = text.size();
    } else {
      pos = next + 1;
    }
  }
  if (pos != text.size())
    parse_fail(path, line,
               "state has more than " + std::to_string(s.size()) + " components");
  return s;
}

}  // namespace

std::string gaps_sidecar_path(const std::string& dataset_path) {
  return dataset_path + ".gaps";
}

void append_transitions(Dataset& ds, const CallLog& log) {
  if (log.records.empty()) return;
  if (ds.pool_size == 0) {
    ds.pool_size = log.pool_size;
    ds.interval_s = log.interval_s;
  }
  if (ds.pool_size != log.pool_size)
    fail_config("call pool size does not match dataset");
  bool with_gaps = log.decision_gaps.size() == log.records.size();
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    Transition t;
    t.s = log.records[i].state;
    t.a = log.records[i].action;
    t.r = log.records[i].reward;
    t.s2 = i + 1 < log.records.size() ? log.records[i + 1].state
                                      : log.final_state;
    t.done = i + 1 == log.records.size();
    t.call = log.trace_id;
    ds.transitions.push_back(std::move(t));
    if (with_gaps) ds.gaps.push_back(log.decision_gaps[i]);
  }
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ostringstream out;
  char head[128];
  std::snprintf(head, sizeof head, "IVYDATA v1 pool=%d interval=%.9g\n",
                ds.pool_size, ds.interval_s);
  out << head;
  for (const Transition& t : ds.transitions) {
    out << "s=" << fmt_state(t.s) << " a=" << t.a << " r=" << fmt_float(t.r)
        << " s2=" << fmt_state(t.s2) << " done=" << (t.done ? 1 : 0)
        << " call=" << t.call << "\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) fail_input("cannot open '" + path + "' for writing");
  f << out.str();
  if (!f.good()) fail_input("write failed for '" + path + "'");

  if (!ds.gaps.empty()) {
    if (ds.gaps.size() != ds.transitions.size())
      fail_config("gap sidecar length does not match transitions");
    std::ofstream g(gaps_sidecar_path(path), std::ios::binary);
    if (!g) fail_input("cannot open gap sidecar for writing");
    g << "IVYGAPS v1\n";
    for (float v : ds.gaps) g << fmt_float(v) << "\n";
    if (!g.good()) fail_input("write failed for gap sidecar");
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_input("cannot open dataset file '" + path + "'");
  Dataset ds;
  std::string line;
  int lineno = 0;

  if (!std::getline(f, line)) parse_fail(path, 1, "empty file");
  ++lineno;
  {
    int pool = 0;
    double interval = 0;
    if (std::sscanf(line.c_str(), "IVYDATA v1 pool=%d interval=%lf", &pool,
                    &interval) != 2)
      parse_fail(path, lineno, "expected 'IVYDATA v1 pool=<n> interval=<f>'");
    if (pool < 2) parse_fail(path, lineno, "pool size must be at least 2");
    if (!(interval > 0)) parse_fail(path, lineno, "interval must be positive");
    ds.pool_size = pool;
    ds.interval_s = interval;
  }

  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    Transition t;
    std::istringstream ss(line);
    std::string tok;
    bool got_s = false, got_a = false, got_r = false, got_s2 = false,
         got_done = false, got_call = false;
    while (ss >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos)
        parse_fail(path, lineno, "expected key=value, got '" + tok + "'");
      std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "s") {
        t.s = parse_state(path, lineno, val);
        got_s = true;
      } else if (key == "s2") {
        t.s2 = parse_state(path, lineno, val);
        got_s2 = true;
      } else if (key == "a") {
        try {
          t.a = std::stoi(val);
        } catch (const std::exception&) {
          parse_fail(path, lineno, "bad action '" + val + "'");
        }
        if (t.a < 0 || t.a >= ds.pool_size)
          parse_fail(path, lineno, "action " + val + " outside pool");
        got_a = true;
      } else if (key == "r") {
        try {
          t.r = std::stof(val);
        } catch (const std::exception&) {
          parse_fail(path, lineno, "bad reward '" + val + "'");
        }
        got_r = true;
      } else if (key == "done") {
        if (val != "0" && val != "1")
          parse_fail(path, lineno, "done must be 0 or 1");
        t.done = val == "1";
        got_done = true;
      } else if (key == "call") {
        t.call = val;
        got_call = true;
      } else {
        parse_fail(path, lineno, "unknown record key '" + key + "'");
      }
    }
    if (!(got_s && got_a && got_r && got_s2 && got_done && got_call))
      parse_fail(path, lineno, "record needs s=, a=, r=, s2=, done=, call=");
    ds.transitions.push_back(std::move(t));
  }

  std::ifstream g(gaps_sidecar_path(path), std::ios::binary);
  if (g) {
    std::string gpath = gaps_sidecar_path(path);
    int glineno = 0;
    if (!std::getline(g, line) || line != "IVYGAPS v1")
      parse_fail(gpath, 1, "expected magic 'IVYGAPS v1'");
    ++glineno;
    while (std::getline(g, line)) {
      ++glineno;
      if (line.empty()) continue;
      try {
        ds.gaps.push_back(std::stof(line));
      } catch (const std::exception&) {
        parse_fail(gpath, glineno, "bad gap value '" + line + "'");
      }
    }
    if (ds.gaps.size() != ds.transitions.size())
      fail_input(gpath + ": gap count " + std::to_string(ds.gaps.size()) +
                 " does not match transition count " +
                 std::to_string(ds.transitions.size()));
  }
  return ds;
}

}  // namespace ivy
