#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meta_state.hpp"

namespace ivy {

struct CallLog;

struct Transition {
  MetaState s{};
  int a = 0;
  float r = 0;
  MetaState s2{};
  bool done = false;
  std::string call;
};

struct Dataset {
  int pool_size = 0;
  double interval_s = 0;
  std::vector<Transition> transitions;
  // Decision-time |safe_filter - probe_max| per transition. Parallel to
  // transitions when present; persisted in a sidecar file, not the main
  // dataset file.
  std::vector<float> gaps;
};

// One (s, a, r, s', done) tuple per decision interval of the call.
void append_transitions(Dataset& ds, const CallLog& log);

void save_dataset(const Dataset& ds, const std::string& path);
// Loads `path`; picks up the gap sidecar `<path>.gaps` when present.
Dataset load_dataset(const std::string& path);

std::string gaps_sidecar_path(const std::string& dataset_path);

}  // namespace ivy
