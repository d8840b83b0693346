#pragma once

#include <array>

namespace ivy {

// Observation layout fed to the learner: six blocks of the last 10 QoS
// windows (receive rate, lost packets, one-way delay, interarrival gap,
// video proportion, audio proportion) plus the last 5 action indices.
inline constexpr int kStateWindows = 10;
inline constexpr int kStateActionHist = 5;
inline constexpr int kStateFeatures = 6;
inline constexpr int kMetaStateDim =
    kStateWindows * kStateFeatures + kStateActionHist;  // 65

using MetaState = std::array<float, kMetaStateDim>;

}  // namespace ivy
