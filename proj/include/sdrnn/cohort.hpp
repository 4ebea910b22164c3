#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sdrnn/numerics.hpp"

namespace sdrnn {

// Target column layout: (rejection, loss, death) x (6 months, 12 months).
inline constexpr int kNumLabels = 6;
inline constexpr int kHorizon6m = 183;   // days
inline constexpr int kHorizon12m = 365;  // days

inline constexpr const char* kLabelNames[kNumLabels] = {
    "rejection_6m", "rejection_12m", "loss_6m",
    "loss_12m",     "death_6m",      "death_12m"};

// One patient after preprocessing: feature vectors, targets and the
// censoring mask. Dynamic vectors are {0,1}-valued in the default pipeline
// and real-valued in the degraded (imputation) pipeline.
struct EncodedPatient {
  std::string id;
  Vector stat;
  std::vector<Vector> visits;
  std::vector<std::array<std::uint8_t, kNumLabels>> targets;
  std::vector<std::uint8_t> evaluable;  // per visit; 0 = censored
};

struct EncodedCohort {
  std::size_t static_dim = 0;
  std::size_t dynamic_dim = 0;
  std::vector<EncodedPatient> patients;

  std::size_t evaluable_visits() const {
    std::size_t n = 0;
    for (const auto& p : patients)
      for (auto e : p.evaluable) n += e;
    return n;
  }
};

}  // namespace sdrnn
