// Rebalancing strategies with exact target-count control: random
// under-sampling, SMOTE-NC, CTGAN over-sampling, and CTGAN-RU mixed-sampling.
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rebal/ctgan.hpp"
#include "rebal/tabular.hpp"

namespace rebal::resampling {

enum class Method { ru, smote_nc, ctgan, ctgan_ru };

Method method_from_name(const std::string& name);
std::string method_name(Method m);

struct ResamplePlan {
  Method method = Method::ru;
  std::map<int, long> targets;     // label category index -> final count; absent = keep
  std::map<int, long> ru_targets;  // mixed-sampling stage-1 targets
  int k_neighbors = 5;             // smote_nc
  int minority_class = -1;         // smote_nc / ctgan over-sampling
  ctgan::CtganConfig ctgan_config;
  std::uint64_t seed = 0;

  void validate(const Dataset& data) const;
};

// Uniform, seed-deterministic subset; classes absent from targets are kept
// whole. Surviving rows keep their original order.
Dataset random_undersample(const Dataset& data, const std::map<int, long>& targets,
                           std::uint64_t seed);

// Appends n_synthetic minority rows. Continuous features interpolate between
// a seed row and one of its k nearest minority neighbours; nominal features
// take the neighbour majority vote (ties -> lowest category index).
Dataset smote_nc(const Dataset& data, int minority_class, int k_neighbors, long n_synthetic,
                 std::uint64_t seed);

// Trains a CTGAN on the data and appends generated rows, with the condition
// fixed to the minority label, until the class reaches target_count.
Dataset ctgan_oversample(const Dataset& data, int minority_class, long target_count,
                         const ctgan::CtganConfig& config);

// Stage 1: random under-sampling to ru_targets. Stage 2: a single CTGAN is
// trained on the reduced data and queried per expanded class until the class
// counts equal final_targets exactly.
Dataset ctgan_ru(const Dataset& data, const std::map<int, long>& ru_targets,
                 const std::map<int, long>& final_targets, const ctgan::CtganConfig& config);

Dataset apply(const Dataset& data, const ResamplePlan& plan);

}  // namespace rebal::resampling
