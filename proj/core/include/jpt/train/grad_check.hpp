#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>

#include "jpt/nn/params.hpp"

namespace jpt {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

// Builds the scalar loss over a binding of `params` (bound trainable); may
// bind further frozen tensors.
using LossBuilder = std::function<ad::Var(Binding&)>;

// Central differences on a random sample of `samples` coordinates (all of
// them when fewer exist). Relative error is |a - n| / max(|a|, |n|, 1e-6).
// eps must be positive.
GradCheckResult grad_check(ParamSet& params, const LossBuilder& loss, double eps, std::size_t samples,
                           std::uint64_t seed);

enum class GradCheckTarget { kIdentityLinear, kTokenMlp, kEntityMlp, kBilinear, kWeightedCe, kFocal, kPipeline };
GradCheckTarget parse_grad_check_target(std::string_view name);

// Random instance for one component, checked end to end.
GradCheckResult grad_check(GradCheckTarget target, std::uint64_t seed, double eps = 1e-5, std::size_t samples = 256);

}  // namespace jpt
