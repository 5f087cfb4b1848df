#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "repcount/autodiff/params.hpp"

namespace repcount::ad {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

/// One bias-corrected Adam update. Parameters missing from `grads` see a zero gradient.
void adam_step(ParamStore& params, const std::map<std::string, std::vector<double>>& grads,
               AdamState& state);

}  // namespace repcount::ad
