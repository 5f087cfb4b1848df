#include "repcount/autodiff/adam.hpp"

#include <cmath>

#include "repcount/error.hpp"

namespace repcount::ad {

void adam_step(ParamStore& params, const std::map<std::string, std::vector<double>>& grads, AdamState& state) {
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw Error("adam_step: gradient for unknown parameter '" + name + "'");
    if (g.size() != params.at(name).size()) {
      throw ShapeError("adam_step: gradient for '" + name + "' has " + std::to_string(g.size()) +
                       " entries, parameter has " + std::to_string(params.at(name).size()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, p] : params.entries()) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    const auto it = grads.find(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = it == grads.end() ? 0.0 : it->second[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace repcount::ad
