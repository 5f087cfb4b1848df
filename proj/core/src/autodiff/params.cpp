#include "repcount/autodiff/params.hpp"

#include <cmath>

#include "repcount/error.hpp"

namespace repcount::ad {

void ParamStore::add(const std::string& name, Tensor value) {
  if (!params_.emplace(name, std::move(value)).second) throw Error("ParamStore: duplicate parameter '" + name + "'");
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

BoundParams::BoundParams(Tape& tape, const ParamStore& store, bool requires_grad) : tape_(&tape) {
  for (const auto& [name, value] : store.entries()) vars_.emplace(name, tape.leaf(value, requires_grad));
}

Var BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw Error("BoundParams: unknown parameter '" + name + "'");
  return it->second;
}

std::map<std::string, std::vector<double>> BoundParams::grads() const {
  std::map<std::string, std::vector<double>> out;
  for (const auto& [name, var] : vars_) {
    const auto g = tape_->grad(var);
    out[name] = g.empty() ? std::vector<double>(var.value().size(), 0.0) : std::vector<double>(g.begin(), g.end());
  }
  return out;
}

Tensor xavier_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(shape);
  for (auto& v : t.storage()) v = dist(rng);
  return t;
}

}  // namespace repcount::ad
