#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "repcount/autodiff/tape.hpp"

namespace repcount::ad {

/// Named trainable arrays, ordered by name.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t total_size() const;

  const std::map<std::string, Tensor>& entries() const { return params_; }
  std::map<std::string, Tensor>& entries() { return params_; }

  bool operator==(const ParamStore&) const = default;

 private:
  std::map<std::string, Tensor> params_;
};

/// Parameters registered as leaves of one tape.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamStore& store, bool requires_grad);
  Var operator[](const std::string& name) const;
  /// Gradient of every parameter after Tape::backward; zeros where nothing flowed.
  std::map<std::string, std::vector<double>> grads() const;

 private:
  Tape* tape_;
  std::map<std::string, Var> vars_;
};

/// Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace repcount::ad
