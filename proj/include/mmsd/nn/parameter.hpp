#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mmsd/tensor.hpp"

namespace mmsd::nn {

template <typename Scalar>
struct Parameter {
  RowMatrix<Scalar> value;
  RowMatrix<Scalar> grad;

  Parameter() = default;
  Parameter(Eigen::Index rows, Eigen::Index cols)
      : value(RowMatrix<Scalar>::Zero(rows, cols)), grad(RowMatrix<Scalar>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

template <typename Scalar>
struct NamedParameter {
  std::string name;
  Parameter<Scalar>* param;
};

template <typename Scalar>
using ParameterList = std::vector<NamedParameter<Scalar>>;

template <typename Scalar>
void zero_grads(const ParameterList<Scalar>& params) {
  for (const auto& p : params) p.param->zero_grad();
}

template <typename Scalar>
void scale_grads(const ParameterList<Scalar>& params, Scalar factor) {
  for (const auto& p : params) p.param->grad *= factor;
}

template <typename Scalar>
void set_zero(const ParameterList<Scalar>& params) {
  for (const auto& p : params) p.param->value.setZero();
}

/// Gaussian fill with standard deviation `stddev`.
template <typename Scalar>
void fill_normal(Parameter<Scalar>& p, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < p.value.size(); ++i)
    p.value.data()[i] = static_cast<Scalar>(dist(rng));
}

template <typename Scalar>
void fill_uniform(Parameter<Scalar>& p, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < p.value.size(); ++i)
    p.value.data()[i] = static_cast<Scalar>(dist(rng));
}

}  // namespace mmsd::nn
