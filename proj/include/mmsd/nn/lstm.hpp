#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mmsd/nn/layers.hpp"

namespace mmsd::nn {

/// One direction of an LSTM layer. Gate rows are stacked [input; forget; cell; output].
template <typename Scalar>
class LstmCell {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  struct Trace {
    Matrix inputs;                // in × T
    std::vector<int> order;       // processing order of time indices
    Matrix gates;                 // 4H × T, post-activation, indexed by time
    Matrix cells;                 // H × T
    Matrix hidden;                // H × T
  };

  LstmCell() = default;
  LstmCell(int input_size, int hidden_size)
      : in_(input_size), hidden_(hidden_size),
        input_weight(4 * hidden_size, input_size),
        recurrent_weight(4 * hidden_size, hidden_size),
        bias(4 * hidden_size, 1) {}

  void init(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
    fill_uniform(input_weight, bound, rng);
    fill_uniform(recurrent_weight, bound, rng);
    fill_uniform(bias, bound, rng);
  }

  int input_size() const { return in_; }
  int hidden_size() const { return hidden_; }

  /// Runs over the columns of `x` (in × T), last-to-first when `reverse`.
  /// Returns hidden states H × T indexed by time.
  Matrix forward(const Matrix& x, bool reverse, Trace* trace = nullptr) const {
    require(x.rows() == in_, "lstm: input width mismatch");
    const int steps = static_cast<int>(x.cols());
    const int h = hidden_;
    Matrix gates(4 * h, steps), cells(h, steps), hidden(h, steps);
    Vector<Scalar> h_prev = Vector<Scalar>::Zero(h), c_prev = Vector<Scalar>::Zero(h);
    std::vector<int> order(steps);
    for (int s = 0; s < steps; ++s) order[s] = reverse ? steps - 1 - s : s;
    for (int t : order) {
      Vector<Scalar> z = input_weight.value * x.col(t) + recurrent_weight.value * h_prev + bias.value.col(0);
      for (int r = 0; r < h; ++r) {
        z[r] = sigmoid(z[r]);
        z[h + r] = sigmoid(z[h + r]);
        z[2 * h + r] = std::tanh(z[2 * h + r]);
        z[3 * h + r] = sigmoid(z[3 * h + r]);
      }
      Vector<Scalar> c = z.segment(h, h).cwiseProduct(c_prev) + z.head(h).cwiseProduct(z.segment(2 * h, h));
      Vector<Scalar> hh = z.tail(h).cwiseProduct(c.unaryExpr([](Scalar v) { return std::tanh(v); }));
      gates.col(t) = z;
      cells.col(t) = c;
      hidden.col(t) = hh;
      h_prev = hh;
      c_prev = c;
    }
    if (trace) {
      trace->inputs = x;
      trace->order = std::move(order);
      trace->gates = std::move(gates);
      trace->cells = std::move(cells);
      trace->hidden = hidden;
    }
    return hidden;
  }

  /// `grad_hidden` is dLoss/dh_t for every t (H × T). Returns dLoss/dx (in × T).
  Matrix backward(const Trace& trace, const Matrix& grad_hidden) {
    const int h = hidden_;
    const int steps = static_cast<int>(trace.order.size());
    Matrix grad_x = Matrix::Zero(in_, steps);
    Vector<Scalar> dh_next = Vector<Scalar>::Zero(h), dc_next = Vector<Scalar>::Zero(h);
    Vector<Scalar> dz(4 * h);
    for (int s = steps - 1; s >= 0; --s) {
      const int t = trace.order[s];
      const bool first = s == 0;
      const int t_prev = first ? -1 : trace.order[s - 1];
      const auto gates = trace.gates.col(t);
      const Vector<Scalar> c = trace.cells.col(t);
      const Vector<Scalar> c_prev = first ? Vector<Scalar>::Zero(h) : Vector<Scalar>(trace.cells.col(t_prev));
      const Vector<Scalar> h_prev = first ? Vector<Scalar>::Zero(h) : Vector<Scalar>(trace.hidden.col(t_prev));

      const Vector<Scalar> dh = grad_hidden.col(t) + dh_next;
      for (int r = 0; r < h; ++r) {
        const Scalar i = gates[r], f = gates[h + r], g = gates[2 * h + r], o = gates[3 * h + r];
        const Scalar tc = std::tanh(c[r]);
        const Scalar dc = dh[r] * o * (1 - tc * tc) + dc_next[r];
        dz[r] = dc * g * i * (1 - i);
        dz[h + r] = dc * c_prev[r] * f * (1 - f);
        dz[2 * h + r] = dc * i * (1 - g * g);
        dz[3 * h + r] = dh[r] * tc * o * (1 - o);
        dc_next[r] = dc * f;
      }
      input_weight.grad.noalias() += dz * trace.inputs.col(t).transpose();
      recurrent_weight.grad.noalias() += dz * h_prev.transpose();
      bias.grad.col(0) += dz;
      grad_x.col(t) = input_weight.value.transpose() * dz;
      dh_next = recurrent_weight.value.transpose() * dz;
    }
    return grad_x;
  }

  void parameters(ParameterList<Scalar>& list, const std::string& prefix) {
    list.push_back({prefix + ".input_weight", &input_weight});
    list.push_back({prefix + ".recurrent_weight", &recurrent_weight});
    list.push_back({prefix + ".bias", &bias});
  }

 private:
  int in_ = 0, hidden_ = 0;

 public:
  Parameter<Scalar> input_weight;
  Parameter<Scalar> recurrent_weight;
  Parameter<Scalar> bias;
};

/// Stacked bidirectional LSTM. Layer outputs are [forward h_t; backward h_t].
template <typename Scalar>
class BiLstm {
 public:
  using Matrix = typename LstmCell<Scalar>::Matrix;

  struct LayerTrace {
    typename LstmCell<Scalar>::Trace forward, backward;
  };
  struct Trace {
    std::vector<LayerTrace> layers;
  };

  BiLstm() = default;
  BiLstm(int input_size, int hidden_size, int layers) : hidden_(hidden_size) {
    for (int l = 0; l < layers; ++l) {
      const int in = l == 0 ? input_size : 2 * hidden_size;
      forward_.emplace_back(in, hidden_size);
      backward_.emplace_back(in, hidden_size);
    }
  }

  void init(std::mt19937_64& rng) {
    for (std::size_t l = 0; l < forward_.size(); ++l) {
      forward_[l].init(rng);
      backward_[l].init(rng);
    }
  }

  int hidden_size() const { return hidden_; }
  int layers() const { return static_cast<int>(forward_.size()); }
  int output_size() const { return 2 * hidden_; }

  /// Sequence x is in × T. Returns [final forward state; final backward state]
  /// of the top layer (forward ends at t = T-1, backward at t = 0).
  Vector<Scalar> forward(const Matrix& x, Trace* trace = nullptr) const {
    require(x.cols() > 0, "lstm: empty sequence");
    if (trace) trace->layers.assign(forward_.size(), {});
    Matrix seq = x;
    for (std::size_t l = 0; l < forward_.size(); ++l) {
      Matrix hf = forward_[l].forward(seq, false, trace ? &trace->layers[l].forward : nullptr);
      Matrix hb = backward_[l].forward(seq, true, trace ? &trace->layers[l].backward : nullptr);
      Matrix next(2 * hidden_, seq.cols());
      next.topRows(hidden_) = hf;
      next.bottomRows(hidden_) = hb;
      seq = std::move(next);
    }
    Vector<Scalar> out(2 * hidden_);
    out.head(hidden_) = seq.col(seq.cols() - 1).head(hidden_);
    out.tail(hidden_) = seq.col(0).tail(hidden_);
    return out;
  }

  Matrix backward(const Trace& trace, const Vector<Scalar>& grad_out) {
    const Eigen::Index steps = trace.layers.back().forward.hidden.cols();
    Matrix grad_seq = Matrix::Zero(2 * hidden_, steps);
    grad_seq.col(steps - 1).head(hidden_) = grad_out.head(hidden_);
    grad_seq.col(0).tail(hidden_) = grad_out.tail(hidden_);
    for (int l = layers() - 1; l >= 0; --l) {
      Matrix gf = forward_[l].backward(trace.layers[l].forward, grad_seq.topRows(hidden_));
      Matrix gb = backward_[l].backward(trace.layers[l].backward, grad_seq.bottomRows(hidden_));
      grad_seq = gf + gb;
    }
    return grad_seq;
  }

  /// Makes the backward cells mirror the forward cells: identical recurrent
  /// weights and bias, input weights with the two input halves swapped above
  /// the first layer. Under this tying, reversing the input sequence swaps
  /// the two halves of the output.
  void tie_directions() {
    for (std::size_t l = 0; l < forward_.size(); ++l) {
      auto& f = forward_[l];
      auto& b = backward_[l];
      b.recurrent_weight.value = f.recurrent_weight.value;
      b.bias.value = f.bias.value;
      if (l == 0) {
        b.input_weight.value = f.input_weight.value;
      } else {
        b.input_weight.value.leftCols(hidden_) = f.input_weight.value.rightCols(hidden_);
        b.input_weight.value.rightCols(hidden_) = f.input_weight.value.leftCols(hidden_);
      }
    }
  }

  void parameters(ParameterList<Scalar>& list, const std::string& prefix) {
    for (std::size_t l = 0; l < forward_.size(); ++l) {
      forward_[l].parameters(list, prefix + ".l" + std::to_string(l) + ".fwd");
      backward_[l].parameters(list, prefix + ".l" + std::to_string(l) + ".bwd");
    }
  }

  LstmCell<Scalar>& forward_cell(int l) { return forward_[l]; }
  LstmCell<Scalar>& backward_cell(int l) { return backward_[l]; }

 private:
  int hidden_ = 0;
  std::vector<LstmCell<Scalar>> forward_, backward_;
};

}  // namespace mmsd::nn
