#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace scriptalign::nn {

using Matrix = Eigen::MatrixXd;

// A named trainable tensor with its gradient and Adam moments.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  Param(std::string n, Matrix v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())),
        adam_m(Matrix::Zero(value.rows(), value.cols())),
        adam_v(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

// Owns parameters by stable address so tapes can reference them across steps.
class ParamStore {
 public:
  Param& create(const std::string& name, Matrix value);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<Param*> all();
  std::vector<const Param*> all() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

// Reverse-mode autodiff over a dynamically built op list. Nodes are appended
// in execution order, so walking the list backwards is a valid topological
// order for backprop. Leaves may reference external parameter storage; their
// accumulated gradients are flushed into Param::grad after backward().
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Var input(Matrix value);          // constant w.r.t. differentiation
  Var param(Param& p);              // leaf tied to external parameter
  Var detach(Var a);                // value copy, gradient barrier

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var add_rowvec(Var a, Var v);     // v: 1 x C broadcast over rows
  Var scale(Var a, double c);
  Var add_const_matrix(Var a, const Matrix& m);
  Var scale_rows(Var a, const Eigen::VectorXd& weights);  // constant row weights
  Var scalar_mul(Var a, Var s);     // s: 1 x 1
  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);      // a * b^T
  Var matmul_tn(Var a, Var b);      // a^T * b
  Var gather_rows(Var a, std::vector<int> rows);
  Var slice_cols(Var a, int start, int count);
  Var concat_cols(const std::vector<Var>& parts);
  Var gelu(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var clamp_min(Var a, double floor);
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-5);
  Var dropout(Var a, double rate, std::mt19937_64& rng);
  Var sum_all(Var a);
  Var mean_all(Var a);

  // Mean negative log-likelihood over rows whose label is >= 0.
  Var cross_entropy_rows(Var logits, const std::vector<int>& labels);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;  // valid after backward()
  void backward(Var root);          // root must be 1 x 1
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix val;
    const Matrix* ext = nullptr;  // set for param leaves
    Param* sink = nullptr;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&)> back;
  };

  const Matrix& val_of(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.ext ? *n.ext : n.val;
  }
  Matrix& grad_of(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool needs(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  Var push(Matrix value, bool requires_grad, std::function<void(Tape&)> back);

  std::vector<Node> nodes_;
};

using Var = Tape::Var;

}  // namespace scriptalign::nn
