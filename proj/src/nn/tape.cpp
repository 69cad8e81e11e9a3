#include "scriptalign/nn/tape.hpp"

#include <cmath>

#include "scriptalign/util.hpp"

namespace scriptalign::nn {

Param& ParamStore::create(const std::string& name, Matrix value) {
  if (has(name)) throw InputError("duplicate parameter: " + name);
  params_.push_back(std::make_unique<Param>(name, std::move(value)));
  return *params_.back();
}

Param& ParamStore::get(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw InputError("no such parameter: " + name);
}

const Param& ParamStore::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return *p;
  throw InputError("no such parameter: " + name);
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return true;
  return false;
}

std::vector<Param*> ParamStore::all() {
  std::vector<Param*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParamStore::all() const {
  std::vector<const Param*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&)> back) {
  Node n;
  n.val = std::move(value);
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::param(Param& p) {
  Node n;
  n.ext = &p.value;
  n.sink = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::detach(Var a) { return push(val_of(a.id), false, nullptr); }

Var Tape::add(Var a, Var b) {
  int ia = a.id, ib = b.id;
  Var out = push(val_of(ia) + val_of(ib), needs(ia) || needs(ib), nullptr);
  int io = out.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, ib, io](Tape& t) {
    const Matrix& go = t.grad_of(io);
    if (t.needs(ia)) t.grad_of(ia) += go;
    if (t.needs(ib)) t.grad_of(ib) += go;
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  int ia = a.id, ib = b.id;
  Var out = push(val_of(ia) - val_of(ib), needs(ia) || needs(ib), nullptr);
  int io = out.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, ib, io](Tape& t) {
    const Matrix& go = t.grad_of(io);
    if (t.needs(ia)) t.grad_of(ia) += go;
    if (t.needs(ib)) t.grad_of(ib) -= go;
  };
  return out;
}

Var Tape::hadamard(Var a, Var b) {
  int ia = a.id, ib = b.id;
  Var out = push(val_of(ia).cwiseProduct(val_of(ib)), needs(ia) || needs(ib), nullptr);
  int io = out.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, ib, io](Tape& t) {
    const Matrix& go = t.grad_of(io);
    if (t.needs(ia)) t.grad_of(ia) += go.cwiseProduct(t.val_of(ib));
    if (t.needs(ib)) t.grad_of(ib) += go.cwiseProduct(t.val_of(ia));
  };
  return out;
}

Var Tape::add_rowvec(Var a, Var v) {
  int ia = a.id, iv = v.id;
  Matrix out = val_of(ia);
  out.rowwise() += val_of(iv).row(0);
  Var o = push(std::move(out), needs(ia) || needs(iv), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, iv, io](Tape& t) {
    const Matrix& go = t.grad_of(io);
    if (t.needs(ia)) t.grad_of(ia) += go;
    if (t.needs(iv)) t.grad_of(iv) += go.colwise().sum();
  };
  return o;
}

Var Tape::scale(Var a, double c) {
  int ia = a.id;
  Var o = push(val_of(ia) * c, needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io, c](Tape& t) {
    if (t.needs(ia)) t.grad_of(ia) += t.grad_of(io) * c;
  };
  return o;
}

Var Tape::add_const_matrix(Var a, const Matrix& m) {
  int ia = a.id;
  Var o = push(val_of(ia) + m, needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io](Tape& t) {
    if (t.needs(ia)) t.grad_of(ia) += t.grad_of(io);
  };
  return o;
}

Var Tape::scale_rows(Var a, const Eigen::VectorXd& weights) {
  int ia = a.id;
  Matrix out = weights.asDiagonal() * val_of(ia);
  Var o = push(std::move(out), needs(ia), nullptr);
  int io = o.id;
  Eigen::VectorXd w = weights;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io, w](Tape& t) {
    if (t.needs(ia)) t.grad_of(ia) += w.asDiagonal() * t.grad_of(io);
  };
  return o;
}

Var Tape::scalar_mul(Var a, Var s) {
  int ia = a.id, is = s.id;
  double sv = val_of(is)(0, 0);
  Var o = push(val_of(ia) * sv, needs(ia) || needs(is), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, is, io](Tape& t) {
    const Matrix& go = t.grad_of(io);
    double sval = t.val_of(is)(0, 0);
    if (t.needs(ia)) t.grad_of(ia) += go * sval;
    if (t.needs(is)) t.grad_of(is)(0, 0) += go.cwiseProduct(t.val_of(ia)).sum();
  };
  return o;
}

Var Tape::matmul(Var a, Var b) {
  int ia = a.id, ib = b.id;
  Var o = push(val_of(ia) * val_of(ib), needs(ia) || needs(ib), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, ib, io](Tape& t) {
    const Matrix& go = t.grad_of(io);
    if (t.needs(ia)) t.grad_of(ia) += go * t.val_of(ib).transpose();
    if (t.needs(ib)) t.grad_of(ib) += t.val_of(ia).transpose() * go;
  };
  return o;
}

Var Tape::matmul_nt(Var a, Var b) {
  int ia = a.id, ib = b.id;
  Var o = push(val_of(ia) * val_of(ib).transpose(), needs(ia) || needs(ib), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, ib, io](Tape& t) {
    const Matrix& go = t.grad_of(io);
    if (t.needs(ia)) t.grad_of(ia) += go * t.val_of(ib);
    if (t.needs(ib)) t.grad_of(ib) += go.transpose() * t.val_of(ia);
  };
  return o;
}

Var Tape::matmul_tn(Var a, Var b) {
  int ia = a.id, ib = b.id;
  Var o = push(val_of(ia).transpose() * val_of(ib), needs(ia) || needs(ib), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, ib, io](Tape& t) {
    const Matrix& go = t.grad_of(io);
    if (t.needs(ia)) t.grad_of(ia) += t.val_of(ib) * go.transpose();
    if (t.needs(ib)) t.grad_of(ib) += t.val_of(ia) * go;
  };
  return o;
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  int ia = a.id;
  const Matrix& src = val_of(ia);
  Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= src.rows()) throw InputError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
  }
  Var o = push(std::move(out), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io, rows](Tape& t) {
    if (!t.needs(ia)) return;
    const Matrix& go = t.grad_of(io);
    Matrix& ga = t.grad_of(ia);
    for (size_t i = 0; i < rows.size(); ++i) {
      ga.row(rows[i]) += go.row(static_cast<Eigen::Index>(i));
    }
  };
  return o;
}

Var Tape::slice_cols(Var a, int start, int count) {
  int ia = a.id;
  Var o = push(val_of(ia).middleCols(start, count), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io, start, count](Tape& t) {
    if (t.needs(ia)) t.grad_of(ia).middleCols(start, count) += t.grad_of(io);
  };
  return o;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw InputError("concat_cols: empty");
  Eigen::Index rows = val_of(parts[0].id).rows();
  Eigen::Index cols = 0;
  bool req = false;
  for (Var p : parts) {
    cols += val_of(p.id).cols();
    req = req || needs(p.id);
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  std::vector<int> ids;
  std::vector<int> widths;
  for (Var p : parts) {
    const Matrix& v = val_of(p.id);
    out.middleCols(at, v.cols()) = v;
    ids.push_back(p.id);
    widths.push_back(static_cast<int>(v.cols()));
    at += v.cols();
  }
  Var o = push(std::move(out), req, nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ids, widths, io](Tape& t) {
    const Matrix& go = t.grad_of(io);
    Eigen::Index at2 = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (t.needs(ids[i])) t.grad_of(ids[i]) += go.middleCols(at2, widths[i]);
      at2 += widths[i];
    }
  };
  return o;
}

Var Tape::gelu(Var a) {
  int ia = a.id;
  const double c = std::sqrt(2.0 / M_PI);
  const double k = 0.044715;
  const Matrix& x = val_of(ia);
  Matrix u = (c * (x.array() + k * x.array().cube())).matrix();
  Matrix th = u.array().tanh().matrix();
  Matrix y = (0.5 * x.array() * (1.0 + th.array())).matrix();
  Var o = push(std::move(y), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io, th, c, k](Tape& t) {
    if (!t.needs(ia)) return;
    const Matrix& x2 = t.val_of(ia);
    Eigen::ArrayXXd sech2 = 1.0 - th.array().square();
    Eigen::ArrayXXd du = c * (1.0 + 3.0 * k * x2.array().square());
    Eigen::ArrayXXd dy = 0.5 * (1.0 + th.array()) + 0.5 * x2.array() * sech2 * du;
    t.grad_of(ia).array() += t.grad_of(io).array() * dy;
  };
  return o;
}

Var Tape::sigmoid(Var a) {
  int ia = a.id;
  Matrix y = (1.0 / (1.0 + (-val_of(ia).array()).exp())).matrix();
  Var o = push(std::move(y), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io](Tape& t) {
    if (!t.needs(ia)) return;
    const Matrix& y2 = t.val_of(io);
    t.grad_of(ia).array() += t.grad_of(io).array() * y2.array() * (1.0 - y2.array());
  };
  return o;
}

Var Tape::exp(Var a) {
  int ia = a.id;
  Var o = push(val_of(ia).array().exp().matrix(), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io](Tape& t) {
    if (t.needs(ia)) t.grad_of(ia).array() += t.grad_of(io).array() * t.val_of(io).array();
  };
  return o;
}

Var Tape::log(Var a) {
  int ia = a.id;
  Var o = push(val_of(ia).array().log().matrix(), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io](Tape& t) {
    if (t.needs(ia)) t.grad_of(ia).array() += t.grad_of(io).array() / t.val_of(ia).array();
  };
  return o;
}

Var Tape::clamp_min(Var a, double floor) {
  int ia = a.id;
  Var o = push(val_of(ia).cwiseMax(floor), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io, floor](Tape& t) {
    if (!t.needs(ia)) return;
    // subgradient: zero where the clamp is active
    const Matrix& x = t.val_of(ia);
    Matrix& ga = t.grad_of(ia);
    const Matrix& go = t.grad_of(io);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c2 = 0; c2 < x.cols(); ++c2)
        if (x(r, c2) > floor) ga(r, c2) += go(r, c2);
  };
  return o;
}

Var Tape::softmax_rows(Var a) {
  int ia = a.id;
  const Matrix& x = val_of(ia);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::ArrayXd row = x.row(r).transpose().array();
    double m = row.maxCoeff();
    Eigen::ArrayXd e = (row - m).exp();
    y.row(r) = (e / e.sum()).matrix().transpose();
  }
  Var o = push(std::move(y), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io](Tape& t) {
    if (!t.needs(ia)) return;
    const Matrix& y2 = t.val_of(io);
    const Matrix& go = t.grad_of(io);
    Matrix& ga = t.grad_of(ia);
    for (Eigen::Index r = 0; r < y2.rows(); ++r) {
      double dot = go.row(r).cwiseProduct(y2.row(r)).sum();
      ga.row(r).array() += y2.row(r).array() * (go.row(r).array() - dot);
    }
  };
  return o;
}

Var Tape::log_softmax_rows(Var a) {
  int ia = a.id;
  const Matrix& x = val_of(ia);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::ArrayXd row = x.row(r).transpose().array();
    double m = row.maxCoeff();
    double lse = std::log((row - m).exp().sum()) + m;
    y.row(r) = (row - lse).matrix().transpose();
  }
  Var o = push(std::move(y), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io](Tape& t) {
    if (!t.needs(ia)) return;
    const Matrix& y2 = t.val_of(io);
    const Matrix& go = t.grad_of(io);
    Matrix& ga = t.grad_of(ia);
    for (Eigen::Index r = 0; r < y2.rows(); ++r) {
      double gsum = go.row(r).sum();
      ga.row(r).array() += go.row(r).array() - y2.row(r).array().exp() * gsum;
    }
  };
  return o;
}

Var Tape::layer_norm(Var a, Var gamma, Var beta, double eps) {
  int ia = a.id, ig = gamma.id, ib = beta.id;
  const Matrix& x = val_of(ia);
  Matrix hat(x.rows(), x.cols());
  Eigen::VectorXd inv_sigma(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma(r) = is;
    hat.row(r) = ((x.row(r).array() - mu) * is).matrix();
  }
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    y.row(r) = hat.row(r).cwiseProduct(val_of(ig).row(0)) + val_of(ib).row(0);
  }
  Var o = push(std::move(y), needs(ia) || needs(ig) || needs(ib), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, ig, ib, io, hat, inv_sigma](Tape& t) {
    const Matrix& go = t.grad_of(io);
    if (t.needs(ig)) t.grad_of(ig).row(0) += go.cwiseProduct(hat).colwise().sum();
    if (t.needs(ib)) t.grad_of(ib).row(0) += go.colwise().sum();
    if (t.needs(ia)) {
      Matrix& ga = t.grad_of(ia);
      const Matrix& g = t.val_of(ig);
      using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
      for (Eigen::Index r = 0; r < go.rows(); ++r) {
        RowArray gy = go.row(r).array() * g.row(0).array();
        RowArray h = hat.row(r).array();
        double mean_gy = gy.mean();
        double mean_gyh = (gy * h).mean();
        ga.row(r).array() += inv_sigma(r) * (gy - mean_gy - h * mean_gyh);
      }
    }
  };
  return o;
}

Var Tape::dropout(Var a, double rate, std::mt19937_64& rng) {
  int ia = a.id;
  const Matrix& x = val_of(ia);
  if (rate <= 0.0) return a;
  Matrix mask(x.rows(), x.cols());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double keep = 1.0 - rate;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) mask(r, c) = uni(rng) < keep ? 1.0 / keep : 0.0;
  Var o = push(x.cwiseProduct(mask), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io, mask](Tape& t) {
    if (t.needs(ia)) t.grad_of(ia) += t.grad_of(io).cwiseProduct(mask);
  };
  return o;
}

Var Tape::sum_all(Var a) {
  int ia = a.id;
  Matrix out(1, 1);
  out(0, 0) = val_of(ia).sum();
  Var o = push(std::move(out), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io](Tape& t) {
    if (t.needs(ia)) t.grad_of(ia).array() += t.grad_of(io)(0, 0);
  };
  return o;
}

Var Tape::mean_all(Var a) {
  int ia = a.id;
  const double n = static_cast<double>(val_of(ia).size());
  Matrix out(1, 1);
  out(0, 0) = val_of(ia).sum() / n;
  Var o = push(std::move(out), needs(ia), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [ia, io, n](Tape& t) {
    if (t.needs(ia)) t.grad_of(ia).array() += t.grad_of(io)(0, 0) / n;
  };
  return o;
}

Var Tape::cross_entropy_rows(Var logits, const std::vector<int>& labels) {
  int il = logits.id;
  const Matrix& x = val_of(il);
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw InputError("cross_entropy_rows: label count mismatch");
  }
  Matrix probs(x.rows(), x.cols());
  double loss = 0.0;
  int valid = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::ArrayXd row = x.row(r).transpose().array();
    double m = row.maxCoeff();
    Eigen::ArrayXd e = (row - m).exp();
    double z = e.sum();
    probs.row(r) = (e / z).matrix().transpose();
    int lab = labels[static_cast<std::size_t>(r)];
    if (lab >= 0) {
      if (lab >= x.cols()) throw InputError("cross_entropy_rows: label out of range");
      loss += -(x(r, lab) - m - std::log(z));
      ++valid;
    }
  }
  Matrix out(1, 1);
  out(0, 0) = valid > 0 ? loss / valid : 0.0;
  Var o = push(std::move(out), needs(il), nullptr);
  int io = o.id;
  nodes_[static_cast<std::size_t>(io)].back = [il, io, probs, labels](Tape& t) {
    if (!t.needs(il)) return;
    int valid2 = 0;
    for (int lab : labels)
      if (lab >= 0) ++valid2;
    if (valid2 == 0) return;
    double go = t.grad_of(io)(0, 0);
    Matrix& ga = t.grad_of(il);
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      int lab = labels[static_cast<std::size_t>(r)];
      if (lab < 0) continue;
      ga.row(r) += (go / valid2) * probs.row(r);
      ga(r, lab) -= go / valid2;
    }
  };
  return o;
}

const Matrix& Tape::value(Var v) const {
  if (!v.valid()) throw InputError("value of invalid Var");
  return val_of(v.id);
}

const Matrix& Tape::grad(Var v) const {
  if (!v.valid()) throw InputError("grad of invalid Var");
  return nodes_[static_cast<std::size_t>(v.id)].grad;
}

void Tape::backward(Var root) {
  if (!root.valid()) throw InputError("backward on invalid Var");
  const Matrix& rv = val_of(root.id);
  if (rv.rows() != 1 || rv.cols() != 1) throw InputError("backward root must be scalar");

  for (auto& n : nodes_) {
    const Matrix& v = n.ext ? *n.ext : n.val;
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  grad_of(root.id)(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back && n.requires_grad) n.back(*this);
  }
  for (auto& n : nodes_) {
    if (n.sink) n.sink->grad += n.grad;
  }
}

}  // namespace scriptalign::nn
