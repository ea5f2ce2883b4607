#include "bimotion/tape.hpp"

#include <cmath>

namespace bimotion {

namespace {
constexpr double kLnEps = 1e-5;  // layernorm variance floor
}

int Tape::push(Node n) {
  n.needs_grad = (n.op == Op::kLeaf) ? n.needs_grad : (needs(n.a) || needs(n.b));
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Mat v, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.v = std::move(v);
  n.needs_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::matmul(int a, int b) {
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.v = bimotion::matmul(nodes_[a].v, nodes_[b].v);
  return push(std::move(n));
}

int Tape::matmul_nt(int a, int b) {
  Node n;
  n.op = Op::kMatMulNT;
  n.a = a;
  n.b = b;
  n.v = bimotion::matmul_nt(nodes_[a].v, nodes_[b].v);
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  const Mat& x = nodes_[a].v;
  const Mat& y = nodes_[b].v;
  require(x.same_shape(y), errc::runtime, "tape add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.v = x;
  for (size_t i = 0; i < n.v.size(); ++i) n.v.d[i] += y.d[i];
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  const Mat& x = nodes_[a].v;
  const Mat& y = nodes_[b].v;
  require(x.same_shape(y), errc::runtime, "tape sub: shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.v = x;
  for (size_t i = 0; i < n.v.size(); ++i) n.v.d[i] -= y.d[i];
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  const Mat& x = nodes_[a].v;
  const Mat& y = nodes_[b].v;
  require(x.same_shape(y), errc::runtime, "tape mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.v = x;
  for (size_t i = 0; i < n.v.size(); ++i) n.v.d[i] *= y.d[i];
  return push(std::move(n));
}

int Tape::div(int a, int b) {
  const Mat& x = nodes_[a].v;
  const Mat& y = nodes_[b].v;
  require(x.same_shape(y), errc::runtime, "tape div: shape mismatch");
  Node n;
  n.op = Op::kDiv;
  n.a = a;
  n.b = b;
  n.v = x;
  for (size_t i = 0; i < n.v.size(); ++i) n.v.d[i] /= y.d[i];
  return push(std::move(n));
}

int Tape::scale(int a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.s = s;
  n.v = nodes_[a].v;
  for (auto& v : n.v.d) v *= s;
  return push(std::move(n));
}

int Tape::add_const(int a, double s) {
  Node n;
  n.op = Op::kAddConst;
  n.a = a;
  n.s = s;
  n.v = nodes_[a].v;
  for (auto& v : n.v.d) v += s;
  return push(std::move(n));
}

int Tape::add_rowvec(int a, int r) {
  const Mat& x = nodes_[a].v;
  const Mat& rv = nodes_[r].v;
  require(rv.rows == 1 && rv.cols == x.cols, errc::runtime, "add_rowvec: bad row vector");
  Node n;
  n.op = Op::kAddRowVec;
  n.a = a;
  n.b = r;
  n.v = x;
  for (int i = 0; i < x.rows; ++i) {
    double* row = n.v.rowptr(i);
    for (int j = 0; j < x.cols; ++j) row[j] += rv.d[j];
  }
  return push(std::move(n));
}

int Tape::mul_rowvec(int a, int r) {
  const Mat& x = nodes_[a].v;
  const Mat& rv = nodes_[r].v;
  require(rv.rows == 1 && rv.cols == x.cols, errc::runtime, "mul_rowvec: bad row vector");
  Node n;
  n.op = Op::kMulRowVec;
  n.a = a;
  n.b = r;
  n.v = x;
  for (int i = 0; i < x.rows; ++i) {
    double* row = n.v.rowptr(i);
    for (int j = 0; j < x.cols; ++j) row[j] *= rv.d[j];
  }
  return push(std::move(n));
}

int Tape::tanh_(int a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.v = nodes_[a].v;
  for (auto& v : n.v.d) v = std::tanh(v);
  return push(std::move(n));
}

int Tape::exp_(int a) {
  Node n;
  n.op = Op::kExp;
  n.a = a;
  n.v = nodes_[a].v;
  for (auto& v : n.v.d) v = std::exp(v);
  return push(std::move(n));
}

int Tape::log_(int a) {
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.v = nodes_[a].v;
  for (auto& v : n.v.d) v = std::log(v);
  return push(std::move(n));
}

int Tape::softmax_rows(int a) {
  Node n;
  n.op = Op::kSoftmaxRows;
  n.a = a;
  n.v = nodes_[a].v;
  for (int i = 0; i < n.v.rows; ++i) {
    double* row = n.v.rowptr(i);
    double mx = row[0];
    for (int j = 1; j < n.v.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < n.v.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (int j = 0; j < n.v.cols; ++j) row[j] /= sum;
  }
  return push(std::move(n));
}

int Tape::normalize_rows(int a) {
  Node n;
  n.op = Op::kNormalizeRows;
  n.a = a;
  n.v = nodes_[a].v;
  for (int i = 0; i < n.v.rows; ++i) {
    double* row = n.v.rowptr(i);
    double s = 0.0;
    for (int j = 0; j < n.v.cols; ++j) s += row[j] * row[j];
    double norm = std::sqrt(s);
    require(norm > 0.0, errc::runtime, "normalize_rows: zero-norm row");
    for (int j = 0; j < n.v.cols; ++j) row[j] /= norm;
  }
  return push(std::move(n));
}

int Tape::layernorm_rows(int a) {
  Node n;
  n.op = Op::kLayerNormRows;
  n.a = a;
  n.v = nodes_[a].v;
  for (int i = 0; i < n.v.rows; ++i) {
    double* row = n.v.rowptr(i);
    int m = n.v.cols;
    double mean = 0.0;
    for (int j = 0; j < m; ++j) mean += row[j];
    mean /= m;
    double var = 0.0;
    for (int j = 0; j < m; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= m;
    double inv = 1.0 / std::sqrt(var + kLnEps);
    for (int j = 0; j < m; ++j) row[j] = (row[j] - mean) * inv;
  }
  return push(std::move(n));
}

int Tape::mean_rows(int a) {
  const Mat& x = nodes_[a].v;
  Node n;
  n.op = Op::kMeanRows;
  n.a = a;
  n.v = Mat(1, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) n.v.d[j] += x.at(i, j);
  for (auto& v : n.v.d) v /= x.rows;
  return push(std::move(n));
}

int Tape::sum_rows(int a) {
  const Mat& x = nodes_[a].v;
  Node n;
  n.op = Op::kSumRows;
  n.a = a;
  n.v = Mat(x.rows, 1);
  for (int i = 0; i < x.rows; ++i) {
    double s = 0.0;
    const double* row = x.rowptr(i);
    for (int j = 0; j < x.cols; ++j) s += row[j];
    n.v.d[i] = s;
  }
  return push(std::move(n));
}

int Tape::take_diag(int a) {
  const Mat& x = nodes_[a].v;
  require(x.rows == x.cols, errc::runtime, "take_diag: square matrix required");
  Node n;
  n.op = Op::kTakeDiag;
  n.a = a;
  n.v = Mat(x.rows, 1);
  for (int i = 0; i < x.rows; ++i) n.v.d[i] = x.at(i, i);
  return push(std::move(n));
}

int Tape::slice_rows(int a, int r0, int nr) {
  const Mat& x = nodes_[a].v;
  require(r0 >= 0 && r0 + nr <= x.rows, errc::runtime, "slice_rows: out of range");
  Node n;
  n.op = Op::kSliceRows;
  n.a = a;
  n.i0 = r0;
  n.i1 = nr;
  n.v = Mat(nr, x.cols);
  for (int i = 0; i < nr; ++i)
    std::memcpy(n.v.rowptr(i), x.rowptr(r0 + i), sizeof(double) * x.cols);
  return push(std::move(n));
}

int Tape::slice_cols(int a, int c0, int nc) {
  const Mat& x = nodes_[a].v;
  require(c0 >= 0 && c0 + nc <= x.cols, errc::runtime, "slice_cols: out of range");
  Node n;
  n.op = Op::kSliceCols;
  n.a = a;
  n.i0 = c0;
  n.i1 = nc;
  n.v = Mat(x.rows, nc);
  for (int i = 0; i < x.rows; ++i)
    std::memcpy(n.v.rowptr(i), x.rowptr(i) + c0, sizeof(double) * nc);
  return push(std::move(n));
}

int Tape::concat_rows(int a, int b) {
  const Mat& x = nodes_[a].v;
  const Mat& y = nodes_[b].v;
  require(x.cols == y.cols, errc::runtime, "concat_rows: column mismatch");
  Node n;
  n.op = Op::kConcatRows;
  n.a = a;
  n.b = b;
  n.v = Mat(x.rows + y.rows, x.cols);
  std::memcpy(n.v.d.data(), x.d.data(), sizeof(double) * x.size());
  std::memcpy(n.v.d.data() + x.size(), y.d.data(), sizeof(double) * y.size());
  return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
  const Mat& x = nodes_[a].v;
  const Mat& y = nodes_[b].v;
  require(x.rows == y.rows, errc::runtime, "concat_cols: row mismatch");
  Node n;
  n.op = Op::kConcatCols;
  n.a = a;
  n.b = b;
  n.v = Mat(x.rows, x.cols + y.cols);
  for (int i = 0; i < x.rows; ++i) {
    std::memcpy(n.v.rowptr(i), x.rowptr(i), sizeof(double) * x.cols);
    std::memcpy(n.v.rowptr(i) + x.cols, y.rowptr(i), sizeof(double) * y.cols);
  }
  return push(std::move(n));
}

int Tape::gather_rows(int table, std::vector<int> idx) {
  const Mat& x = nodes_[table].v;
  Node n;
  n.op = Op::kGatherRows;
  n.a = table;
  n.v = Mat(static_cast<int>(idx.size()), x.cols);
  for (size_t k = 0; k < idx.size(); ++k) {
    require(idx[k] >= 0 && idx[k] < x.rows, errc::runtime, "gather_rows: index out of range");
    std::memcpy(n.v.rowptr(static_cast<int>(k)), x.rowptr(idx[k]), sizeof(double) * x.cols);
  }
  n.idx = std::move(idx);
  return push(std::move(n));
}

int Tape::transpose_(int a) {
  Node n;
  n.op = Op::kTranspose;
  n.a = a;
  n.v = bimotion::transpose(nodes_[a].v);
  return push(std::move(n));
}

int Tape::sum_all(int a) {
  Node n;
  n.op = Op::kSumAll;
  n.a = a;
  double s = 0.0;
  for (double v : nodes_[a].v.d) s += v;
  n.v = Mat(1, 1, {s});
  return push(std::move(n));
}

int Tape::mean_all(int a) {
  Node n;
  n.op = Op::kMeanAll;
  n.a = a;
  double s = 0.0;
  for (double v : nodes_[a].v.d) s += v;
  n.v = Mat(1, 1, {s / static_cast<double>(nodes_[a].v.size())});
  return push(std::move(n));
}

int Tape::smooth_l1(int a) {
  Node n;
  n.op = Op::kSmoothL1;
  n.a = a;
  n.v = nodes_[a].v;
  for (auto& v : n.v.d) v = std::fabs(v) < 1.0 ? 0.5 * v * v : std::fabs(v) - 0.5;
  return push(std::move(n));
}

void Tape::ensure_grad(int a) {
  Node& n = nodes_[a];
  if (n.g.rows != n.v.rows || n.g.cols != n.v.cols) n.g = Mat(n.v.rows, n.v.cols);
}

void Tape::zero_grad() {
  for (auto& n : nodes_) {
    n.g.rows = 0;
    n.g.cols = 0;
    n.g.d.clear();
  }
}

void Tape::backward(int root) {
  require(nodes_[root].v.size() == 1, errc::runtime, "backward: root must be scalar");
  zero_grad();
  ensure_grad(root);
  nodes_[root].g.d[0] = 1.0;
  for (int i = root; i >= 0; --i) {
    if (!nodes_[i].needs_grad || nodes_[i].g.size() == 0) continue;
    backprop(i);
  }
}

void Tape::backprop(int i) {
  Node& n = nodes_[i];
  const Mat& gy = n.g;
  auto acc = [&](int a) -> Mat& {
    ensure_grad(a);
    return nodes_[a].g;
  };
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatMul: {
      if (needs(n.a)) {
        Mat da = bimotion::matmul_nt(gy, nodes_[n.b].v);
        Mat& ga = acc(n.a);
        for (size_t k = 0; k < ga.size(); ++k) ga.d[k] += da.d[k];
      }
      if (needs(n.b)) {
        Mat db = bimotion::matmul_tn(nodes_[n.a].v, gy);
        Mat& gb = acc(n.b);
        for (size_t k = 0; k < gb.size(); ++k) gb.d[k] += db.d[k];
      }
      break;
    }
    case Op::kMatMulNT: {
      if (needs(n.a)) {
        Mat da = bimotion::matmul(gy, nodes_[n.b].v);
        Mat& ga = acc(n.a);
        for (size_t k = 0; k < ga.size(); ++k) ga.d[k] += da.d[k];
      }
      if (needs(n.b)) {
        Mat db = bimotion::matmul_tn(gy, nodes_[n.a].v);
        Mat& gb = acc(n.b);
        for (size_t k = 0; k < gb.size(); ++k) gb.d[k] += db.d[k];
      }
      break;
    }
    case Op::kAdd: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (size_t k = 0; k < ga.size(); ++k) ga.d[k] += gy.d[k];
      }
      if (needs(n.b)) {
        Mat& gb = acc(n.b);
        for (size_t k = 0; k < gb.size(); ++k) gb.d[k] += gy.d[k];
      }
      break;
    }
    case Op::kSub: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (size_t k = 0; k < ga.size(); ++k) ga.d[k] += gy.d[k];
      }
      if (needs(n.b)) {
        Mat& gb = acc(n.b);
        for (size_t k = 0; k < gb.size(); ++k) gb.d[k] -= gy.d[k];
      }
      break;
    }
    case Op::kMul: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        const Mat& bv = nodes_[n.b].v;
        for (size_t k = 0; k < ga.size(); ++k) ga.d[k] += gy.d[k] * bv.d[k];
      }
      if (needs(n.b)) {
        Mat& gb = acc(n.b);
        const Mat& av = nodes_[n.a].v;
        for (size_t k = 0; k < gb.size(); ++k) gb.d[k] += gy.d[k] * av.d[k];
      }
      break;
    }
    case Op::kDiv: {
      const Mat& av = nodes_[n.a].v;
      const Mat& bv = nodes_[n.b].v;
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (size_t k = 0; k < ga.size(); ++k) ga.d[k] += gy.d[k] / bv.d[k];
      }
      if (needs(n.b)) {
        Mat& gb = acc(n.b);
        for (size_t k = 0; k < gb.size(); ++k)
          gb.d[k] -= gy.d[k] * av.d[k] / (bv.d[k] * bv.d[k]);
      }
      break;
    }
    case Op::kScale: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (size_t k = 0; k < ga.size(); ++k) ga.d[k] += gy.d[k] * n.s;
      }
      break;
    }
    case Op::kAddConst: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (size_t k = 0; k < ga.size(); ++k) ga.d[k] += gy.d[k];
      }
      break;
    }
    case Op::kAddRowVec: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (size_t k = 0; k < ga.size(); ++k) ga.d[k] += gy.d[k];
      }
      if (needs(n.b)) {
        Mat& gb = acc(n.b);
        for (int r = 0; r < gy.rows; ++r) {
          const double* row = gy.rowptr(r);
          for (int c = 0; c < gy.cols; ++c) gb.d[c] += row[c];
        }
      }
      break;
    }
    case Op::kMulRowVec: {
      const Mat& av = nodes_[n.a].v;
      const Mat& rv = nodes_[n.b].v;
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (int r = 0; r < gy.rows; ++r)
          for (int c = 0; c < gy.cols; ++c) ga.at(r, c) += gy.at(r, c) * rv.d[c];
      }
      if (needs(n.b)) {
        Mat& gb = acc(n.b);
        for (int r = 0; r < gy.rows; ++r)
          for (int c = 0; c < gy.cols; ++c) gb.d[c] += gy.at(r, c) * av.at(r, c);
      }
      break;
    }
    case Op::kTanh: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (size_t k = 0; k < ga.size(); ++k)
          ga.d[k] += gy.d[k] * (1.0 - n.v.d[k] * n.v.d[k]);
      }
      break;
    }
    case Op::kExp: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (size_t k = 0; k < ga.size(); ++k) ga.d[k] += gy.d[k] * n.v.d[k];
      }
      break;
    }
    case Op::kLog: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        const Mat& av = nodes_[n.a].v;
        for (size_t k = 0; k < ga.size(); ++k) ga.d[k] += gy.d[k] / av.d[k];
      }
      break;
    }
    case Op::kSoftmaxRows: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (int r = 0; r < n.v.rows; ++r) {
          const double* y = n.v.rowptr(r);
          const double* gyr = gy.rowptr(r);
          double s = 0.0;
          for (int c = 0; c < n.v.cols; ++c) s += gyr[c] * y[c];
          double* gar = ga.rowptr(r);
          for (int c = 0; c < n.v.cols; ++c) gar[c] += y[c] * (gyr[c] - s);
        }
      }
      break;
    }
    case Op::kNormalizeRows: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        const Mat& av = nodes_[n.a].v;
        for (int r = 0; r < n.v.rows; ++r) {
          const double* x = av.rowptr(r);
          const double* y = n.v.rowptr(r);
          const double* gyr = gy.rowptr(r);
          double norm = 0.0;
          for (int c = 0; c < n.v.cols; ++c) norm += x[c] * x[c];
          norm = std::sqrt(norm);
          double s = 0.0;
          for (int c = 0; c < n.v.cols; ++c) s += gyr[c] * y[c];
          double* gar = ga.rowptr(r);
          for (int c = 0; c < n.v.cols; ++c) gar[c] += (gyr[c] - s * y[c]) / norm;
        }
      }
      break;
    }
    case Op::kLayerNormRows: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        const Mat& av = nodes_[n.a].v;
        int m = n.v.cols;
        for (int r = 0; r < n.v.rows; ++r) {
          const double* x = av.rowptr(r);
          const double* y = n.v.rowptr(r);
          const double* gyr = gy.rowptr(r);
          double mean = 0.0;
          for (int c = 0; c < m; ++c) mean += x[c];
          mean /= m;
          double var = 0.0;
          for (int c = 0; c < m; ++c) var += (x[c] - mean) * (x[c] - mean);
          var /= m;
          double inv = 1.0 / std::sqrt(var + kLnEps);
          double gmean = 0.0, gymean = 0.0;
          for (int c = 0; c < m; ++c) {
            gmean += gyr[c] * y[c];
            gymean += gyr[c];
          }
          gmean /= m;
          gymean /= m;
          double* gar = ga.rowptr(r);
          for (int c = 0; c < m; ++c)
            gar[c] += inv * (gyr[c] - gymean - y[c] * gmean);
        }
      }
      break;
    }
    case Op::kMeanRows: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        double inv = 1.0 / ga.rows;
        for (int r = 0; r < ga.rows; ++r)
          for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += gy.d[c] * inv;
      }
      break;
    }
    case Op::kSumRows: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (int r = 0; r < ga.rows; ++r)
          for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += gy.d[r];
      }
      break;
    }
    case Op::kTakeDiag: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (int r = 0; r < gy.rows; ++r) ga.at(r, r) += gy.d[r];
      }
      break;
    }
    case Op::kSliceRows: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (int r = 0; r < n.i1; ++r)
          for (int c = 0; c < gy.cols; ++c) ga.at(n.i0 + r, c) += gy.at(r, c);
      }
      break;
    }
    case Op::kSliceCols: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (int r = 0; r < gy.rows; ++r)
          for (int c = 0; c < n.i1; ++c) ga.at(r, n.i0 + c) += gy.at(r, c);
      }
      break;
    }
    case Op::kConcatRows: {
      int ra = nodes_[n.a].v.rows;
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (int r = 0; r < ra; ++r)
          for (int c = 0; c < gy.cols; ++c) ga.at(r, c) += gy.at(r, c);
      }
      if (needs(n.b)) {
        Mat& gb = acc(n.b);
        for (int r = 0; r < gb.rows; ++r)
          for (int c = 0; c < gy.cols; ++c) gb.at(r, c) += gy.at(ra + r, c);
      }
      break;
    }
    case Op::kConcatCols: {
      int ca = nodes_[n.a].v.cols;
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (int r = 0; r < gy.rows; ++r)
          for (int c = 0; c < ca; ++c) ga.at(r, c) += gy.at(r, c);
      }
      if (needs(n.b)) {
        Mat& gb = acc(n.b);
        for (int r = 0; r < gy.rows; ++r)
          for (int c = 0; c < gb.cols; ++c) gb.at(r, c) += gy.at(r, ca + c);
      }
      break;
    }
    case Op::kGatherRows: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (size_t k = 0; k < n.idx.size(); ++k)
          for (int c = 0; c < gy.cols; ++c)
            ga.at(n.idx[k], c) += gy.at(static_cast<int>(k), c);
      }
      break;
    }
    case Op::kTranspose: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (int r = 0; r < gy.rows; ++r)
          for (int c = 0; c < gy.cols; ++c) ga.at(c, r) += gy.at(r, c);
      }
      break;
    }
    case Op::kSumAll: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        for (auto& v : ga.d) v += gy.d[0];
      }
      break;
    }
    case Op::kMeanAll: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        double inv = gy.d[0] / static_cast<double>(ga.size());
        for (auto& v : ga.d) v += inv;
      }
      break;
    }
    case Op::kSmoothL1: {
      if (needs(n.a)) {
        Mat& ga = acc(n.a);
        const Mat& av = nodes_[n.a].v;
        for (size_t k = 0; k < ga.size(); ++k) {
          double x = av.d[k];
          double dv = x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x);
          ga.d[k] += gy.d[k] * dv;
        }
      }
      break;
    }
  }
}

}  // namespace bimotion
