#pragma once

#include <string>
#include <vector>

#include "bimotion/mat.hpp"

namespace bimotion {

// Reverse-mode autodiff over Mat values. Forward values are computed eagerly
// as ops are recorded; backward() runs one reverse sweep from a scalar root.
// mark()/rewind() let a caller keep parameter leaves alive while discarding
// the op nodes of a finished step, so frozen-model inference loops do not
// rebind parameters every step.
class Tape {
 public:
  int leaf(Mat v, bool requires_grad = true);
  int constant(Mat v) { return leaf(std::move(v), false); }
  int scalar(double v) { return constant(Mat(1, 1, {v})); }

  int matmul(int a, int b);
  int matmul_nt(int a, int b);  // a * b^T
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);  // elementwise
  int div(int a, int b);  // elementwise
  int scale(int a, double s);
  int add_const(int a, double s);
  int add_rowvec(int a, int r);  // [n,m] + broadcast [1,m]
  int mul_rowvec(int a, int r);
  int tanh_(int a);
  int exp_(int a);
  int log_(int a);
  int softmax_rows(int a);
  int normalize_rows(int a);   // each row divided by its euclidean norm
  int layernorm_rows(int a);   // per-row standardization, no affine part
  int mean_rows(int a);        // [n,m] -> [1,m]
  int sum_rows(int a);         // [n,m] -> [n,1]
  int take_diag(int a);        // [n,n] -> [n,1]
  int slice_rows(int a, int r0, int n);
  int slice_cols(int a, int c0, int n);
  int concat_rows(int a, int b);
  int concat_cols(int a, int b);
  int gather_rows(int table, std::vector<int> idx);
  int transpose_(int a);
  int sum_all(int a);
  int mean_all(int a);
  int smooth_l1(int a);  // elementwise huber, delta = 1

  size_t mark() const { return nodes_.size(); }
  void rewind(size_t m) { nodes_.resize(m); }

  void backward(int root);
  void zero_grad();

  const Mat& val(int id) const { return nodes_[id].v; }
  const Mat& grad(int id) const { return nodes_[id].g; }
  double scalar_val(int id) const { return nodes_[id].v.d[0]; }
  size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf, kMatMul, kMatMulNT, kAdd, kSub, kMul, kDiv, kScale, kAddConst,
    kAddRowVec, kMulRowVec, kTanh, kExp, kLog, kSoftmaxRows, kNormalizeRows,
    kLayerNormRows, kMeanRows, kSumRows, kTakeDiag, kSliceRows, kSliceCols,
    kConcatRows, kConcatCols, kGatherRows, kTranspose, kSumAll, kMeanAll,
    kSmoothL1,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double s = 0.0;
    int i0 = 0, i1 = 0;
    std::vector<int> idx;
    Mat v;
    Mat g;
    bool needs_grad = false;
  };

  int push(Node n);
  bool needs(int a) const { return a >= 0 && nodes_[a].needs_grad; }
  Mat& g(int a) { return nodes_[a].g; }
  void ensure_grad(int a);
  void backprop(int i);

  std::vector<Node> nodes_;
};

}  // namespace bimotion
