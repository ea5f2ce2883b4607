#pragma once

#include <cstdint>
#include <vector>

#include "bimotion/mat.hpp"

namespace bimotion {

struct MetricReport {
  double r_precision[3] = {0.0, 0.0, 0.0};
  double fid = 0.0;
  double mm_dist = 0.0;
  double diversity = 0.0;
  int pool_size = 0;
  int num_samples = 0;
};

// eigendecomposition of a symmetric matrix by cyclic Jacobi rotations
void jacobi_eigensym(const Mat& a, std::vector<double>& eigenvalues, Mat& eigenvectors);

// principal square root of a symmetric PSD matrix; small negative eigenvalues
// are clamped to zero
Mat sym_sqrt(const Mat& a);

struct GaussianStats {
  Mat mean;  // [1, d]
  Mat cov;   // [d, d], unbiased
};

GaussianStats fit_gaussian(const std::vector<Mat>& latents);

double fid_from_stats(const GaussianStats& a, const GaussianStats& b);
double fid(const std::vector<Mat>& gen_latents, const std::vector<Mat>& real_latents);

// pooled retrieval hit rates at k = 1..3; pool = matched text plus
// (pool_size - 1) random mismatched texts, ranked by euclidean distance
std::vector<double> r_precision(const std::vector<Mat>& gen_latents,
                                const std::vector<Mat>& text_latents, int pool_size,
                                uint64_t seed, int k_max = 3);

double mm_dist(const std::vector<Mat>& gen_latents, const std::vector<Mat>& text_latents);

// mean distance over disjoint random pairs
double diversity(const std::vector<Mat>& gen_latents, int num_pairs, uint64_t seed);

double euclidean(const Mat& a, const Mat& b);

}  // namespace bimotion
