#include "bimotion/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "bimotion/rng.hpp"

namespace bimotion {

void jacobi_eigensym(const Mat& a, std::vector<double>& eigenvalues, Mat& eigenvectors) {
  require(a.rows == a.cols, errc::validation, "jacobi: square matrix required");
  int n = a.rows;
  Mat m = a;
  Mat v(n, n);
  for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;

  for (int sweep = 0; sweep < 128; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += m.at(p, q) * m.at(p, q);
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = m.at(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double mkp = m.at(k, p), mkq = m.at(k, q);
          m.at(k, p) = c * mkp - s * mkq;
          m.at(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          double mpk = m.at(p, k), mqk = m.at(q, k);
          m.at(p, k) = c * mpk - s * mqk;
          m.at(q, k) = s * mpk + c * mqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  eigenvalues.resize(n);
  for (int i = 0; i < n; ++i) eigenvalues[i] = m.at(i, i);
  eigenvectors = std::move(v);
}

Mat sym_sqrt(const Mat& a) {
  std::vector<double> lam;
  Mat v;
  jacobi_eigensym(a, lam, v);
  int n = a.rows;
  Mat out(n, n);
  for (int k = 0; k < n; ++k) {
    double l = lam[k] > 0.0 ? std::sqrt(lam[k]) : 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.at(i, j) += l * v.at(i, k) * v.at(j, k);
  }
  return out;
}

GaussianStats fit_gaussian(const std::vector<Mat>& latents) {
  require(latents.size() >= 2, errc::validation, "fit_gaussian: need at least 2 points");
  int d = latents[0].cols;
  GaussianStats st;
  st.mean = Mat(1, d);
  for (const auto& x : latents) {
    require(x.rows == 1 && x.cols == d, errc::validation, "fit_gaussian: ragged latents");
    for (int j = 0; j < d; ++j) st.mean.d[j] += x.d[j];
  }
  for (auto& m : st.mean.d) m /= static_cast<double>(latents.size());
  st.cov = Mat(d, d);
  for (const auto& x : latents)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        st.cov.at(i, j) += (x.d[i] - st.mean.d[i]) * (x.d[j] - st.mean.d[j]);
  double denom = static_cast<double>(latents.size()) - 1.0;
  for (auto& c : st.cov.d) c /= denom;
  return st;
}

double fid_from_stats(const GaussianStats& a, const GaussianStats& b) {
  require(a.mean.cols == b.mean.cols, errc::validation, "fid: dimension mismatch");
  int d = a.mean.cols;
  double mean_term = 0.0;
  for (int j = 0; j < d; ++j) {
    double diff = a.mean.d[j] - b.mean.d[j];
    mean_term += diff * diff;
  }
  double tr = 0.0;
  for (int i = 0; i < d; ++i) tr += a.cov.at(i, i) + b.cov.at(i, i);
  // Tr((S1 S2)^{1/2}) computed on the symmetric form S1^{1/2} S2 S1^{1/2}
  Mat ra = sym_sqrt(a.cov);
  Mat inner = matmul(matmul(ra, b.cov), ra);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      double s = 0.5 * (inner.at(i, j) + inner.at(j, i));
      inner.at(i, j) = s;
      inner.at(j, i) = s;
    }
  Mat cross = sym_sqrt(inner);
  double tr_cross = 0.0;
  for (int i = 0; i < d; ++i) tr_cross += cross.at(i, i);
  return mean_term + tr - 2.0 * tr_cross;
}

double fid(const std::vector<Mat>& gen_latents, const std::vector<Mat>& real_latents) {
  return fid_from_stats(fit_gaussian(gen_latents), fit_gaussian(real_latents));
}

double euclidean(const Mat& a, const Mat& b) {
  require(a.size() == b.size(), errc::validation, "euclidean: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a.d[i] - b.d[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<double> r_precision(const std::vector<Mat>& gen_latents,
                                const std::vector<Mat>& text_latents, int pool_size,
                                uint64_t seed, int k_max) {
  size_t n = gen_latents.size();
  require(n == text_latents.size(), errc::validation, "r_precision: count mismatch");
  require(pool_size >= 2, errc::validation, "r_precision: pool_size >= 2 required");
  require(n >= static_cast<size_t>(pool_size), errc::validation,
          "r_precision: fewer samples than pool_size");
  Rng rng(seed);
  std::vector<double> hits(k_max, 0.0);
  std::vector<int> pool;
  for (size_t i = 0; i < n; ++i) {
    pool.clear();
    pool.push_back(static_cast<int>(i));
    while (static_cast<int>(pool.size()) < pool_size) {
      int j = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(n) - 1));
      if (j == static_cast<int>(i)) continue;
      bool dup = false;
      for (int q : pool)
        if (q == j) dup = true;
      if (!dup) pool.push_back(j);
    }
    double d_match = euclidean(gen_latents[i], text_latents[i]);
    int rank = 0;
    for (int q : pool)
      if (q != static_cast<int>(i) && euclidean(gen_latents[i], text_latents[q]) < d_match)
        ++rank;
    for (int k = 0; k < k_max; ++k)
      if (rank <= k) hits[k] += 1.0;
  }
  for (auto& h : hits) h /= static_cast<double>(n);
  return hits;
}

double mm_dist(const std::vector<Mat>& gen_latents, const std::vector<Mat>& text_latents) {
  require(gen_latents.size() == text_latents.size() && !gen_latents.empty(), errc::validation,
          "mm_dist: matched nonempty sets required");
  double s = 0.0;
  for (size_t i = 0; i < gen_latents.size(); ++i)
    s += euclidean(gen_latents[i], text_latents[i]);
  return s / static_cast<double>(gen_latents.size());
}

double diversity(const std::vector<Mat>& gen_latents, int num_pairs, uint64_t seed) {
  require(num_pairs >= 1, errc::validation, "diversity: num_pairs >= 1 required");
  require(gen_latents.size() >= 2 * static_cast<size_t>(num_pairs), errc::validation,
          "diversity: need at least 2*num_pairs samples");
  std::vector<int> idx(gen_latents.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  Rng rng(seed);
  rng.shuffle(idx);
  double s = 0.0;
  for (int p = 0; p < num_pairs; ++p)
    s += euclidean(gen_latents[idx[2 * p]], gen_latents[idx[2 * p + 1]]);
  return s / num_pairs;
}

}  // namespace bimotion
