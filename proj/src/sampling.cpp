#include "nsls/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nsls {

AliasTable::AliasTable(const std::vector<double>& weights) {
  size_ = static_cast<int>(weights.size());
  if (size_ == 0) throw std::invalid_argument("alias: empty weight vector");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("alias: weights must be finite nonnegative");
    total_ += w;
  }
  if (total_ <= 0.0)
    throw std::invalid_argument("alias: all weights are zero");

  std::vector<double> scaled(size_);
  for (int i = 0; i < size_; ++i) scaled[i] = weights[i] * size_ / total_;
  buckets_.resize(size_);
  for (int i = 0; i < size_; ++i) {
    buckets_[i].self = i;
    buckets_[i].alias = i;
  }

  std::vector<int> small, large;
  for (int i = size_ - 1; i >= 0; --i)
    (scaled[i] < 1.0 ? small : large).push_back(i);
  while (!small.empty() && !large.empty()) {
    const int s = small.back();
    small.pop_back();
    const int l = large.back();
    buckets_[s].accept = scaled[s];
    buckets_[s].alias = l;
    scaled[l] -= 1.0 - scaled[s];
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftover buckets are full up to roundoff and keep accept = 1.
}

double AliasTable::probability(int i) const {
  double p = buckets_[i].accept;
  for (int b = 0; b < size_; ++b)
    if (buckets_[b].alias == i && b != i) p += 1.0 - buckets_[b].accept;
  return p / size_;
}

HeadTailSplit top_c_split(const SparseRow& row, int budget) {
  if (budget < 1) throw std::invalid_argument("top_c_split: budget must be >= 1");
  const int nnz = row.nnz();
  std::vector<int> order(nnz);
  std::iota(order.begin(), order.end(), 0);
  // Largest magnitude first, ties broken by the lower coordinate index.
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(row.values[a]);
    const double mb = std::abs(row.values[b]);
    if (ma != mb) return ma > mb;
    return row.indices[a] < row.indices[b];
  });
  HeadTailSplit split;
  const int h = std::min(budget, nnz);
  split.head_pos.assign(order.begin(), order.begin() + h);
  split.tail_pos.assign(order.begin() + h, order.end());
  std::sort(split.head_pos.begin(), split.head_pos.end());
  std::sort(split.tail_pos.begin(), split.tail_pos.end());
  for (int p : split.tail_pos) split.tail_l2_sq += row.values[p] * row.values[p];
  return split;
}

RowSampler make_row_sampler(const SparseRow& row, int budget) {
  if (row.empty())
    throw std::invalid_argument("row sampler: zero row has no distribution");
  RowSampler s;
  s.row = &row;
  s.budget = budget;
  s.exact = budget >= row.nnz();
  if (s.exact) {
    // The whole row is the head; dot products are exact.
    for (int t = 0; t < row.nnz(); ++t)
      s.head.push_back({row.indices[t], row.values[t]});
    return s;
  }

  HeadTailSplit split = top_c_split(row, budget);
  s.tail_l2_sq = split.tail_l2_sq;
  for (int p : split.head_pos)
    s.head.push_back({row.indices[p], row.values[p]});

  // Samplevec runs over the full support with l1 weights.
  std::vector<double> w1(row.nnz());
  for (int t = 0; t < row.nnz(); ++t) {
    w1[t] = std::abs(row.values[t]);
    s.vec.push_back(
        {row.indices[t], row.values[t] < 0.0 ? -row.l1_norm : row.l1_norm});
  }
  s.vec_alias = AliasTable(w1);

  // Sampledotproduct runs over the tail with squared weights.
  std::vector<double> w2;
  w2.reserve(split.tail_pos.size());
  for (int p : split.tail_pos) {
    const double v = row.values[p];
    w2.push_back(v * v);
    s.tail.push_back({row.indices[p], split.tail_l2_sq / v});
  }
  if (!w2.empty()) s.tail_alias = AliasTable(w2);
  return s;
}

SamplingPlan make_sampling_plan(const RowMatrix& mat, double k,
                                bool force_exact) {
  if (!(k > 0.0)) throw std::invalid_argument("sampling plan: k must be > 0");
  const int n = mat.n_rows();
  const int d = mat.n_cols();
  SamplingPlan plan;
  plan.k = k;
  plan.forced_exact = force_exact;
  plan.budgets.resize(n, 0);
  plan.row_prob.resize(n, 0.0);
  plan.exact_rows.resize(n, false);

  std::vector<double> weights(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const SparseRow& r = mat.row(i);
    if (r.empty()) continue;
    int c;
    if (force_exact) {
      c = r.nnz();
    } else {
      c = static_cast<int>(std::ceil(std::sqrt(r.numerical_sparsity) * k));
      c = std::clamp(c, 1, d);
    }
    plan.budgets[i] = c;
    plan.exact_rows[i] = c >= r.nnz();
    weights[i] = r.l2_norm_sq * (1.0 + r.numerical_sparsity / c);
    plan.normalizer += weights[i];
  }
  if (plan.normalizer <= 0.0)
    throw std::invalid_argument("sampling plan: matrix has no nonzero rows");
  for (int i = 0; i < n; ++i) plan.row_prob[i] = weights[i] / plan.normalizer;
  plan.row_alias = AliasTable(weights);
  return plan;
}

std::vector<RowSampler> make_row_samplers(const RowMatrix& mat,
                                          const SamplingPlan& plan) {
  std::vector<RowSampler> samplers;
  samplers.reserve(mat.n_rows());
  for (int i = 0; i < mat.n_rows(); ++i) {
    if (mat.row(i).empty()) {
      samplers.emplace_back();  // never drawn: p_i = 0
    } else {
      samplers.push_back(make_row_sampler(mat.row(i), plan.budgets[i]));
    }
  }
  return samplers;
}

void samplevec(const RowSampler& s, Rng& rng, EstimateScratch& scratch,
               GradientEstimate& out) {
  out.coords.clear();
  out.touch_count = 0;
  const SparseRow& r = *s.row;
  if (s.exact) {
    for (int t = 0; t < r.nnz(); ++t)
      out.coords.emplace_back(r.indices[t], r.values[t]);
    out.touch_count += r.nnz();
    return;
  }
  const double inv_c = 1.0 / s.budget;
  out.touch_count += s.budget;
  if (s.budget <= 16) {
    // Sorted insertion beats std::sort at the budgets the eigensolver uses.
    for (int t = 0; t < s.budget; ++t) {
      const RowSampler::Payload& p = s.vec[s.vec_alias.draw(rng)];
      const double val = p.value * inv_c;
      auto it = out.coords.end();
      while (it != out.coords.begin() && (it - 1)->first >= p.idx) --it;
      if (it != out.coords.end() && it->first == p.idx)
        it->second += val;
      else
        out.coords.insert(it, {p.idx, val});
    }
    return;
  }
  scratch.pairs.clear();
  for (int t = 0; t < s.budget; ++t) {
    const RowSampler::Payload& p = s.vec[s.vec_alias.draw(rng)];
    scratch.pairs.emplace_back(p.idx, p.value * inv_c);
  }
  std::sort(scratch.pairs.begin(), scratch.pairs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& p : scratch.pairs) {
    if (!out.coords.empty() && out.coords.back().first == p.first)
      out.coords.back().second += p.second;
    else
      out.coords.push_back(p);
  }
}

GradientEstimate samplevec_draw(const RowSampler& s, Rng& rng) {
  EstimateScratch scratch;
  GradientEstimate out;
  samplevec(s, rng, scratch, out);
  return out;
}

GradientEstimate samplerankonemat_draw(const RowSampler& s, const Vector& x,
                                       Rng& rng) {
  EstimateScratch scratch;
  GradientEstimate out;
  samplerankonemat(s, [&](int j) { return x[j]; }, rng, scratch, out);
  return out;
}

GradientEstimate samplemat_draw(const SamplingPlan& plan,
                                const std::vector<RowSampler>& samplers,
                                const Vector& x, Rng& rng) {
  EstimateScratch scratch;
  GradientEstimate out;
  samplemat(plan, samplers, [&](int j) { return x[j]; }, rng, scratch, out);
  return out;
}

GradientEstimate samplemat_diff_draw(const SamplingPlan& plan,
                                     const std::vector<RowSampler>& samplers,
                                     const Vector& xa, const Vector& xb,
                                     Rng& rng) {
  EstimateScratch scratch;
  GradientEstimate out;
  samplemat_diff(
      plan, samplers, [&](int j) { return xa[j]; },
      [&](int j) { return xb[j]; }, rng, scratch, out);
  return out;
}

Vector estimate_to_dense(const GradientEstimate& est, int dim) {
  Vector v = Vector::Zero(dim);
  for (const auto& c : est.coords) v[c.first] += c.second;
  return v;
}

}  // namespace nsls
