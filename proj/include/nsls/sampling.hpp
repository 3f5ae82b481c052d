#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nsls/rng.hpp"
#include "nsls/sparse_matrix.hpp"

namespace nsls {

// Walker/Kronmal-Peterson alias table: O(support) construction, O(1) draws.
// Threshold and alias index live in one bucket struct so a draw touches a
// single cache line.
class AliasTable {
 public:
  AliasTable() = default;
  // weights must be nonnegative and finite with at least one positive entry.
  explicit AliasTable(const std::vector<double>& weights);

  int draw(Rng& rng) const {
    const Bucket& b = buckets_[rng.next_below(size_)];
    return rng.next_double() < b.accept ? b.self : b.alias;
  }

  int size() const { return size_; }
  double total_weight() const { return total_; }
  // Exact draw probability of bucket i as realized by the table.
  double probability(int i) const;
  double accept_of(int i) const { return buckets_[i].accept; }
  int alias_of(int i) const { return buckets_[i].alias; }

 private:
  struct Bucket {
    double accept = 1.0;
    int self = 0;
    int alias = 0;
  };
  std::vector<Bucket> buckets_;
  int size_ = 0;
  double total_ = 0.0;
};

// Magnitude split of a sparse row: the budget-many largest-magnitude
// coordinates (ties to the lower index) are kept exactly, the rest form the
// sampled tail.
struct HeadTailSplit {
  std::vector<int> head_pos;   // positions into the row arrays, sorted by index
  std::vector<int> tail_pos;
  double tail_l2_sq = 0.0;
};

HeadTailSplit top_c_split(const SparseRow& row, int budget);

// Per-row sampling state shared by all estimator draws for that row. The
// per-pick payloads are interleaved (index, value) so a draw costs one load.
struct RowSampler {
  struct Payload {
    int idx = 0;
    double value = 0.0;
  };
  // Head of the split: coordinate ids and values, exact part of dot products.
  std::vector<Payload> head;
  // Samplevec alias over the full support, p_j = |a_j| / ||a||_1; payload
  // value is the signed output magnitude sign(a_j) * ||a||_1.
  AliasTable vec_alias;
  std::vector<Payload> vec;
  // Sampledotproduct alias over the tail only, p_j = a_j^2 / ||tail||_2^2;
  // payload value is ||tail||_2^2 / a_j so the term is value * x_j.
  AliasTable tail_alias;
  std::vector<Payload> tail;
  double tail_l2_sq = 0.0;
  int budget = 0;       // c_i
  bool exact = false;   // budget >= nnz: the row is used verbatim
  const SparseRow* row = nullptr;
};

RowSampler make_row_sampler(const SparseRow& row, int budget);

// Problem-level sampling configuration for Samplemat:
//   c_i = clamp(ceil(sqrt(s_i) * k), 1, d),
//   p_i proportional to ||a_i||_2^2 (1 + s_i / c_i),  M the normalizer.
struct SamplingPlan {
  double k = 0.0;
  std::vector<int> budgets;        // c_i per row (0 for empty rows)
  std::vector<double> row_prob;    // p_i
  AliasTable row_alias;
  double normalizer = 0.0;         // M
  double sigma_sq = 0.0;           // variance parameter for the consumer
  std::vector<bool> exact_rows;    // c_i >= nnz(a_i)
  bool forced_exact = false;       // kappa > d^2 fallback engaged
};

// force_exact implements the plain row-sampled fallback used when the
// variance lemma's kappa <= d^2 hypothesis fails.
SamplingPlan make_sampling_plan(const RowMatrix& mat, double k,
                                bool force_exact = false);

std::vector<RowSampler> make_row_samplers(const RowMatrix& mat,
                                          const SamplingPlan& plan);

// Sparse estimator output with provenance for cost accounting. touch_count
// is the number of coordinate slots (matrix or iterate) the draw read or
// wrote; it is bounded by 4 c_i + O(1).
struct GradientEstimate {
  int row_id = -1;
  std::vector<std::pair<int, double>> coords;  // index, value (sorted, merged)
  double scalar_dot = 0.0;                     // the sampled (a^T x) value
  long touch_count = 0;
};

// Reusable buffers so the solver hot loop performs no allocation.
struct EstimateScratch {
  std::vector<std::pair<int, double>> pairs;
  std::vector<std::pair<int, double>> merged;
};

// Algorithm "Samplevec": c iid draws with p_j = |a_j| / ||a||_1 over the full
// support; unbiased for the row itself.
void samplevec(const RowSampler& s, Rng& rng, EstimateScratch& scratch,
               GradientEstimate& out);

// Algorithm "Sampledotproduct": exact head dot plus c iid tail draws with
// p_j = a_j^2 / ||tail||_2^2; unbiased for a^T x. x is any coordinate-
// readable callable j -> double.
template <typename XView>
double sampledotproduct(const RowSampler& s, XView&& x, Rng& rng,
                        long* touches) {
  double acc = 0.0;
  for (const RowSampler::Payload& h : s.head) acc += h.value * x(h.idx);
  *touches += static_cast<long>(s.head.size());
  if (!s.tail.empty()) {
    double tail_acc = 0.0;
    for (int t = 0; t < s.budget; ++t) {
      const RowSampler::Payload& p = s.tail[s.tail_alias.draw(rng)];
      tail_acc += p.value * x(p.idx);
    }
    acc += tail_acc / s.budget;
    *touches += s.budget;
  }
  return acc;
}

// Algorithm "Samplerankonemat": independent Samplevec and Sampledotproduct
// draws combined into an estimate of a (a^T x).
template <typename XView>
void samplerankonemat(const RowSampler& s, XView&& x, Rng& rng,
                      EstimateScratch& scratch, GradientEstimate& out) {
  if (s.exact) {
    out.coords.clear();
    long touches = 0;
    double dot = 0.0;
    const SparseRow& r = *s.row;
    for (int t = 0; t < r.nnz(); ++t) dot += r.values[t] * x(r.indices[t]);
    touches += 2 * r.nnz();
    for (int t = 0; t < r.nnz(); ++t)
      out.coords.emplace_back(r.indices[t], r.values[t] * dot);
    touches += r.nnz();
    out.scalar_dot = dot;
    out.touch_count = touches;
    return;
  }
  samplevec(s, rng, scratch, out);
  const double dot = sampledotproduct(s, x, rng, &out.touch_count);
  out.scalar_dot = dot;
  for (auto& c : out.coords) c.second *= dot;
}

// Algorithm "Samplemat": row i ~ p_i, then (1/p_i) Samplerankonemat on it.
template <typename XView>
void samplemat(const SamplingPlan& plan, const std::vector<RowSampler>& samplers,
               XView&& x, Rng& rng, EstimateScratch& scratch,
               GradientEstimate& out) {
  const int i = plan.row_alias.draw(rng);
  samplerankonemat(samplers[i], x, rng, scratch, out);
  out.row_id = i;
  const double inv_p = 1.0 / plan.row_prob[i];
  for (auto& c : out.coords) c.second *= inv_p;
  out.scalar_dot *= inv_p;
  out.touch_count += 1;
}

// Coupled difference estimator for SVRG: the same row, Samplevec draws and
// tail draws evaluate both points, so the result is Samplemat applied to the
// coordinate-wise difference xa - xb with shared randomness.
template <typename XViewA, typename XViewB>
void samplemat_diff(const SamplingPlan& plan,
                    const std::vector<RowSampler>& samplers, XViewA&& xa,
                    XViewB&& xb, Rng& rng, EstimateScratch& scratch,
                    GradientEstimate& out) {
  auto diff = [&](int j) { return xa(j) - xb(j); };
  samplemat(plan, samplers, diff, rng, scratch, out);
}

// Convenience wrappers returning fresh estimates (tests, moment studies).
// Unlike the scratch-based calls these are safe to invoke concurrently.
GradientEstimate samplevec_draw(const RowSampler& s, Rng& rng);
GradientEstimate samplerankonemat_draw(const RowSampler& s, const Vector& x,
                                       Rng& rng);
GradientEstimate samplemat_draw(const SamplingPlan& plan,
                                const std::vector<RowSampler>& samplers,
                                const Vector& x, Rng& rng);
GradientEstimate samplemat_diff_draw(const SamplingPlan& plan,
                                     const std::vector<RowSampler>& samplers,
                                     const Vector& xa, const Vector& xb,
                                     Rng& rng);

Vector estimate_to_dense(const GradientEstimate& est, int dim);

}  // namespace nsls
