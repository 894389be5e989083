#include "jmd/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <utility>

#include "jmd/error.hpp"

namespace jmd::kernels {
namespace {

constexpr int kLeafSize = 16;
constexpr Index kKdTreeMaxDim = 12;
constexpr Index kGramBlock = 4096;

struct Candidate {
  double d2;
  Index idx;
};

inline bool closer(const Candidate& a, const Candidate& b) {
  return a.d2 < b.d2 || (a.d2 == b.d2 && a.idx < b.idx);
}

// Row-major copy; distances are summed over dimensions in index order so the
// values match the serial brute-force reference bit for bit.
class PointSet {
 public:
  explicit PointSet(const Matrix& m) : n_(m.rows()), d_(m.cols()), data_(static_cast<size_t>(m.size())) {
    for (Index i = 0; i < n_; ++i)
      for (Index c = 0; c < d_; ++c) data_[static_cast<size_t>(i * d_ + c)] = m(i, c);
  }
  Index size() const { return n_; }
  Index dim() const { return d_; }
  const double* row(Index i) const { return data_.data() + i * d_; }
  double distance2(Index a, Index b) const {
    const double* pa = row(a);
    const double* pb = row(b);
    double s = 0.0;
    for (Index c = 0; c < d_; ++c) {
      const double diff = pa[c] - pb[c];
      s += diff * diff;
    }
    return s;
  }

 private:
  Index n_, d_;
  std::vector<double> data_;
};

// Bounded max-heap of the k best candidates; heap top is the worst kept.
class NeighborHeap {
 public:
  explicit NeighborHeap(int k) : k_(static_cast<size_t>(k)) { items_.reserve(k_); }
  bool full() const { return items_.size() == k_; }
  const Candidate& worst() const { return items_.front(); }
  bool admits(const Candidate& c) const { return !full() || closer(c, worst()); }
  void push(const Candidate& c) {
    auto cmp = [](const Candidate& a, const Candidate& b) { return closer(a, b); };
    if (!full()) {
      items_.push_back(c);
      std::push_heap(items_.begin(), items_.end(), cmp);
    } else if (closer(c, worst())) {
      std::pop_heap(items_.begin(), items_.end(), cmp);
      items_.back() = c;
      std::push_heap(items_.begin(), items_.end(), cmp);
    }
  }
  // Sorts in place; the heap must be cleared before reuse.
  const std::vector<Candidate>& sorted() {
    std::sort(items_.begin(), items_.end(), closer);
    return items_;
  }
  void clear() { items_.clear(); }

 private:
  size_t k_;
  std::vector<Candidate> items_;
};

class KdTree {
 public:
  explicit KdTree(const PointSet& pts) : pts_(pts), perm_(static_cast<size_t>(pts.size())) {
    std::iota(perm_.begin(), perm_.end(), Index{0});
    nodes_.reserve(static_cast<size_t>(2 * pts.size() / kLeafSize + 2));
    build(0, pts.size());
    // Leaf scans read points in tree order, contiguously.
    const Index d = pts.dim();
    ordered_.resize(static_cast<size_t>(pts.size() * d));
    for (Index p = 0; p < pts.size(); ++p) std::copy_n(pts.row(perm_[static_cast<size_t>(p)]), d, ordered_.data() + p * d);
  }

  // Point index at tree position p; visiting queries in this order keeps
  // neighbouring searches on the same leaves.
  Index at(Index p) const { return perm_[static_cast<size_t>(p)]; }

  // offsets: scratch of size dim(), zero on entry and on return.
  void query(Index qi, NeighborHeap& heap, std::vector<double>& offsets) const {
    search(0, qi, pts_.row(qi), 0.0, offsets.data(), heap);
  }

 private:
  struct Node {
    Index begin, end;
    Index dim = -1;
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(Index begin, Index end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Index best_dim = 0;
    double best_spread = -1.0;
    for (Index c = 0; c < pts_.dim(); ++c) {
      double lo = pts_.row(perm_[static_cast<size_t>(begin)])[c], hi = lo;
      for (Index p = begin; p < end; ++p) {
        const double v = pts_.row(perm_[static_cast<size_t>(p)])[c];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = c;
      }
    }
    if (best_spread <= 0.0) return id;  // all points coincide: keep as a leaf

    const Index mid = begin + (end - begin) / 2;
    std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end, [&](Index a, Index b) {
      return pts_.row(a)[best_dim] < pts_.row(b)[best_dim];
    });
    nodes_[static_cast<size_t>(id)].dim = best_dim;
    nodes_[static_cast<size_t>(id)].split = pts_.row(perm_[static_cast<size_t>(mid)])[best_dim];
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[static_cast<size_t>(id)].left = l;
    nodes_[static_cast<size_t>(id)].right = r;
    return id;
  }

  // box_d2 is the squared distance from q to this node's cell, built up from
  // the per-dimension offsets of the splits crossed so far.
  void search(int id, Index qi, const double* q, double box_d2, double* offsets, NeighborHeap& heap) const {
    const Node& node = nodes_[static_cast<size_t>(id)];
    if (node.left < 0) {
      const Index d = pts_.dim();
      for (Index p = node.begin; p < node.end; ++p) {
        const Index j = perm_[static_cast<size_t>(p)];
        if (j == qi) continue;
        const double* pj = ordered_.data() + p * d;
        double d2 = 0.0;  // same summation order as PointSet::distance2
        for (Index c = 0; c < d; ++c) {
          const double diff = q[c] - pj[c];
          d2 += diff * diff;
        }
        const Candidate c{d2, j};
        if (heap.admits(c)) heap.push(c);
      }
      return;
    }
    const double diff = q[node.dim] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, qi, q, box_d2, offsets, heap);
    const double old = offsets[node.dim];
    const double far_d2 = box_d2 - old * old + diff * diff;
    // <= keeps equal-distance candidates with smaller indices reachable.
    if (!heap.full() || far_d2 <= heap.worst().d2) {
      offsets[node.dim] = diff;
      search(far, qi, q, far_d2, offsets, heap);
      offsets[node.dim] = old;
    }
  }

  const PointSet& pts_;
  std::vector<Index> perm_;
  std::vector<Node> nodes_;
  std::vector<double> ordered_;
};

void store(KnnTable& table, Index i, const std::vector<Candidate>& best) {
  for (int j = 0; j < table.k; ++j) {
    table.index[static_cast<size_t>(i * table.k + j)] = best[static_cast<size_t>(j)].idx;
    table.sq_dist[static_cast<size_t>(i * table.k + j)] = best[static_cast<size_t>(j)].d2;
  }
}

}  // namespace

KnnTable knn(const Matrix& points, int k) {
  const Index n = points.rows();
  if (k < 1 || n < k + 1) throw Error(ErrorCode::TooFewPoints, "k-NN needs more points than neighbours");
  KnnTable table{n, k, std::vector<Index>(static_cast<size_t>(n * k)), std::vector<double>(static_cast<size_t>(n * k))};
  const PointSet pts(points);

  if (pts.dim() <= kKdTreeMaxDim) {
    const KdTree tree(pts);
#pragma omp parallel
    {
      NeighborHeap heap(k);
      std::vector<double> offsets(static_cast<size_t>(pts.dim()), 0.0);
#pragma omp for schedule(dynamic, 256)
      for (Index p = 0; p < n; ++p) {
        const Index i = tree.at(p);
        heap.clear();
        tree.query(i, heap, offsets);
        store(table, i, heap.sorted());
      }
    }
  } else {
#pragma omp parallel
    {
      NeighborHeap heap(k);
#pragma omp for schedule(dynamic, 64)
      for (Index i = 0; i < n; ++i) {
        heap.clear();
        for (Index j = 0; j < n; ++j) {
          if (j == i) continue;
          const Candidate c{pts.distance2(i, j), j};
          if (heap.admits(c)) heap.push(c);
        }
        store(table, i, heap.sorted());
      }
    }
  }
  return table;
}

Matrix column_gram(const Matrix& s) {
  const Index n = s.rows();
  const Index blocks = (n + kGramBlock - 1) / kGramBlock;
  std::vector<Matrix> partial(static_cast<size_t>(blocks));
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index begin = b * kGramBlock;
    const Index len = std::min(kGramBlock, n - begin);
    const auto block = s.middleRows(begin, len);
    Matrix& p = partial[static_cast<size_t>(b)];
    p = Matrix::Zero(s.cols(), s.cols());
    p.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
  }
  Matrix gram = Matrix::Zero(s.cols(), s.cols());
  for (const Matrix& p : partial) gram += p;
  return gram.selfadjointView<Eigen::Lower>();  // exactly symmetric
}

std::vector<BridgeRow> explicit_bridge_sweep(const std::vector<BridgeRow>& b, const SparseMatrix& laplacian_main,
                                             const SparseMatrix& laplacian_ref, double delta_b, int sparsity_cap) {
  const Index n_main = static_cast<Index>(b.size());
  const Index n_ref = laplacian_ref.rows();
  std::vector<BridgeRow> out(b.size());

  // Rows are independent; visiting them grouped by their heaviest column makes
  // consecutive rows read the same parts of the reference Laplacian.
  std::vector<Index> key(b.size(), n_ref), order(b.size());
  for (size_t i = 0; i < b.size(); ++i) {
    double best = 0.0;
    for (const BridgeEntry& e : b[i])
      if (e.value > best) {
        best = e.value;
        key[i] = e.col;
      }
  }
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return key[static_cast<size_t>(x)] < key[static_cast<size_t>(y)]; });

#pragma omp parallel
  {
    // Dense scratch over reference columns. A slot is live for row i when its
    // stamp equals the row's generation, so nothing needs clearing between rows.
    std::vector<double> t(static_cast<size_t>(n_ref)), r(static_cast<size_t>(n_ref));
    std::vector<std::uint32_t> t_mark(static_cast<size_t>(n_ref), 0), r_mark(static_cast<size_t>(n_ref), 0);
    std::uint32_t gen = 0;
    std::vector<Index> t_cols, r_cols;
    BridgeRow scratch;

#pragma omp for schedule(dynamic, 128)
    for (Index pos = 0; pos < n_main; ++pos) {
      const Index i = order[static_cast<size_t>(pos)];
      if (++gen == 0) {
        std::fill(t_mark.begin(), t_mark.end(), 0);
        std::fill(r_mark.begin(), r_mark.end(), 0);
        gen = 1;
      }
      t_cols.clear();
      r_cols.clear();
      // First touch assigns, which equals 0.0 + v: sums match the serial kernel.
      auto touch_t = [&](Index c, double v) {
        const size_t k = static_cast<size_t>(c);
        if (t_mark[k] != gen) {
          t_mark[k] = gen;
          t[k] = v;
          t_cols.push_back(c);
        } else {
          t[k] += v;
        }
      };
      auto touch_r = [&](Index c, double v) {
        const size_t k = static_cast<size_t>(c);
        if (r_mark[k] != gen) {
          r_mark[k] = gen;
          r[k] = v;
          r_cols.push_back(c);
        } else {
          r[k] += v;
        }
      };

      // T_i = B_i - d * sum_j Lf_ij B_j
      for (const BridgeEntry& e : b[static_cast<size_t>(i)]) touch_t(e.col, e.value);
      for (SparseMatrix::InnerIterator it(laplacian_main, i); it; ++it) {
        const double coeff = -delta_b * it.value();
        for (const BridgeEntry& e : b[static_cast<size_t>(it.col())]) touch_t(e.col, coeff * e.value);
      }
      // R_i = T_i - d * sum_c T_ic Lk_c.
      for (Index c : t_cols) touch_r(c, t[static_cast<size_t>(c)]);
      for (Index c : t_cols) {
        const double tc = t[static_cast<size_t>(c)];
        if (tc == 0.0) continue;
        for (SparseMatrix::InnerIterator it(laplacian_ref, c); it; ++it) touch_r(it.col(), -delta_b * tc * it.value());
      }

      scratch.clear();
      for (Index c : r_cols) {
        const double v = r[static_cast<size_t>(c)];
        if (v > 0.0) scratch.push_back({c, v});
      }
      prune_and_normalize(scratch, sparsity_cap);
      out[static_cast<size_t>(i)].assign(scratch.begin(), scratch.end());  // exact size, not the scratch capacity
    }
  }
  return out;
}

Matrix kronecker_sum_apply(const Matrix& v, const SparseMatrix& laplacian_main, const SparseMatrix& laplacian_ref, double delta) {
  // Both products become axpys over contiguous columns: V Lk column by
  // column of V, and Lf V as (V^T Lf^T)^T over columns of V^T.
  const Eigen::SparseMatrix<double, Eigen::ColMajor> lk(laplacian_ref);
  const Matrix vt = v.transpose();
  Matrix lf_vt = Matrix::Zero(v.cols(), v.rows());
  Matrix out(v.rows(), v.cols());
#pragma omp parallel
  {
#pragma omp for schedule(static) nowait
    for (Index i = 0; i < v.rows(); ++i) {
      auto col = lf_vt.col(i);
      for (SparseMatrix::InnerIterator it(laplacian_main, i); it; ++it) col += it.value() * vt.col(it.col());
    }
#pragma omp for schedule(static)
    for (Index j = 0; j < v.cols(); ++j) {
      auto col = out.col(j);
      col = v.col(j);
      for (Eigen::SparseMatrix<double, Eigen::ColMajor>::InnerIterator it(lk, j); it; ++it) col += (delta * it.value()) * v.col(it.row());
    }
  }
  out.noalias() += delta * lf_vt.transpose();
  return out;
}

}  // namespace jmd::kernels
