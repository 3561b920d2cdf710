#include "ocoref/metrics.h"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"

namespace ocoref {

MetricCounts& MetricCounts::operator+=(const MetricCounts& o) {
  p_num += o.p_num;
  p_den += o.p_den;
  r_num += o.r_num;
  r_den += o.r_den;
  return *this;
}

Prf make_prf(double precision, double recall) {
  Prf out{precision, recall, 0.0};
  if (precision + recall > 0.0) {
    out.f1 = 2.0 * precision * recall / (precision + recall);
  }
  return out;
}

Prf to_prf(const MetricCounts& c) {
  return make_prf(c.p_den > 0.0 ? c.p_num / c.p_den : 0.0,
                  c.r_den > 0.0 ? c.r_num / c.r_den : 0.0);
}

namespace {

using ClusterOf = std::map<MentionAddress, int>;

ClusterOf index_clusters(const Clustering& clusters) {
  ClusterOf out;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (const MentionAddress& m : clusters[c]) out[m] = static_cast<int>(c);
  }
  return out;
}

// Sum over `key` clusters of (|k| - partitions of k by `response`), and the
// sum of (|k| - 1).
std::pair<double, double> muc_side(const Clustering& key,
                                   const Clustering& response) {
  const ClusterOf where = index_clusters(response);
  double num = 0.0, den = 0.0;
  for (const Cluster& k : key) {
    if (k.empty()) continue;
    std::set<int> parts;
    int unmatched = 0;
    for (const MentionAddress& m : k) {
      auto it = where.find(m);
      if (it == where.end()) {
        ++unmatched;
      } else {
        parts.insert(it->second);
      }
    }
    const double partitions = static_cast<double>(parts.size() + unmatched);
    num += static_cast<double>(k.size()) - partitions;
    den += static_cast<double>(k.size()) - 1.0;
  }
  return {num, den};
}

// Sum over mentions of `key` of |K(m) n R(m)| / |K(m)|, and the mention count.
std::pair<double, double> b3_side(const Clustering& key,
                                  const Clustering& response) {
  const ClusterOf where = index_clusters(response);
  double num = 0.0, den = 0.0;
  for (const Cluster& k : key) {
    std::map<int, int> overlap;
    for (const MentionAddress& m : k) {
      auto it = where.find(m);
      if (it != where.end()) ++overlap[it->second];
    }
    for (const auto& [r, n] : overlap) {
      num += static_cast<double>(n) * n / static_cast<double>(k.size());
    }
    den += static_cast<double>(k.size());
  }
  return {num, den};
}

std::size_t intersection(const Cluster& a, const Cluster& b) {
  std::set<MentionAddress> sa(a.begin(), a.end());
  std::size_t n = 0;
  for (const MentionAddress& m : std::set<MentionAddress>(b.begin(), b.end())) {
    n += sa.count(m);
  }
  return n;
}

std::set<MentionAddress> mentions_of(const Clustering& clusters) {
  std::set<MentionAddress> out;
  for (const Cluster& c : clusters) out.insert(c.begin(), c.end());
  return out;
}

}  // namespace

MetricCounts muc_counts(const Clustering& gold, const Clustering& pred) {
  const auto [rn, rd] = muc_side(gold, pred);
  const auto [pn, pd] = muc_side(pred, gold);
  return {pn, pd, rn, rd};
}

MetricCounts b3_counts(const Clustering& gold, const Clustering& pred) {
  const auto [rn, rd] = b3_side(gold, pred);
  const auto [pn, pd] = b3_side(pred, gold);
  return {pn, pd, rn, rd};
}

double phi4(const Cluster& k, const Cluster& r) {
  if (k.empty() && r.empty()) return 0.0;
  return 2.0 * static_cast<double>(intersection(k, r)) /
         static_cast<double>(k.size() + r.size());
}

std::vector<int> max_assignment(const std::vector<std::vector<double>>& sim) {
  const std::size_t rows = sim.size();
  std::size_t cols = 0;
  for (const auto& row : sim) cols = std::max(cols, row.size());
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  auto cost = [&](std::size_t i, std::size_t j) {
    return i < rows && j < sim[i].size() ? -sim[i][j] : 0.0;
  };
  // Kuhn-Munkres with potentials, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = match[j];
    if (i >= 1 && i <= rows && j <= cols) out[i - 1] = static_cast<int>(j - 1);
  }
  return out;
}

MetricCounts ceaf_counts(const Clustering& gold, const Clustering& pred) {
  std::vector<std::vector<double>> sim(gold.size(),
                                       std::vector<double>(pred.size(), 0.0));
  for (std::size_t g = 0; g < gold.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) {
      sim[g][p] = phi4(gold[g], pred[p]);
    }
  }
  double total = 0.0;
  const std::vector<int> assignment = max_assignment(sim);
  for (std::size_t g = 0; g < assignment.size(); ++g) {
    if (assignment[g] >= 0) total += sim[g][assignment[g]];
  }
  return {total, static_cast<double>(pred.size()), total,
          static_cast<double>(gold.size())};
}

MetricCounts mention_counts(const Clustering& gold, const Clustering& pred) {
  const auto g = mentions_of(gold);
  const auto p = mentions_of(pred);
  double common = 0.0;
  for (const MentionAddress& m : p) common += static_cast<double>(g.count(m));
  return {common, static_cast<double>(p.size()), common,
          static_cast<double>(g.size())};
}

Prf muc(const Clustering& gold, const Clustering& pred) {
  return to_prf(muc_counts(gold, pred));
}

Prf b3(const Clustering& gold, const Clustering& pred) {
  return to_prf(b3_counts(gold, pred));
}

Prf ceaf_phi4(const Clustering& gold, const Clustering& pred) {
  return to_prf(ceaf_counts(gold, pred));
}

Prf mention_prf(const Clustering& gold, const Clustering& pred) {
  return to_prf(mention_counts(gold, pred));
}

double avg_f1(double muc_f1, double b3_f1, double ceaf_f1) {
  return (muc_f1 + b3_f1 + ceaf_f1) / 3.0;
}

void Scorer::add(const Clustering& gold, const Clustering& pred,
                 const Clustering* mention_gold) {
  muc_ += muc_counts(gold, pred);
  b3_ += b3_counts(gold, pred);
  ceaf_ += ceaf_counts(gold, pred);
  mentions_ += mention_counts(mention_gold ? *mention_gold : gold, pred);
  ++documents_;
}

ScoreReport Scorer::report() const {
  ScoreReport r;
  r.muc = to_prf(muc_);
  r.b3 = to_prf(b3_);
  r.ceaf = to_prf(ceaf_);
  r.avg_f1 = avg_f1(r.muc.f1, r.b3.f1, r.ceaf.f1);
  r.mentions = to_prf(mentions_);
  r.documents = documents_;
  return r;
}

namespace {

nlohmann::json prf_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

}  // namespace

std::string ScoreReport::to_json() const {
  return nlohmann::json({{"documents", documents},
                         {"muc", prf_json(muc)},
                         {"b3", prf_json(b3)},
                         {"ceaf_phi4", prf_json(ceaf)},
                         {"avg_f1", avg_f1},
                         {"mentions", prf_json(mentions)}})
      .dump();
}

std::string ScoreReport::to_table() const {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-4s %9s %9s %9s %9s\n", "", "MUC", "B3",
                "CEAF_phi4", "Avg F1");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-4s %9.2f %9.2f %9.2f\n", "P",
                100 * muc.precision, 100 * b3.precision, 100 * ceaf.precision);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-4s %9.2f %9.2f %9.2f\n", "R",
                100 * muc.recall, 100 * b3.recall, 100 * ceaf.recall);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-4s %9.2f %9.2f %9.2f %9.2f\n", "F1",
                100 * muc.f1, 100 * b3.f1, 100 * ceaf.f1, 100 * avg_f1);
  out += buf;
  std::snprintf(buf, sizeof buf, "mentions P %.2f R %.2f F1 %.2f (%d documents)\n",
                100 * mentions.precision, 100 * mentions.recall,
                100 * mentions.f1, documents);
  out += buf;
  return out;
}

Clustering drop_singletons(const Clustering& clusters) {
  Clustering out;
  for (const Cluster& c : clusters) {
    if (c.size() >= 2) out.push_back(c);
  }
  return out;
}

}  // namespace ocoref
