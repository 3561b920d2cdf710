#ifndef OCOREF_METRICS_H_
#define OCOREF_METRICS_H_

#include <span>
#include <string>
#include <vector>

#include "ocoref/ingest.h"

namespace ocoref {

using Clustering = std::vector<Cluster>;

// Numerators and denominators of one metric. Summing counts over documents
// gives the corpus-level (micro) score.
struct MetricCounts {
  double p_num = 0.0;
  double p_den = 0.0;
  double r_num = 0.0;
  double r_den = 0.0;

  MetricCounts& operator+=(const MetricCounts& o);
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Ratios are 0 when their denominator is 0; F1 is 0 when P + R is 0.
Prf to_prf(const MetricCounts& c);
Prf make_prf(double precision, double recall);

MetricCounts muc_counts(const Clustering& gold, const Clustering& pred);
MetricCounts b3_counts(const Clustering& gold, const Clustering& pred);
MetricCounts ceaf_counts(const Clustering& gold, const Clustering& pred);
MetricCounts mention_counts(const Clustering& gold, const Clustering& pred);

Prf muc(const Clustering& gold, const Clustering& pred);
Prf b3(const Clustering& gold, const Clustering& pred);
Prf ceaf_phi4(const Clustering& gold, const Clustering& pred);
// Exact-span match over the mentions of both clusterings.
Prf mention_prf(const Clustering& gold, const Clustering& pred);

// phi4(K, R) = 2 |K n R| / (|K| + |R|)
double phi4(const Cluster& k, const Cluster& r);

// Maximum-weight assignment on a rows x cols similarity matrix (padded to
// square with zeros internally). Returns the column of each row, -1 when a
// row is matched to padding.
std::vector<int> max_assignment(const std::vector<std::vector<double>>& sim);

double avg_f1(double muc_f1, double b3_f1, double ceaf_f1);

struct ScoreReport {
  Prf muc;
  Prf b3;
  Prf ceaf;
  double avg_f1 = 0.0;
  Prf mentions;
  int documents = 0;

  std::string to_json() const;
  std::string to_table() const;
};

// Accumulates documents; every metric is micro-aggregated.
class Scorer {
 public:
  // Mention precision/recall uses `mention_gold` when given.
  void add(const Clustering& gold, const Clustering& pred,
           const Clustering* mention_gold = nullptr);
  ScoreReport report() const;

 private:
  MetricCounts muc_, b3_, ceaf_, mentions_;
  int documents_ = 0;
};

// Removes clusters with fewer than two mentions.
Clustering drop_singletons(const Clustering& clusters);

}  // namespace ocoref

#endif  // OCOREF_METRICS_H_
