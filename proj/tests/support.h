#ifndef OCOREF_TESTS_SUPPORT_H_
#define OCOREF_TESTS_SUPPORT_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ocoref/autodiff.h"
#include "ocoref/ingest.h"
#include "ocoref/metrics.h"
#include "ocoref/model.h"
#include "ocoref/online.h"

namespace ocoref::testing {

// Exact fraction with a positive denominator.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t num, std::int64_t den);
  Rational operator+(const Rational& o) const;
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  bool operator<(const Rational& o) const;
  double value() const { return static_cast<double>(num) / den; }
};

Rational phi4_exact(const Cluster& k, const Cluster& r);

// Maximum of sum phi4 over every one-to-one alignment (all permutations).
Rational ceaf_brute_force(const Clustering& gold, const Clustering& pred);

// Exact total of the alignment chosen by max_assignment.
Rational ceaf_solver_total(const Clustering& gold, const Clustering& pred);

// Disjoint clusters over mentions drawn from a small pool of addresses.
Clustering random_clustering(std::mt19937_64& rng, int max_clusters,
                             int max_size, int address_pool);

MentionAddress mention(int u, int s, int e);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const;

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

// Runs the CLI with the given arguments (argv[0] is added).
struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};
CliRun run(const std::vector<std::string>& args, const std::string& input = "");

// Small model for fast tests.
ModelConfig tiny_config(Variant variant, int dim = 8);

// Full training objective alpha_c L_c + alpha_m L_m + alpha_s L_s of turn
// `turn` over a fixed candidate set: the window's gold mentions plus extra
// spans of assorted widths. No pruning, no sampling, so the loss is a smooth
// function of the parameters.
std::function<Var(Tape&)> composite_loss(const CorefModel& model,
                                         const Dialogue& dialogue, int turn,
                                         std::uint64_t seed);

// Random stub for online decoding. Candidates, mention scores and pair
// scores are drawn from a generator seeded by (seed, turn), so re-decoding a
// prefix sees the same draws. Records every pool it returns.
class RandomScorer : public TurnScorer {
 public:
  explicit RandomScorer(std::uint64_t seed, int max_antecedents = 5)
      : seed_(seed), max_antecedents_(max_antecedents) {}
  TurnScores score_turn(const TurnContext& context,
                        std::vector<PoolEntry> carried) override;

  std::vector<TurnScores> history;
  std::vector<TurnContext> contexts;
  std::vector<std::vector<PoolEntry>> received;

 private:
  std::uint64_t seed_;
  int max_antecedents_;
};

// Random dialogue without gold clusters.
std::vector<Utterance> random_utterances(std::mt19937_64& rng, int turns,
                                         int speakers, int max_length);

}  // namespace ocoref::testing

#endif  // OCOREF_TESTS_SUPPORT_H_
