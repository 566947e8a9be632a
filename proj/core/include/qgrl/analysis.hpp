// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qgrl {

struct RatingScale {
  double low;
  double high;
};

inline constexpr RatingScale kFluencyScale{1, 5};
inline constexpr RatingScale kRelevanceScale{1, 3};
inline constexpr RatingScale kAnswerabilityScale{0, 1};
inline constexpr RatingScale kComplexityScale{1, 3};

/// Rater-averaged ratings of one question. Sub-ratings are absent for
/// questions the raters found unreadable.
struct HumanRating {
  std::optional<double> fluency;
  std::optional<double> relevance;
  std::optional<double> answerability;
  std::optional<double> complexity;
  double raters = 0.0;
};

using HumanRatings = std::map<std::string, HumanRating>;

/// Reads `id,fluency,relevance,answerability,complexity,raters`. Each row
/// counts with weight `raters` (1 when empty) and rows sharing an id are
/// averaged field by field. Values outside their scale, a missing fluency,
/// or a malformed number fail with the 1-based row number.
HumanRatings read_human_ratings(std::istream& in);
HumanRatings load_human_ratings(const std::string& path);

/// Nearest level with halves rounded up, clamped to the scale.
int rating_level(double rating, RatingScale scale);

struct RatingBucket {
  int level = 0;
  std::size_t count = 0;
  std::optional<double> min;
  std::optional<double> median;
  std::optional<double> max;
  std::vector<double> scores;  // sorted
};

struct RatingLevelSummary {
  std::vector<RatingBucket> buckets;  // one per scale level, ascending
};

/// Buckets reward scores by the rating level of the same id; ids missing
/// from either side are ignored.
RatingLevelSummary reward_rating_distribution(const std::map<std::string, double>& rewards,
                                              const std::map<std::string, double>& ratings,
                                              RatingScale scale);

/// Even counts take the mean of the two central values.
double median_of_sorted(const std::vector<double>& sorted);

/// Pearson r over the pairwise-complete observations; nullopt with fewer
/// than two of them or zero variance on either side.
std::optional<double> pearson(const std::vector<std::optional<double>>& x,
                              const std::vector<std::optional<double>>& y);

struct NamedSeries {
  std::string name;
  std::vector<std::optional<double>> values;
};

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<std::optional<double>>> r;
};

CorrelationMatrix pearson_matrix(const std::vector<NamedSeries>& columns);

void write_rating_distribution(const RatingLevelSummary& summary, const std::string& reward,
                               const std::string& rating, const std::string& path);
void write_correlation(const CorrelationMatrix& m, const std::string& path);

}  // namespace qgrl
