#include "bnnswarm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bnnswarm/errors.hpp"

namespace bnnswarm::stats {

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("experiment_cli", "correlation inputs differ in length");
  if (a.size() < 2) throw ArgumentError("experiment_cli", "correlation needs at least two values");
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw ArgumentError("experiment_cli", "correlation undefined for a constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("experiment_cli", "correlation inputs differ in length");
  const auto ra = midranks(a);
  const auto rb = midranks(b);
  return pearson(ra, rb);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("experiment_cli", "median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double iou(std::span<const double> predicted, std::span<const double> truth, std::span<const double> mask) {
  if (predicted.size() != truth.size() || (!mask.empty() && mask.size() != truth.size()))
    throw ArgumentError("experiment_cli", "IoU inputs differ in length");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!mask.empty() && mask[i] == 0.0) continue;
    const bool p = predicted[i] != 0.0;
    const bool t = truth[i] != 0.0;
    inter += p && t;
    uni += p || t;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace bnnswarm::stats
