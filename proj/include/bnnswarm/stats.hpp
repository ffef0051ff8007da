#pragma once

#include <span>
#include <vector>

namespace bnnswarm::stats {

// 1-based ranks with ties sharing their mean rank.
std::vector<double> midranks(std::span<const double> values);

double pearson(std::span<const double> a, std::span<const double> b);

// Spearman rank correlation (Pearson on midranks). Throws ArgumentError
// when either input is constant or the lengths differ.
double spearman(std::span<const double> a, std::span<const double> b);

double median(std::vector<double> values);

// Intersection over union of two binary masks (nonzero = set).
double iou(std::span<const double> predicted, std::span<const double> truth, std::span<const double> mask = {});

}  // namespace bnnswarm::stats
