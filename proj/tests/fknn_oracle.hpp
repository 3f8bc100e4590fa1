#pragma once

// Brute-force fuzzy k-NN membership in long double: full sort of every
// labeled point, weights taken from plain distances.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

inline double fknn_oracle(const Eigen::VectorXd& y, const Eigen::MatrixXd& pts,
                          const std::vector<double>& u, std::size_t k, double fuzzifier) {
  const std::size_t n = static_cast<std::size_t>(pts.cols());
  struct Item {
    long double dist;
    std::size_t index;
  };
  std::vector<Item> items;
  for (std::size_t j = 0; j < n; ++j) {
    long double s = 0;
    for (Eigen::Index r = 0; r < y.size(); ++r) {
      const long double d = static_cast<long double>(pts(r, static_cast<Eigen::Index>(j))) -
                            static_cast<long double>(y(r));
      s += d * d;
    }
    items.push_back({std::sqrt(s), j});
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const Item& a, const Item& b) { return a.dist < b.dist; });
  items.resize(k);
  long double zero_sum = 0;
  int zeros = 0;
  for (const auto& it : items)
    if (it.dist == 0) {
      zero_sum += u[it.index];
      ++zeros;
    }
  if (zeros) return static_cast<double>(zero_sum / zeros);
  long double num = 0, den = 0;
  for (const auto& it : items) {
    const long double w = std::pow(it.dist, -2.0L / (static_cast<long double>(fuzzifier) - 1));
    num += u[it.index] * w;
    den += w;
  }
  return static_cast<double>(num / den);
}
