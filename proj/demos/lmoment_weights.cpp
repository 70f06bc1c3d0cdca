// Prints the spacing weights K_r(i/n) behind the sample L-moments of a small
// sample, and checks that -sum K_r(i/n) (x_(i+1) - x_(i)) reproduces l_r.

#include "lmdiv/lmdiv.hpp"

#include <cstdio>

int main() {
  const lmdiv::SortedSample x({0.3, 1.1, 1.7, 2.0, 4.2, 9.5});
  const auto basis = lmdiv::PolyBasis::range(2, 4);
  const auto n = x.n();

  std::printf("%-4s %-8s", "i", "gap");
  for (const auto& lab : basis.labels()) std::printf(" %-12s", lab.c_str());
  std::printf("\n");

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 1; i < n; ++i) {
    const double gap = x.spacings()[i - 1];
    const Eigen::VectorXd k = basis(static_cast<double>(i) / static_cast<double>(n));
    acc -= k * gap;
    std::printf("%-4zu %-8.4g", i, gap);
    for (Eigen::Index r = 0; r < k.size(); ++r) std::printf(" %-12.6g", k[r]);
    std::printf("\n");
  }

  const auto l = lmdiv::sample_lmoments_v(x, 4);
  std::printf("\n%-4s %-14s %-14s\n", "r", "-sum K gap", "l_r");
  for (int r = 2; r <= 4; ++r) std::printf("%-4d %-14.10g %-14.10g\n", r, acc[r - 2], l(r));
  return 0;
}
