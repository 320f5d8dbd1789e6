#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace pml::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  /// Polyline when true, markers otherwise.
  bool line = true;
};

struct Frame {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  /// Small print under the axes; carries the provenance hashes.
  std::string footer;
  bool equal_aspect = false;
  bool log_y = false;
};

/// Sturges: ceil(log2 n) + 1 bins.
int sturges_bins(std::size_t n);

std::string histogram(const std::vector<double>& values, const Frame& frame);
std::string plot(const std::vector<Series>& series, const Frame& frame);

}  // namespace pml::svg
