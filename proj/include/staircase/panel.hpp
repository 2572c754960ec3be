#pragma once

#include "staircase/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace staircase {

/// A labelled panel: N unit ids, T ordered time labels, the N x T outcome
/// matrix, and optional per-unit weights (populations, say).
struct PanelData {
  std::vector<std::string> units;
  std::vector<std::string> times;
  Matrix Y;
  std::optional<Vector> weights;

  Index n_units() const { return Y.rows(); }
  Index n_times() const { return Y.cols(); }
};

}  // namespace staircase
