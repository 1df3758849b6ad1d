#pragma once

#include <iosfwd>
#include <string>

#include "mug/stats.hpp"

namespace mug::stats {

struct DiagramStyle {
  double width = 720.0;
  double row_height = 22.0;
  double margin = 120.0;
  std::string title;
};

/// Critical-difference diagram: a rank axis from K (left) to 1 (right), a CD
/// bracket above it, each method hanging on a leader line to a label (better
/// half on the right), and a thick bar under the axis for every group.
void write_cd_diagram(std::ostream& out, const CDResult& r, const DiagramStyle& style = {});

}  // namespace mug::stats
