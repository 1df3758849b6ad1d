#include "mug/cd_diagram.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "mug/error.hpp"

namespace mug::stats {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string line(double x1, double y1, double x2, double y2, double width) {
  return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
         "\" stroke=\"black\" stroke-width=\"" + num(width) + "\"/>\n";
}

std::string text(double x, double y, const std::string& body, const char* anchor, int size = 12) {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\" font-size=\"" +
         std::to_string(size) + "\">" + xml_escape(body) + "</text>\n";
}

}  // namespace

void write_cd_diagram(std::ostream& out, const CDResult& r, const DiagramStyle& style) {
  const auto k = r.methods.size();
  if (k < 2 || r.mean_ranks.size() != k) throw ContractError("CD diagram needs at least two ranked methods");
  const double left = style.margin;
  const double right = style.width - style.margin;
  const double kd = static_cast<double>(k);
  auto x_of = [&](double rank) { return left + (kd - rank) / (kd - 1.0) * (right - left); };

  const double title_h = style.title.empty() ? 0.0 : 24.0;
  const double cd_y = title_h + 20.0;
  const double axis_y = cd_y + 30.0;
  const double bar_top = axis_y + 10.0;
  const double bar_gap = 7.0;
  const double labels_top = bar_top + bar_gap * static_cast<double>(r.groups.size()) + 14.0;

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return r.mean_ranks[a] < r.mean_ranks[b]; });
  const std::size_t right_count = (k + 1) / 2;
  const double height = labels_top + style.row_height * static_cast<double>(std::max(right_count, k - right_count)) + 20.0;

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(style.width) << "\" height=\"" << num(height)
      << "\" viewBox=\"0 0 " << num(style.width) << ' ' << num(height) << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!style.title.empty()) out << text(style.width / 2.0, 18.0, style.title, "middle", 14);

  // CD bracket anchored at the worst rank.
  const double cd_end = x_of(std::max(1.0, kd - r.critical_difference));
  out << "<g id=\"critical-difference\">\n";
  out << line(x_of(kd), cd_y, cd_end, cd_y, 1.5);
  out << line(x_of(kd), cd_y - 4.0, x_of(kd), cd_y + 4.0, 1.0);
  out << line(cd_end, cd_y - 4.0, cd_end, cd_y + 4.0, 1.0);
  char cd_label[32];
  std::snprintf(cd_label, sizeof cd_label, "CD=%.4f", r.critical_difference);
  out << text((x_of(kd) + cd_end) / 2.0, cd_y - 6.0, cd_label, "middle");
  out << "</g>\n";

  out << "<g id=\"rank-axis\">\n" << line(left, axis_y, right, axis_y, 1.5);
  for (std::size_t t = 1; t <= k; ++t) {
    const double x = x_of(static_cast<double>(t));
    out << line(x, axis_y - 6.0, x, axis_y, 1.0);
    out << text(x, axis_y - 9.0, std::to_string(t), "middle", 11);
  }
  out << "</g>\n";

  out << "<g id=\"groups\">\n";
  for (std::size_t g = 0; g < r.groups.size(); ++g) {
    const auto& members = r.groups[g];
    if (members.size() < 2) continue;
    double lo = r.mean_ranks[members.front()], hi = lo;
    for (auto i : members) {
      lo = std::min(lo, r.mean_ranks[i]);
      hi = std::max(hi, r.mean_ranks[i]);
    }
    const double y = bar_top + bar_gap * static_cast<double>(g);
    out << line(x_of(hi) - 3.0, y, x_of(lo) + 3.0, y, 4.0);
  }
  out << "</g>\n";

  out << "<g id=\"methods\">\n";
  for (std::size_t pos = 0; pos < k; ++pos) {
    const auto i = order[pos];
    const double x = x_of(r.mean_ranks[i]);
    const bool on_right = pos < right_count;
    const std::size_t row = on_right ? pos : k - 1 - pos;
    const double y = labels_top + style.row_height * static_cast<double>(row);
    const double end_x = on_right ? right + 10.0 : left - 10.0;
    out << line(x, axis_y, x, y, 1.0);
    out << line(x, y, end_x, y, 1.0);
    const std::string label = r.methods[i] + " (" + num(r.mean_ranks[i]) + ")";
    out << text(on_right ? end_x + 4.0 : end_x - 4.0, y + 4.0, label, on_right ? "start" : "end");
  }
  out << "</g>\n</svg>\n";
}

}  // namespace mug::stats
