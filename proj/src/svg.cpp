#include "mwres/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mwres {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double transform(double v) const { return log ? std::log10(v) : v; }
};

Axis make_axis(const Plot& plot, bool is_x) {
  Axis a;
  a.log = is_x ? plot.logx : plot.logy;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : plot.series) {
    const auto& v = is_x ? s.x : s.y;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double vals[3] = {v[i], v[i], v[i]};
      if (!is_x && i < s.yerr.size()) {
        vals[1] = v[i] - s.yerr[i];
        vals[2] = v[i] + s.yerr[i];
      }
      for (double x : vals) {
        if (!std::isfinite(x) || (a.log && !(x > 0.0))) continue;
        lo = std::min(lo, a.transform(x));
        hi = std::max(hi, a.transform(x));
      }
    }
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  a.lo = lo - pad;
  a.hi = hi + pad;
  return a;
}

}  // namespace

std::string render_svg(const Plot& plot) {
  const Axis ax = make_axis(plot, true);
  const Axis ay = make_axis(plot, false);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (ax.transform(x) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (ay.transform(y) - ay.lo) / (ay.hi - ay.lo) * ph; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!ax.log || x > 0.0) && (!ay.log || y > 0.0);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(plot.title) << "</text>\n";
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  // ticks at five evenly spaced positions in transformed coordinates
  for (int i = 0; i <= 4; ++i) {
    const double tx = ax.lo + (ax.hi - ax.lo) * i / 4.0;
    const double ty = ay.lo + (ay.hi - ay.lo) * i / 4.0;
    const double xv = ax.log ? std::pow(10.0, tx) : tx;
    const double yv = ay.log ? std::pow(10.0, ty) : ty;
    const double sx = kLeft + pw * i / 4.0;
    const double sy = kTop + ph - ph * i / 4.0;
    os << "<line x1=\"" << sx << "\" y1=\"" << kTop + ph << "\" x2=\"" << sx << "\" y2=\""
       << kTop + ph + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << sx << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
       << num(xv) << "</text>\n";
    os << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << sy << "\" x2=\"" << kLeft << "\" y2=\"" << sy
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">" << num(yv)
       << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15
     << "\" text-anchor=\"middle\">" << escape(plot.xlabel) << "</text>\n";
  os << "<text transform=\"translate(16," << kTop + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << escape(plot.ylabel) << "</text>\n";

  double legend_y = kTop + 14;
  for (const auto& s : plot.series) {
    if (s.line || s.step) {
      os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" points=\"";
      bool have_prev = false;
      double prev_y = 0.0;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!usable(s.x[i], s.y[i])) continue;
        if (s.step && have_prev) os << px(s.x[i]) << "," << prev_y << " ";
        prev_y = py(s.y[i]);
        os << px(s.x[i]) << "," << prev_y << " ";
        have_prev = true;
      }
      os << "\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      if (i < s.yerr.size() && s.yerr[i] > 0.0) {
        const double lo = s.y[i] - s.yerr[i];
        const double y_lo = usable(s.x[i], lo) ? py(lo) : kTop + ph;
        os << "<line x1=\"" << px(s.x[i]) << "\" y1=\"" << y_lo << "\" x2=\"" << px(s.x[i])
           << "\" y2=\"" << py(s.y[i] + s.yerr[i]) << "\" stroke=\"" << s.color << "\"/>\n";
      }
      if (s.markers)
        os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\""
           << s.color << "\"/>\n";
    }
    if (!s.label.empty()) {
      os << "<rect x=\"" << kLeft + pw - 150 << "\" y=\"" << legend_y - 9
         << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
      os << "<text x=\"" << kLeft + pw - 135 << "\" y=\"" << legend_y << "\">" << escape(s.label)
         << "</text>\n";
      legend_y += 16;
    }
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const std::string& path, const Plot& plot) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << render_svg(plot);
}

}  // namespace mwres
