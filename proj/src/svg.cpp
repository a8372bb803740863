#include "kmor/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "kmor/csv.hpp"
#include "kmor/errors.hpp"

namespace kmor {

namespace {

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
    } else {
      const double m = 0.05 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Round tick positions: ~6 ticks at a 1/2/5 step.
std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  if (!(span > 0.0)) return {lo};
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= f * mag) {
      step = f * mag;
      break;
    }
  }
  std::vector<double> ticks;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) {
    ticks.push_back(v);
  }
  return ticks;
}

}  // namespace

void write_svg_plot(const std::string& path,
                    const std::vector<SvgSeries>& series,
                    const SvgPlotOptions& opts) {
  const double W = opts.width_px, H = opts.height_px;
  const double ml = 70, mr = 20, mt = opts.title.empty() ? 16 : 34, mb = 46;
  const double pw = W - ml - mr, ph = H - mt - mb;

  Range rx, ry;
  for (const auto& s : series) {
    for (Eigen::Index i = 0; i < s.x.size(); ++i) {
      const double yv = s.y(i);
      if (opts.log_y && !(yv > 0.0)) continue;
      rx.add(s.x(i));
      ry.add(opts.log_y ? std::log10(yv) : yv);
    }
  }
  if (!std::isfinite(rx.lo) || !std::isfinite(ry.lo)) {
    rx = Range{0.0, 1.0};
    ry = Range{0.0, 1.0};
  }
  rx.pad();
  ry.pad();

  auto X = [&](double v) { return ml + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto Y = [&](double v) {
    const double t = opts.log_y ? std::log10(v) : v;
    return mt + ph - (t - ry.lo) / (ry.hi - ry.lo) * ph;
  };

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open file for writing: " + path);
  out << "<?xml version='1.0' encoding='UTF-8'?>\n"
      << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W
      << "' height='" << H << "' viewBox='0 0 " << W << " " << H << "'>\n"
      << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  if (!opts.title.empty()) {
    out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' "
        << "font-family='sans-serif' font-size='15'>" << opts.title
        << "</text>\n";
  }

  // axes box
  out << "<rect x='" << ml << "' y='" << mt << "' width='" << pw
      << "' height='" << ph << "' fill='none' stroke='#444' stroke-width='1'/>\n";

  for (double tx : linear_ticks(rx.lo, rx.hi)) {
    const double px = X(tx);
    out << "<line x1='" << px << "' y1='" << mt << "' x2='" << px << "' y2='"
        << mt + ph << "' stroke='#e0e0e0' stroke-width='0.7'/>\n"
        << "<text x='" << px << "' y='" << mt + ph + 16
        << "' text-anchor='middle' font-family='sans-serif' font-size='11'>"
        << fmt(tx) << "</text>\n";
  }
  if (opts.log_y) {
    const int klo = static_cast<int>(std::ceil(ry.lo));
    const int khi = static_cast<int>(std::floor(ry.hi));
    for (int k = klo; k <= khi; ++k) {
      const double py = mt + ph - (k - ry.lo) / (ry.hi - ry.lo) * ph;
      out << "<line x1='" << ml << "' y1='" << py << "' x2='" << ml + pw
          << "' y2='" << py << "' stroke='#e0e0e0' stroke-width='0.7'/>\n"
          << "<text x='" << ml - 6 << "' y='" << py + 4
          << "' text-anchor='end' font-family='sans-serif' font-size='11'>1e"
          << k << "</text>\n";
    }
  } else {
    for (double ty : linear_ticks(ry.lo, ry.hi)) {
      const double py = Y(ty);
      out << "<line x1='" << ml << "' y1='" << py << "' x2='" << ml + pw
          << "' y2='" << py << "' stroke='#e0e0e0' stroke-width='0.7'/>\n"
          << "<text x='" << ml - 6 << "' y='" << py + 4
          << "' text-anchor='end' font-family='sans-serif' font-size='11'>"
          << fmt(ty) << "</text>\n";
    }
  }

  if (!opts.x_label.empty()) {
    out << "<text x='" << ml + pw / 2 << "' y='" << H - 8
        << "' text-anchor='middle' font-family='sans-serif' font-size='12'>"
        << opts.x_label << "</text>\n";
  }
  if (!opts.y_label.empty()) {
    out << "<text x='16' y='" << mt + ph / 2
        << "' text-anchor='middle' font-family='sans-serif' font-size='12' "
        << "transform='rotate(-90 16 " << mt + ph / 2 << ")'>" << opts.y_label
        << "</text>\n";
  }

  double ly = mt + 14;
  for (const auto& s : series) {
    std::ostringstream pts;
    bool pen_up = true;
    for (Eigen::Index i = 0; i < s.x.size(); ++i) {
      if (opts.log_y && !(s.y(i) > 0.0)) {
        pen_up = true;
        continue;
      }
      pts << (pen_up ? 'M' : 'L') << X(s.x(i)) << ' ' << Y(s.y(i)) << ' ';
      pen_up = false;
    }
    if (s.x.size() > 1) {
      out << "<path d='" << pts.str() << "' fill='none' stroke='" << s.color
          << "' stroke-width='" << s.width << "'/>\n";
    }
    if (s.markers || s.x.size() == 1) {
      for (Eigen::Index i = 0; i < s.x.size(); ++i) {
        if (opts.log_y && !(s.y(i) > 0.0)) continue;
        out << "<circle cx='" << X(s.x(i)) << "' cy='" << Y(s.y(i))
            << "' r='3' fill='" << s.color << "'/>\n";
      }
    }
    if (!s.label.empty()) {
      out << "<line x1='" << ml + pw - 130 << "' y1='" << ly << "' x2='"
          << ml + pw - 110 << "' y2='" << ly << "' stroke='" << s.color
          << "' stroke-width='2'/>\n<text x='" << ml + pw - 104 << "' y='"
          << ly + 4 << "' font-family='sans-serif' font-size='12'>" << s.label
          << "</text>\n";
      ly += 16;
    }
  }
  out << "</svg>\n";
}

}  // namespace kmor
