#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace pml::svg {
namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 78, kRight = 24, kTop = 40, kBottom = 78;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

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

std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  return out;
}

struct Axes {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void open(std::ostringstream& os, const Frame& f) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(f.title)
     << "</text>\n";
}

void close(std::ostringstream& os, const Frame& f) {
  os << "<text x=\"8\" y=\"" << kHeight - 8 << "\" font-size=\"9\" fill=\"#555\">" << escape(f.footer) << "</text>\n";
  os << "</svg>\n";
}

void draw_axes(std::ostringstream& os, const Axes& a, const Frame& f, bool log_y) {
  const double bx = kLeft, by = kHeight - kBottom;
  os << "<g stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << bx << "\" y1=\"" << by << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << by << "\"/>\n";
  os << "<line x1=\"" << bx << "\" y1=\"" << by << "\" x2=\"" << bx << "\" y2=\"" << kTop << "\"/>\n";
  os << "</g>\n<g font-size=\"11\">\n";
  for (double t : ticks(a.x0, a.x1)) {
    const double x = a.px(t);
    os << "<line x1=\"" << x << "\" y1=\"" << by << "\" x2=\"" << x << "\" y2=\"" << by + 5 << "\" stroke=\"black\"/>";
    os << "<text x=\"" << x << "\" y=\"" << by + 18 << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  for (double t : ticks(a.y0, a.y1)) {
    const double y = a.py(t);
    os << "<line x1=\"" << bx - 5 << "\" y1=\"" << y << "\" x2=\"" << bx << "\" y2=\"" << y << "\" stroke=\"black\"/>";
    os << "<text x=\"" << bx - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
       << (log_y ? "1e" + num(t) : num(t)) << "</text>\n";
  }
  os << "</g>\n";
  os << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << by + 40
     << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(f.xlabel) << "</text>\n";
  os << "<text transform=\"translate(18," << (kTop + by) / 2 << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">"
     << escape(log_y ? "log10 " + f.ylabel : f.ylabel) << "</text>\n";
}

void no_data(std::ostringstream& os) {
  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" font-size=\"18\" fill=\"#888\">no data</text>\n";
}

void pad(double& lo, double& hi) {
  if (!(hi > lo)) {
    const double w = std::max(1.0, std::abs(lo)) * 0.5;
    lo -= w;
    hi += w;
  }
}

}  // namespace

int sturges_bins(std::size_t n) {
  if (n == 0) return 0;
  return static_cast<int>(std::ceil(std::log2(static_cast<double>(n)))) + 1;
}

std::string histogram(const std::vector<double>& values, const Frame& frame) {
  std::ostringstream os;
  open(os, frame);
  std::vector<double> v;
  for (double x : values)
    if (std::isfinite(x)) v.push_back(x);
  if (v.empty()) {
    no_data(os);
    close(os, frame);
    return os.str();
  }
  const int bins = sturges_bins(v.size());
  auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  double lo = *mn, hi = *mx;
  pad(lo, hi);
  std::vector<int> counts(bins, 0);
  for (double x : v) counts[std::min(bins - 1, static_cast<int>((x - lo) / (hi - lo) * bins))]++;
  const int top = *std::max_element(counts.begin(), counts.end());
  const Axes a{lo, hi, 0.0, top * 1.1};
  Frame f = frame;
  if (f.ylabel.empty()) f.ylabel = "count";
  draw_axes(os, a, f, false);
  os << "<g fill=\"" << kPalette[0] << "\" stroke=\"white\">\n";
  for (int b = 0; b < bins; ++b) {
    const double x0 = a.px(lo + (hi - lo) * b / bins), x1 = a.px(lo + (hi - lo) * (b + 1) / bins);
    const double y = a.py(counts[b]);
    os << "<rect x=\"" << x0 << "\" y=\"" << y << "\" width=\"" << x1 - x0 << "\" height=\"" << a.py(0) - y << "\"/>\n";
  }
  os << "</g>\n";
  os << "<text x=\"" << kWidth - kRight << "\" y=\"" << kTop + 4 << "\" text-anchor=\"end\" font-size=\"11\">n = "
     << v.size() << ", " << bins << " bins</text>\n";
  close(os, frame);
  return os.str();
}

std::string plot(const std::vector<Series>& series, const Frame& frame) {
  std::ostringstream os;
  open(os, frame);
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto yv = [&](double y) { return frame.log_y ? std::log10(y) : y; };
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = yv(s.y[i]);
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (!std::isfinite(x0)) {
    no_data(os);
    close(os, frame);
    return os.str();
  }
  pad(x0, x1);
  pad(y0, y1);
  const double mx = 0.04 * (x1 - x0), my = 0.04 * (y1 - y0);
  x0 -= mx;
  x1 += mx;
  y0 -= my;
  y1 += my;
  if (frame.equal_aspect) {
    // Same data units per pixel on both axes.
    const double sx = (x1 - x0) / (kWidth - kLeft - kRight), sy = (y1 - y0) / (kHeight - kTop - kBottom);
    const double s = std::max(sx, sy);
    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    x0 = cx - 0.5 * s * (kWidth - kLeft - kRight);
    x1 = cx + 0.5 * s * (kWidth - kLeft - kRight);
    y0 = cy - 0.5 * s * (kHeight - kTop - kBottom);
    y1 = cy + 0.5 * s * (kHeight - kTop - kBottom);
  }
  const Axes a{x0, x1, y0, y1};
  draw_axes(os, a, frame, frame.log_y);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % 6];
    if (s.line) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double y = yv(s.y[i]);
        if (std::isfinite(y)) os << num(a.px(s.x[i])) << "," << num(a.py(y)) << " ";
      }
      os << "\"/>\n";
    } else {
      os << "<g fill=\"" << color << "\">\n";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double y = yv(s.y[i]);
        if (std::isfinite(y)) os << "<circle cx=\"" << num(a.px(s.x[i])) << "\" cy=\"" << num(a.py(y)) << "\" r=\"2.2\"/>";
      }
      os << "\n</g>\n";
    }
    if (!s.label.empty()) {
      const double ly = kTop + 14 + 15 * k;
      os << "<rect x=\"" << kWidth - kRight - 150 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << color
         << "\"/><text x=\"" << kWidth - kRight - 135 << "\" y=\"" << ly + 1 << "\" font-size=\"11\">" << escape(s.label)
         << "</text>\n";
    }
  }
  close(os, frame);
  return os.str();
}

}  // namespace pml::svg
