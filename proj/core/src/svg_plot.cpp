#include "ctedd/svg_plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "ctedd/checkpoint.hpp"

namespace ctedd {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, bool allow_nan) {
  if (allow_nan && (s == "nan" || s == "NaN")) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
  return v;
}

std::uint64_t parse_count(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument(s);
  return v;
}

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

// Round tick spacing covering [lo, hi] in roughly `target` steps.
double nice_step(double span, int target) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  const double nice = r < 1.5 ? 1.0 : r < 3.0 ? 2.0 : r < 7.0 ? 5.0 : 10.0;
  return nice * mag;
}

std::string tick_label(double v) {
  if (std::fabs(v) >= 1e4) return fmt("%.3g", v);
  return fmt("%g", std::fabs(v) < 1e-12 ? 0.0 : v);
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string format_metrics_row(const MetricsRow& r) {
  char buf[256];
  const std::string ci = std::isnan(r.ci95) ? std::string("nan") : fmt("%.17g", r.ci95);
  std::snprintf(buf, sizeof(buf), "%llu,%llu,%s,%.17g,%s,%.3f", static_cast<unsigned long long>(r.env_steps),
                static_cast<unsigned long long>(r.episodes), r.variant.c_str(), r.mean_return, ci.c_str(),
                r.wallclock_s);
  return buf;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << kMetricsHeader << "\n";
  for (const auto& r : rows) out << format_metrics_row(r) << "\n";
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<MetricsRow> rows;
  auto fail = [&](const std::string& why) {
    throw InputError(source + ":" + std::to_string(line_no) + ": " + why);
  };
  if (!std::getline(in, line)) {
    line_no = 1;
    fail("empty file");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) fail("unexpected header '" + line + "'");
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 6) fail("expected 6 columns, found " + std::to_string(cells.size()));
    MetricsRow r;
    try {
      r.env_steps = parse_count(cells[0]);
      r.episodes = parse_count(cells[1]);
      r.variant = cells[2];
      r.mean_return = parse_real(cells[3], false);
      r.ci95 = parse_real(cells[4], true);
      r.wallclock_s = parse_real(cells[5], false);
    } catch (const std::invalid_argument& e) {
      fail(std::string("bad value '") + e.what() + "'");
    }
    if (r.variant.empty()) fail("empty variant");
    if (!rows.empty() && r.env_steps <= rows.back().env_steps) fail("env_steps must increase");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_svg(std::span<const PlotSeries> series, const PlotOptions& opt) {
  const double left = 80, right = 190, top = 40, bottom = 60;
  const double pw = opt.width - left - right;
  const double ph = opt.height - top - bottom;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (const auto& r : s.rows) {
      const double x = static_cast<double>(r.env_steps);
      const double band = std::isnan(r.ci95) ? 0.0 : r.ci95;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, r.mean_return - band);
      ymax = std::max(ymax, r.mean_return + band);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  }
  if (xmax - xmin < 1e-9) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin < 1e-9) ymin -= 0.5, ymax += 0.5;
  const double ystep = nice_step(ymax - ymin, 5);
  ymin = std::floor(ymin / ystep) * ystep;
  ymax = std::ceil(ymax / ystep) * ystep;
  const double xstep = nice_step(xmax - xmin, 5);

  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };
  auto pt = [](double x, double y) { return fmt("%.2f", x) + "," + fmt("%.2f", y); };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
    << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt("%.2f", left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << xml_escape(opt.title) << "</text>\n";

  o << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  for (double y = ymin; y <= ymax + ystep * 1e-6; y += ystep) {
    o << "<line x1=\"" << fmt("%.2f", left) << "\" y1=\"" << fmt("%.2f", py(y)) << "\" x2=\""
      << fmt("%.2f", left + pw) << "\" y2=\"" << fmt("%.2f", py(y)) << "\"/>\n";
  }
  o << "</g>\n";
  o << "<g fill=\"#333333\">\n";
  for (double y = ymin; y <= ymax + ystep * 1e-6; y += ystep) {
    o << "<text x=\"" << fmt("%.2f", left - 6) << "\" y=\"" << fmt("%.2f", py(y) + 4) << "\" text-anchor=\"end\">"
      << tick_label(y) << "</text>\n";
  }
  for (double x = std::ceil(xmin / xstep) * xstep; x <= xmax + xstep * 1e-6; x += xstep) {
    o << "<text x=\"" << fmt("%.2f", px(x)) << "\" y=\"" << fmt("%.2f", top + ph + 18)
      << "\" text-anchor=\"middle\">" << tick_label(x) << "</text>\n";
  }
  o << "<text x=\"" << fmt("%.2f", left + pw / 2) << "\" y=\"" << fmt("%.2f", top + ph + 42)
    << "\" text-anchor=\"middle\">env_steps</text>\n";
  o << "<text transform=\"translate(20," << fmt("%.2f", top + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">mean_return</text>\n";
  o << "</g>\n";
  o << "<rect x=\"" << fmt("%.2f", left) << "\" y=\"" << fmt("%.2f", top) << "\" width=\"" << fmt("%.2f", pw)
    << "\" height=\"" << fmt("%.2f", ph) << "\" fill=\"none\" stroke=\"#333333\"/>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string upper, lower, line;
    bool any_band = false;
    for (const auto& r : s.rows) {
      const double x = px(static_cast<double>(r.env_steps));
      const double band = std::isnan(r.ci95) ? 0.0 : r.ci95;
      any_band = any_band || band > 0.0;
      upper += pt(x, py(r.mean_return + band)) + " ";
      line += pt(x, py(r.mean_return)) + " ";
    }
    for (auto it = s.rows.rbegin(); it != s.rows.rend(); ++it) {
      const double band = std::isnan(it->ci95) ? 0.0 : it->ci95;
      lower += pt(px(static_cast<double>(it->env_steps)), py(it->mean_return - band)) + " ";
    }
    if (!line.empty()) line.pop_back();
    if (any_band && s.rows.size() > 1) {
      o << "<polygon points=\"" << upper << lower.substr(0, lower.size() - 1) << "\" fill=\"" << color
        << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    }
    o << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    for (const auto& r : s.rows) {
      o << "<circle cx=\"" << fmt("%.2f", px(static_cast<double>(r.env_steps))) << "\" cy=\""
        << fmt("%.2f", py(r.mean_return)) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
  }

  o << "<g class=\"legend\">\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double ly = top + 14 + 20.0 * static_cast<double>(k);
    const double lx = left + pw + 16;
    o << "<line x1=\"" << fmt("%.2f", lx) << "\" y1=\"" << fmt("%.2f", ly) << "\" x2=\"" << fmt("%.2f", lx + 22)
      << "\" y2=\"" << fmt("%.2f", ly) << "\" stroke=\"" << kPalette[k % std::size(kPalette)]
      << "\" stroke-width=\"3\"/>\n";
    o << "<text x=\"" << fmt("%.2f", lx + 28) << "\" y=\"" << fmt("%.2f", ly + 4) << "\">"
      << xml_escape(series[k].label) << "</text>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

}  // namespace ctedd
