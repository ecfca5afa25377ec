#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "amenpois/errors.hpp"
#include "amenpois/harness.hpp"

namespace amenpois {

namespace {

struct Series {
  std::string name;
  std::string color;
  std::vector<std::pair<double, double>> points;  // (n, value), value > 0
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(std::lround(v)));
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const nlohmann::json& result) {
  const auto rows = result.find("rows");
  if (rows == result.end() || !rows->is_array() || rows->empty()) throw DomainError("result has no rows to plot");

  Series tv{"tv", "#1f77b4", {}};
  Series bound{"bound", "#d62728", {}};
  constexpr double kFloor = 1e-12;
  for (const auto& r : *rows) {
    const double n = r.at("n").get<double>();
    tv.points.emplace_back(n, std::max(kFloor, r.at("tv").get<double>()));
    const auto b = r.find("bound");
    if (b != r.end() && b->is_object() && (*b)["total"].is_number())
      bound.points.emplace_back(n, std::max(kFloor, (*b)["total"].get<double>()));
  }
  std::vector<const Series*> series{&tv};
  if (!bound.points.empty()) series.push_back(&bound);

  double x_lo = tv.points.front().first, x_hi = x_lo, y_lo = 1e300, y_hi = -1e300;
  for (const auto* s : series)
    for (const auto& [x, y] : s->points) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, std::log10(y));
      y_hi = std::max(y_hi, std::log10(y));
    }
  y_lo = std::floor(y_lo);
  y_hi = std::max(std::ceil(y_hi), y_lo + 1.0);
  if (x_hi == x_lo) {
    x_lo -= 1.0;
    x_hi += 1.0;
  }

  const double width = 640, height = 420, left = 70, right = 130, top = 30, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return top + (y_hi - std::log10(y)) / (y_hi - y_lo) * ph; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::string title = result.value("scenario", std::string("result"));
  o << "<text x=\"" << left << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  o << "<g stroke=\"#999\" stroke-width=\"1\" fill=\"none\">\n"
    << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\"/>\n"
    << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n"
    << "</g>\n";
  o << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (double e = y_lo; e <= y_hi + 1e-9; e += 1.0) {
    const double y = py(std::pow(10.0, e));
    o << "<line x1=\"" << left - 4 << "\" y1=\"" << num(y) << "\" x2=\"" << left + pw << "\" y2=\"" << num(y)
      << "\" stroke=\"#eee\"/>\n"
      << "<text x=\"" << left - 8 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick_label(e)
      << "</text>\n";
  }
  for (const auto& [x, y] : tv.points)
    o << "<text x=\"" << num(px(x)) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << x << "</text>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">n</text>\n"
    << "</g>\n";

  double legend_y = top + 10;
  for (const auto* s : series) {
    o << "<polyline fill=\"none\" stroke=\"" << s->color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s->points.size(); ++i)
      o << (i ? " " : "") << num(px(s->points[i].first)) << ',' << num(py(s->points[i].second));
    o << "\"/>\n";
    for (const auto& [x, y] : s->points)
      o << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"3\" fill=\"" << s->color << "\"/>\n";
    o << "<text x=\"" << left + pw + 12 << "\" y=\"" << legend_y << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
      << s->color << "\">" << s->name << "</text>\n";
    legend_y += 18;
  }
  o << "</svg>\n";
  return o.str();
}

void write_plot(const std::string& result_path, const std::string& out_path) {
  std::ifstream in(result_path);
  if (!in) throw DomainError("cannot open result " + result_path);
  const nlohmann::json result = nlohmann::json::parse(in);
  const std::string svg = render_svg(result);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot write " + out_path);
  out << svg;
}

}  // namespace amenpois
