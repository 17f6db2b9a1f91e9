#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "xlprime/error.hpp"
#include "xlprime/io.hpp"

namespace xlp::cli {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
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

struct Series {
  std::string name;
  std::string color;
  std::vector<double> y;
};

// Plot frame shared by both figures. Y range is [y0, y1]; x is the step.
class Canvas {
 public:
  Canvas(const std::vector<StepSummary>& steps, double y0, double y1) : steps_(steps), y0_(y0), y1_(y1) {
    x0_ = static_cast<double>(steps.front().step);
    x1_ = static_cast<double>(steps.back().step);
    if (x1_ == x0_) x1_ = x0_ + 1;
  }

  double px(double step) const { return kLeft + (step - x0_) / (x1_ - x0_) * (kWidth - kLeft - kRight); }
  double py(double v) const { return kHeight - kBottom - (v - y0_) / (y1_ - y0_) * (kHeight - kTop - kBottom); }

  std::string frame(const std::string& title, const std::string& ylabel) const {
    std::string s;
    s += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
         "</text>\n";
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kHeight - kBottom) + "\" x2=\"" + num(kWidth - kRight) +
         "\" y2=\"" + num(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double v = y0_ + (y1_ - y0_) * i / 4;
      s += "<line x1=\"" + num(kLeft - 4) + "\" y1=\"" + num(py(v)) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
           num(py(v)) + "\" stroke=\"black\"/>\n";
      s += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(py(v) + 4) + "\" text-anchor=\"end\" font-size=\"11\">" +
           label(v) + "</text>\n";
    }
    const std::size_t n = steps_.size();
    const std::size_t stride = n <= 6 ? 1 : (n + 5) / 6;
    for (std::size_t i = 0; i < n; i += stride) {
      const double x = px(static_cast<double>(steps_[i].step));
      s += "<line x1=\"" + num(x) + "\" y1=\"" + num(kHeight - kBottom) + "\" x2=\"" + num(x) + "\" y2=\"" +
           num(kHeight - kBottom + 4) + "\" stroke=\"black\"/>\n";
      s += "<text x=\"" + num(x) + "\" y=\"" + num(kHeight - kBottom + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + std::to_string(steps_[i].step) + "</text>\n";
    }
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 15) +
         "\" text-anchor=\"middle\" font-size=\"12\">training step</text>\n";
    s += "<text x=\"18\" y=\"" + num(kHeight / 2) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 18 " +
         num(kHeight / 2) + ")\">" + escape(ylabel) + "</text>\n";
    return s;
  }

  std::string vline(double step, const std::string& style) const {
    if (step < x0_ || step > x1_) return {};
    return "<line x1=\"" + num(px(step)) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(px(step)) + "\" y2=\"" +
           num(kHeight - kBottom) + "\" " + style + "/>\n";
  }

  std::string hline(double v, const std::string& style) const {
    return "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(py(v)) + "\" x2=\"" + num(kWidth - kRight) + "\" y2=\"" +
           num(py(v)) + "\" " + style + "/>\n";
  }

  std::string series(const Series& s, std::size_t legend_row) const {
    std::string out = "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      out += (i ? " " : "") + num(px(static_cast<double>(steps_[i].step))) + "," + num(py(s.y[i]));
    }
    out += "\"/>\n";
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      out += "<circle cx=\"" + num(px(static_cast<double>(steps_[i].step))) + "\" cy=\"" + num(py(s.y[i])) +
             "\" r=\"2.5\" fill=\"" + s.color + "\"/>\n";
    }
    const double ly = kTop + 8 + 16 * static_cast<double>(legend_row);
    out += "<line x1=\"" + num(kWidth - 190) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(kWidth - 170) + "\" y2=\"" +
           num(ly) + "\" stroke=\"" + s.color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(kWidth - 165) + "\" y=\"" + num(ly + 4) + "\" font-size=\"11\">" + escape(s.name) +
           "</text>\n";
    return out;
  }

 private:
  const std::vector<StepSummary>& steps_;
  double x0_, x1_, y0_, y1_;
};

std::string data_comment(const std::vector<StepSummary>& steps, const PlotOptions& options) {
  std::string s = "<!-- data\n";
  if (!options.manifest_hash.empty()) s += "manifest_hash," + options.manifest_hash + "\n";
  s += "step,items,mean_p_po_after_po,mean_p_po_after_do,mean_effect\n";
  for (const auto& r : steps) {
    s += std::to_string(r.step) + "," + std::to_string(r.items) + "," + format_double(r.mean_after_po) + "," +
         format_double(r.mean_after_do) + "," + format_double(r.mean_effect) + "\n";
  }
  return s + "-->\n";
}

std::string open_svg() {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) +
         "\" height=\"" + num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) +
         "\" font-family=\"sans-serif\">\n";
}

void require_points(const std::vector<StepSummary>& steps) {
  if (steps.empty()) throw DataError("plot: the sweep has no rows");
}

}  // namespace

std::string priming_svg(const std::vector<StepSummary>& steps, const PlotOptions& options) {
  require_points(steps);
  Canvas c(steps, 0.0, 1.0);
  Series po{"after PO prime", "#1f77b4", {}}, do_{"after DO prime", "#d62728", {}};
  for (const auto& s : steps) {
    po.y.push_back(s.mean_after_po);
    do_.y.push_back(s.mean_after_do);
  }
  std::string svg = open_svg() + data_comment(steps, options);
  svg += c.frame("Language model priming effect", "mean P_N(PO target)");
  svg += c.hline(0.5, "stroke=\"#999\" stroke-dasharray=\"2,3\"");
  if (options.boundary) svg += c.vline(static_cast<double>(*options.boundary), "stroke=\"#555\" stroke-dasharray=\"5,4\"");
  svg += c.series(po, 0) + c.series(do_, 1);
  return svg + "</svg>\n";
}

std::string effect_svg(const std::vector<StepSummary>& steps, const PlotOptions& options) {
  require_points(steps);
  double span = 0.0;
  for (const auto& s : steps) span = std::max(span, std::abs(s.mean_effect));
  span = span > 0 ? span * 1.1 : 0.01;
  Canvas c(steps, -span, span);
  Series eff{"mean priming effect", "#2ca02c", {}};
  for (const auto& s : steps) eff.y.push_back(s.mean_effect);
  std::string svg = open_svg() + data_comment(steps, options);
  svg += c.frame("Priming effect trajectory", "P_N after PO - P_N after DO");
  svg += c.hline(0.0, "stroke=\"#999\" stroke-dasharray=\"2,3\"");
  if (options.boundary) svg += c.vline(static_cast<double>(*options.boundary), "stroke=\"#555\" stroke-dasharray=\"5,4\"");
  svg += c.series(eff, 0);
  return svg + "</svg>\n";
}

}  // namespace xlp::cli
