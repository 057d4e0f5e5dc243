#include "wdro/export.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>

namespace wdro {

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Series {
  std::vector<double> x, y;
  std::string color;
};

struct Panel {
  double left, top, width, height;
  std::string title, y_label;
  std::vector<Series> series;
  std::optional<double> limit;  // dashed horizontal line
};

std::string render_panel(const Panel& p) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : p.series) {
    for (double v : s.x) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
    for (double v : s.y) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
  }
  if (p.limit) ymin = std::min(ymin, *p.limit), ymax = std::max(ymax, *p.limit);
  if (!(xmax > xmin)) xmin -= 1, xmax += 1;
  if (!(ymax > ymin)) ymin -= 1, ymax += 1;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const auto sx = [&](double v) { return p.left + (v - xmin) / (xmax - xmin) * p.width; };
  const auto sy = [&](double v) { return p.top + p.height - (v - ymin) / (ymax - ymin) * p.height; };

  std::string out;
  out += "<g>\n<rect x=\"" + fixed(p.left, 1) + "\" y=\"" + fixed(p.top, 1) + "\" width=\"" +
         fixed(p.width, 1) + "\" height=\"" + fixed(p.height, 1) +
         "\" fill=\"none\" stroke=\"#444\"/>\n";
  out += "<text x=\"" + fixed(p.left, 1) + "\" y=\"" + fixed(p.top - 6, 1) +
         "\" font-size=\"13\">" + p.title + "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = ymin + (ymax - ymin) * k / 4.0;
    out += "<text x=\"" + fixed(p.left - 6, 1) + "\" y=\"" + fixed(sy(yv) + 4, 1) +
           "\" font-size=\"10\" text-anchor=\"end\">" + fixed(yv, 3) + "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4.0;
    out += "<text x=\"" + fixed(sx(xv), 1) + "\" y=\"" + fixed(p.top + p.height + 14, 1) +
           "\" font-size=\"10\" text-anchor=\"middle\">" + fixed(xv, 0) + "</text>\n";
  }
  if (p.limit) {
    out += "<line x1=\"" + fixed(p.left, 1) + "\" x2=\"" + fixed(p.left + p.width, 1) +
           "\" y1=\"" + fixed(sy(*p.limit), 2) + "\" y2=\"" + fixed(sy(*p.limit), 2) +
           "\" stroke=\"#c00\" stroke-dasharray=\"6 4\"/>\n";
  }
  for (const auto& s : p.series) {
    if (s.x.empty()) continue;
    out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) out += ' ';
      out += fixed(sx(s.x[i]), 2) + "," + fixed(sy(s.y[i]), 2);
    }
    out += "\"/>\n";
  }
  out += "</g>\n";
  return out;
}

std::string svg_header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         fixed(w, 0) + "\" height=\"" + fixed(h, 0) + "\" viewBox=\"0 0 " + fixed(w, 0) + " " +
         fixed(h, 0) + "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string battery_svg(const RunLog& log) {
  Series v{{}, {}, "#1f4e9c"}, soc{{}, {}, "#1b7a3a"}, cur{{}, {}, "#8a4b00"};
  for (const auto& r : log.records) {
    const double time = r.t * log.dt;
    v.x.push_back(time);
    v.y.push_back(r.constraint_value);
    soc.x.push_back(time);
    soc.y.push_back(r.state[0]);
    cur.x.push_back(time);
    cur.y.push_back(r.input[0]);
  }
  const std::string mode = log.dro_enabled ? "DRO" : "no DRO";
  std::string out = svg_header(760, 760);
  out += render_panel({70, 40, 660, 190, "Terminal voltage [V] (" + mode + ", seed " + std::to_string(log.seed) + ")",
                       "V", {v}, log.bound});
  out += render_panel({70, 290, 660, 190, "State of charge [-]", "SOC", {soc}, log.soc_target});
  out += render_panel({70, 540, 660, 190, "Current [A] vs time [s]", "I", {cur}, std::nullopt});
  out += "</svg>\n";
  return out;
}

std::string vehicle_svg(const RunLog& log) {
  const double size = 700, margin = 40;
  const double extent = log.field ? log.field->extent() : 100.0;
  const auto sx = [&](double x) { return margin + x / extent * size; };
  const auto sy = [&](double y) { return margin + size - y / extent * size; };
  std::string out = svg_header(size + 2 * margin, size + 2 * margin);
  out += "<text x=\"" + fixed(margin, 0) + "\" y=\"24\" font-size=\"13\">Trajectory over obstacle boundary (" +
         std::string(log.dro_enabled ? "DRO" : "no DRO") + ", seed " + std::to_string(log.seed) + ")</text>\n";
  out += "<rect x=\"" + fixed(margin, 0) + "\" y=\"" + fixed(margin, 0) + "\" width=\"" + fixed(size, 0) +
         "\" height=\"" + fixed(size, 0) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  if (log.field) {
    out += "<path fill=\"none\" stroke=\"#555\" stroke-width=\"1\" d=\"";
    for (const auto& s : obstacle_contour(*log.field)) {
      out += "M" + fixed(sx(s[0]), 2) + " " + fixed(sy(s[1]), 2) + "L" + fixed(sx(s[2]), 2) + " " +
             fixed(sy(s[3]), 2);
    }
    out += "\"/>\n";
  }
  out += "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
  bool first = true;
  for (const auto& r : log.records) {
    if (!first) out += ' ';
    first = false;
    out += fixed(sx(r.state[0]), 2) + "," + fixed(sy(r.state[1]), 2);
  }
  out += "\"/>\n";
  for (const auto& r : log.records) {
    if (!r.violation) continue;
    out += "<circle cx=\"" + fixed(sx(r.state[0]), 2) + "\" cy=\"" + fixed(sy(r.state[1]), 2) +
           "\" r=\"3\" fill=\"#c00\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace

std::vector<std::array<double, 4>> obstacle_contour(const ObstacleField& field) {
  std::vector<std::array<double, 4>> segs;
  const std::size_t n = field.nodes();
  const double h = field.resolution();
  const double c = field.cutoff();
  for (std::size_t j = 0; j + 1 < n; ++j) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double v[4] = {field.node(i, j), field.node(i + 1, j), field.node(i + 1, j + 1),
                           field.node(i, j + 1)};
      const double px[4] = {i * h, (i + 1) * h, (i + 1) * h, i * h};
      const double py[4] = {j * h, j * h, (j + 1) * h, (j + 1) * h};
      double pts[4][2];
      int count = 0;
      for (int e = 0; e < 4; ++e) {
        const int a = e, b = (e + 1) % 4;
        if ((v[a] > c) == (v[b] > c)) continue;
        const double f = (c - v[a]) / (v[b] - v[a]);
        pts[count][0] = px[a] + f * (px[b] - px[a]);
        pts[count][1] = py[a] + f * (py[b] - py[a]);
        ++count;
      }
      if (count == 2) {
        segs.push_back({pts[0][0], pts[0][1], pts[1][0], pts[1][1]});
      } else if (count == 4) {
        // Saddle: join according to the cell-centre value.
        const bool centre_high = (v[0] + v[1] + v[2] + v[3]) / 4.0 > c;
        const bool first_high = v[0] > c;
        if (centre_high == first_high) {
          segs.push_back({pts[0][0], pts[0][1], pts[1][0], pts[1][1]});
          segs.push_back({pts[2][0], pts[2][1], pts[3][0], pts[3][1]});
        } else {
          segs.push_back({pts[0][0], pts[0][1], pts[3][0], pts[3][1]});
          segs.push_back({pts[1][0], pts[1][1], pts[2][0], pts[2][1]});
        }
      }
    }
  }
  return segs;
}

std::string run_csv(const RunLog& log, int max_horizon) {
  std::string out = "t";
  for (const auto& s : log.state_names) out += "," + s;
  for (const auto& s : log.input_names) out += "," + s;
  out += ",constraint_value";
  for (int d = 1; d <= max_horizon; ++d) out += ",offset_depth" + std::to_string(d);
  out += ",horizon,feasible_flag,violation_flag,violation_magnitude,solve_ms\n";
  for (const auto& r : log.records) {
    out += std::to_string(r.t);
    for (double v : r.state) out += "," + num(v);
    for (double v : r.input) out += "," + num(v);
    out += "," + num(r.constraint_value);
    for (int d = 0; d < max_horizon; ++d) {
      out += ",";
      if (static_cast<std::size_t>(d) < r.offsets.size()) out += num(r.offsets[static_cast<std::size_t>(d)]);
    }
    out += "," + std::to_string(r.horizon) + "," + (r.feasible ? "1" : "0") + "," +
           (r.violation ? "1" : "0") + "," + num(r.violation_magnitude) + "," + fixed(r.solve_ms, 3) + "\n";
  }
  return out;
}

std::string summary_csv(const BatchResult& batch, bool include_timing) {
  std::string out;
  for (std::size_t i = 0; i < kSummaryColumns.size(); ++i) {
    if (i) out += ",";
    out += kSummaryColumns[i];
  }
  out += "\n";
  for (const auto& m : batch.metrics) {
    out += std::to_string(m.seed) + ",";
    if (m.failed) {
      out += ",,,failed\n";
      continue;
    }
    out += fixed(m.violation_pct, 4) + "," + fixed(m.max_constraint, 6) + "," +
           (include_timing ? fixed(m.mean_iter_time_s, 4) : "") + "," + m.completion_metric(batch.study) + "\n";
  }
  const auto& s = batch.summary;
  out += "averages," + fixed(s.violation_pct, 4) + "," + fixed(s.max_constraint, 6) + "," +
         (include_timing ? fixed(s.mean_iter_time_s, 4) : "") + ",";
  if (s.completion) {
    out += batch.study == Study::battery ? fixed(*s.completion, 2) : fixed(*s.completion, 1);
  } else {
    out += "DNF";
  }
  out += "\n";
  return out;
}

std::string timing_csv(const BatchResult& batch) {
  std::string out = "run,steps,mean_iter_time_s,mean_solve_ms\n";
  for (std::size_t i = 0; i < batch.metrics.size(); ++i) {
    const auto& m = batch.metrics[i];
    double solve = 0.0;
    const auto& recs = batch.logs[i].records;
    for (const auto& r : recs) solve += r.solve_ms;
    out += std::to_string(m.seed) + "," + std::to_string(m.steps) + "," + fixed(m.mean_iter_time_s, 6) +
           "," + fixed(recs.empty() ? 0.0 : solve / static_cast<double>(recs.size()), 3) + "\n";
  }
  return out;
}

std::string run_svg(const RunLog& log) {
  return log.study == Study::battery ? battery_svg(log) : vehicle_svg(log);
}

std::string run_basename(const RunLog& log) {
  return to_string(log.study) + (log.dro_enabled ? "_dro" : "_nodro") + "_seed" + std::to_string(log.seed);
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::filesystem::path> export_batch(const BatchResult& batch,
                                                const ExperimentConfig& config,
                                                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  const auto put = [&](const std::filesystem::path& name, const std::string& content) {
    write_text_file(out_dir / name, content);
    written.push_back(out_dir / name);
  };
  for (const auto& log : batch.logs) {
    if (log.records.empty()) continue;
    const auto base = run_basename(log);
    put(base + ".csv", run_csv(log, config.n_target()));
    if (config.write_plots) put(base + ".svg", run_svg(log));
    if (!log.warnings.empty()) {
      std::string w;
      for (const auto& line : log.warnings) w += line + "\n";
      put(base + "_warnings.txt", w);
    }
  }
  put("summary.csv", summary_csv(batch, config.timing_in_summary));
  put("timing.csv", timing_csv(batch));
  put("effective_config.ini", to_text(config));
  return written;
}

}  // namespace wdro
