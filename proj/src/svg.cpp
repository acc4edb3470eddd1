#include "taec/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace taec {

const std::vector<std::string>& default_palette() {
  static const std::vector<std::string> palette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#393b79"};
  return palette;
}

namespace {

std::string color_of(int label, const std::vector<std::string>& palette) {
  if (label < 0 || palette.empty()) return kUnlabeledColor;
  return palette[static_cast<std::size_t>(label) % palette.size()];
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string gray(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  const int level = static_cast<int>(std::lround(255.0 * (1.0 - clamped)));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", level, level, level);
  return buf;
}

}  // namespace

std::string render_segmentation_svg(const Labels& gt, const std::vector<Labels>& predictions,
                                    const std::vector<std::string>& palette,
                                    const std::vector<std::string>& row_names) {
  if (gt.empty()) throw std::invalid_argument("render_segmentation_svg: empty sequence");
  for (const Labels& p : predictions) {
    if (p.size() != gt.size()) {
      throw std::invalid_argument("render_segmentation_svg: prediction has " + std::to_string(p.size()) +
                                  " frames, ground truth " + std::to_string(gt.size()));
    }
  }
  std::vector<const Labels*> rows{&gt};
  for (const Labels& p : predictions) rows.push_back(&p);
  if (!row_names.empty() && row_names.size() != rows.size()) {
    throw std::invalid_argument("render_segmentation_svg: one name per row required");
  }

  constexpr int label_width = 120;
  constexpr int band_width = 800;
  constexpr int band_height = 30;
  constexpr int gap = 10;
  constexpr int legend_row = 20;
  const auto frames = static_cast<double>(gt.size());

  std::set<int> present;
  for (const Labels* r : rows) present.insert(r->begin(), r->end());
  const int legend_top = gap + static_cast<int>(rows.size()) * (band_height + gap);
  const int height = legend_top + static_cast<int>(present.size()) * legend_row + gap;
  const int width = label_width + band_width + gap;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int y = gap + static_cast<int>(r) * (band_height + gap);
    const std::string name = row_names.empty() ? (r == 0 ? "ground truth" : "prediction " + std::to_string(r))
                                               : row_names[r];
    svg << "<text x=\"4\" y=\"" << y + band_height / 2 + 5 << "\" font-family=\"sans-serif\" font-size=\"12\">"
        << escape(name) << "</text>\n";
    svg << "<g class=\"band\" transform=\"translate(" << label_width << ' ' << y << ") scale("
        << band_width / frames << " 1)\">\n";
    const Labels& labels = *rows[r];
    std::size_t begin = 0;
    for (std::size_t t = 1; t <= labels.size(); ++t) {
      if (t < labels.size() && labels[t] == labels[begin]) continue;
      svg << "<rect x=\"" << begin << "\" y=\"0\" width=\"" << t - begin << "\" height=\"" << band_height
          << "\" fill=\"" << color_of(labels[begin], palette) << "\" data-label=\"" << labels[begin] << "\"/>\n";
      begin = t;
    }
    svg << "</g>\n";
  }
  int ly = legend_top;
  svg << "<g class=\"legend\">\n";
  for (int label : present) {
    svg << "<rect x=\"" << label_width << "\" y=\"" << ly << "\" width=\"14\" height=\"14\" fill=\""
        << color_of(label, palette) << "\"/>\n";
    const std::string text = label >= 0 ? "class " + std::to_string(label) : "unlabeled";
    svg << "<text x=\"" << label_width + 20 << "\" y=\"" << ly + 12
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << text << "</text>\n";
    ly += legend_row;
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

std::string render_similarity_svg(const Matrix& similarity, int max_cells) {
  if (similarity.rows() != similarity.cols()) throw std::invalid_argument("render_similarity_svg: matrix must be square");
  if (similarity.rows() == 0) throw std::invalid_argument("render_similarity_svg: empty matrix");
  if (max_cells < 1) throw std::invalid_argument("render_similarity_svg: max_cells must be >= 1");

  const Eigen::Index n = similarity.rows();
  const Eigen::Index stride = (n + max_cells - 1) / max_cells;
  const Eigen::Index cells = (n + stride - 1) / stride;
  Matrix shown(cells, cells);
  for (Eigen::Index i = 0; i < cells; ++i) {
    for (Eigen::Index j = 0; j < cells; ++j) {
      const Eigen::Index rows = std::min(stride, n - i * stride);
      const Eigen::Index cols = std::min(stride, n - j * stride);
      shown(i, j) = similarity.block(i * stride, j * stride, rows, cols).mean();
    }
  }

  constexpr int size = 600;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << cells << ' ' << cells << "\" preserveAspectRatio=\"none\" shape-rendering=\"crispEdges\">\n";
  for (Eigen::Index i = 0; i < cells; ++i) {
    for (Eigen::Index j = 0; j < cells; ++j) {
      svg << "<rect x=\"" << j << "\" y=\"" << i << "\" width=\"1\" height=\"1\" fill=\"" << gray(shown(i, j))
          << "\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace taec
