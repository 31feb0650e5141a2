// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdsim/matrix.hpp"
#include "fdsim/nn.hpp"
#include "fdsim/rng.hpp"
#include "fdsim/snapshot.hpp"

namespace fdsim {

// Flattened model outputs on a probe set: the concatenation of the output
// rows in probe order. Euclidean distance between two such vectors equals
// the empirical function distance between the two models on that probe.
struct OutputVector {
  std::size_t device = 0;
  std::size_t round = 0;
  std::vector<double> values;
};

struct TrajectoryPoint {
  std::size_t device = 0;
  std::size_t round = 0;
  double x = 0.0;
  double y = 0.0;
};

inline std::vector<double> vectorize_outputs(const Model& m, const Matrix& probe_inputs) {
  if (probe_inputs.rows() == 0) throw std::invalid_argument("vectorize_outputs: empty probe");
  return forward(m, probe_inputs).data();
}

inline Matrix pairwise_distances(std::span<const std::vector<double>> vectors) {
  const std::size_t m = vectors.size();
  for (const auto& v : vectors)
    if (v.size() != vectors.front().size())
      throw std::invalid_argument("pairwise_distances: vector length mismatch");
  Matrix d(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < vectors[i].size(); ++k) {
        const double diff = vectors[i][k] - vectors[j][k];
        acc += diff * diff;
      }
      d(i, j) = d(j, i) = std::sqrt(acc);
    }
  }
  return d;
}

namespace detail {

// Double-centered Gram matrix B = -1/2 J D^2 J.
inline Matrix gram_from_distances(const Matrix& dist) {
  const std::size_t m = dist.rows();
  Matrix sq(m, m);
  for (std::size_t i = 0; i < m * m; ++i) sq.data()[i] = dist.data()[i] * dist.data()[i];
  std::vector<double> row_mean(m, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) row_mean[i] += sq(i, j);
    row_mean[i] /= static_cast<double>(m);
    grand += row_mean[i];
  }
  grand /= static_cast<double>(m);
  Matrix b(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      b(i, j) = -0.5 * (sq(i, j) - row_mean[i] - row_mean[j] + grand);
  return b;
}

}  // namespace detail

// Classical multidimensional scaling: embed a distance matrix into
// out_dim coordinates via double centering and the top eigenpairs of the
// Gram matrix. Eigenpairs come from power iteration with deflation on the
// spectrum shifted into the nonnegative range (tolerance 1e-10, at most
// 10000 iterations per eigenpair); negative eigenvalues clamp to zero
// coordinates. Fully deterministic: fixed start vectors, and each
// coordinate column is sign-fixed so its largest-magnitude entry is
// positive.
inline Matrix classical_mds(const Matrix& dist, std::size_t out_dim) {
  const std::size_t m = dist.rows();
  if (dist.cols() != m) throw std::invalid_argument("classical_mds: matrix not square");
  for (std::size_t i = 0; i < m; ++i) {
    if (dist(i, i) != 0.0) throw std::invalid_argument("classical_mds: nonzero diagonal");
    for (std::size_t j = 0; j < m; ++j) {
      if (!(dist(i, j) >= 0.0)) throw std::invalid_argument("classical_mds: negative entry");
      if (std::abs(dist(i, j) - dist(j, i)) > 1e-12)
        throw std::invalid_argument("classical_mds: matrix not symmetric");
    }
  }
  Matrix coords(m, out_dim);
  if (m == 0 || out_dim == 0) return coords;

  const Matrix b = detail::gram_from_distances(dist);

  // Gershgorin bound: B + shift*I is positive semidefinite, so power
  // iteration returns eigenpairs in descending algebraic order of B.
  double shift = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) row_sum += std::abs(b(i, j));
    shift = std::max(shift, row_sum);
  }
  if (shift == 0.0) return coords;  // all points coincide

  constexpr double kTol = 1e-10;
  constexpr std::size_t kMaxIter = 10000;
  std::vector<std::vector<double>> eigvecs;
  std::vector<double> shifted_vals;  // eigenvalue + shift, for deflation
  SplitMix64 gen(0x6D64735F73746172ULL);  // fixed stream keeps output deterministic

  const auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = shift * x[i];
      const auto row = b.row(i);
      for (std::size_t j = 0; j < m; ++j) acc += row[j] * x[j];
      y[i] = acc;
    }
    for (std::size_t k = 0; k < eigvecs.size(); ++k) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += eigvecs[k][j] * x[j];
      const double f = shifted_vals[k] * dot;
      for (std::size_t j = 0; j < m; ++j) y[j] -= f * eigvecs[k][j];
    }
  };

  std::vector<double> x(m), y(m);
  for (std::size_t dim = 0; dim < out_dim; ++dim) {
    double norm = 0.0;
    for (double& v : x) {
      v = 2.0 * gen.next_f64() - 1.0;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : x) v /= norm;

    for (std::size_t iter = 0; iter < kMaxIter; ++iter) {
      apply(x, y);
      double ny = 0.0;
      for (double v : y) ny += v * v;
      ny = std::sqrt(ny);
      if (ny < 1e-300) break;  // x lies in the (deflated) null space
      double delta = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        y[i] /= ny;
        delta = std::max(delta, std::abs(y[i] - x[i]));
      }
      x.swap(y);
      if (delta <= kTol) break;
    }

    apply(x, y);
    double rayleigh = 0.0;
    for (std::size_t i = 0; i < m; ++i) rayleigh += x[i] * y[i];
    const double eigval = rayleigh - shift;
    eigvecs.push_back(x);
    shifted_vals.push_back(rayleigh);

    const double scale = eigval > 0.0 ? std::sqrt(eigval) : 0.0;
    for (std::size_t i = 0; i < m; ++i) coords(i, dim) = x[i] * scale;
  }

  // Sign convention: largest-magnitude entry of each column is positive.
  for (std::size_t dim = 0; dim < out_dim; ++dim) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (std::abs(coords(i, dim)) > std::abs(coords(arg, dim))) arg = i;
    if (coords(arg, dim) < 0.0)
      for (std::size_t i = 0; i < m; ++i) coords(i, dim) = -coords(i, dim);
  }
  return coords;
}

// Joint 2D embedding of every (device, round) snapshot in the archive.
inline std::vector<TrajectoryPoint> project_archive(const SnapshotArchive& archive) {
  std::vector<std::vector<double>> vectors;
  std::vector<TrajectoryPoint> points;
  vectors.reserve(archive.num_devices * archive.rounds.size());
  points.reserve(vectors.capacity());
  for (std::size_t dev = 0; dev < archive.num_devices; ++dev) {
    for (std::size_t s = 0; s < archive.rounds.size(); ++s) {
      const auto row = archive.outputs[s].row(dev);
      vectors.emplace_back(row.begin(), row.end());
      points.push_back({dev, archive.rounds[s], 0.0, 0.0});
    }
  }
  const Matrix coords = classical_mds(pairwise_distances(vectors), 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i].x = coords(i, 0);
    points[i].y = coords(i, 1);
  }
  return points;
}

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_f2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

// CSV rows sorted by (device, round); floats carry 17 significant digits
// so a re-import reproduces the coordinates exactly.
inline void export_trajectory(std::span<const TrajectoryPoint> points, const std::string& path) {
  std::vector<TrajectoryPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const TrajectoryPoint& a, const TrajectoryPoint& b) {
    return a.device != b.device ? a.device < b.device : a.round < b.round;
  });
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("export_trajectory: cannot open " + path);
  out << "device,round,x,y\n";
  for (const auto& p : sorted)
    out << p.device << ',' << p.round << ',' << detail::fmt_g17(p.x) << ',' << detail::fmt_g17(p.y)
        << '\n';
  if (!out) throw std::runtime_error("export_trajectory: write failed: " + path);
}

enum class ColorBy { kDevice, kRound };

// Categorical palette for device identity.
inline std::string device_color(std::size_t device) {
  static constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                             "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return kPalette[device % 10];
}

// Sequential palette for round progress: rank 0 is lightest (earliest),
// rank 1 darkest (latest).
inline std::string round_color(double rank01) {
  rank01 = std::clamp(rank01, 0.0, 1.0);
  const auto lerp = [&](int lo, int hi) {
    return static_cast<int>(std::lround(lo + (hi - lo) * rank01));
  };
  const int r = lerp(222, 8), g = lerp(235, 48), bl = lerp(247, 107);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, bl);
  return buf;
}

// Static SVG of every device's trajectory: one polyline per device plus
// point markers, colored by device id or by round. Output is byte-stable
// for identical inputs.
inline void render_svg(std::span<const TrajectoryPoint> points, ColorBy color_by,
                       const std::string& path) {
  if (points.empty()) throw std::invalid_argument("render_svg: no points");
  std::vector<TrajectoryPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const TrajectoryPoint& a, const TrajectoryPoint& b) {
    return a.device != b.device ? a.device < b.device : a.round < b.round;
  });

  double min_x = sorted[0].x, max_x = sorted[0].x, min_y = sorted[0].y, max_y = sorted[0].y;
  std::size_t min_round = sorted[0].round, max_round = sorted[0].round;
  for (const auto& p : sorted) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
    min_round = std::min(min_round, p.round);
    max_round = std::max(max_round, p.round);
  }
  const double span_x = max_x > min_x ? max_x - min_x : 1.0;
  const double span_y = max_y > min_y ? max_y - min_y : 1.0;
  constexpr double kW = 800.0, kH = 600.0, kMargin = 60.0, kLegendW = 140.0;
  const auto px = [&](double x) { return kMargin + (x - min_x) / span_x * (kW - kLegendW - 2 * kMargin); };
  const auto py = [&](double y) { return kH - kMargin - (y - min_y) / span_y * (kH - 2 * kMargin); };
  const auto round_rank = [&](std::size_t r) {
    return max_round > min_round
               ? static_cast<double>(r - min_round) / static_cast<double>(max_round - min_round)
               : 1.0;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
         "viewBox=\"0 0 800 600\">\n";
  svg += "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";

  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].device == sorted[i].device) ++j;
    const std::string line_color =
        color_by == ColorBy::kDevice ? device_color(sorted[i].device) : std::string("#bbbbbb");
    if (j - i >= 2) {
      svg += "<polyline fill=\"none\" stroke=\"" + line_color + "\" stroke-width=\"1.2\" points=\"";
      for (std::size_t k = i; k < j; ++k) {
        if (k > i) svg += ' ';
        svg += detail::fmt_f2(px(sorted[k].x)) + "," + detail::fmt_f2(py(sorted[k].y));
      }
      svg += "\"/>\n";
    }
    for (std::size_t k = i; k < j; ++k) {
      const std::string fill = color_by == ColorBy::kDevice
                                   ? device_color(sorted[k].device)
                                   : round_color(round_rank(sorted[k].round));
      svg += "<circle cx=\"" + detail::fmt_f2(px(sorted[k].x)) + "\" cy=\"" +
             detail::fmt_f2(py(sorted[k].y)) + "\" r=\"3\" fill=\"" + fill + "\"/>\n";
    }
    i = j;
  }

  // Legend.
  const double lx = kW - kLegendW + 10.0;
  if (color_by == ColorBy::kDevice) {
    std::vector<std::size_t> devices;
    for (const auto& p : sorted)
      if (devices.empty() || devices.back() != p.device) devices.push_back(p.device);
    double ly = kMargin;
    for (std::size_t dev : devices) {
      svg += "<rect x=\"" + detail::fmt_f2(lx) + "\" y=\"" + detail::fmt_f2(ly) +
             "\" width=\"12\" height=\"12\" fill=\"" + device_color(dev) + "\"/>\n";
      svg += "<text x=\"" + detail::fmt_f2(lx + 18.0) + "\" y=\"" + detail::fmt_f2(ly + 10.0) +
             "\" font-size=\"12\" font-family=\"sans-serif\">device " + std::to_string(dev) +
             "</text>\n";
      ly += 18.0;
    }
  } else {
    double ly = kMargin;
    svg += "<text x=\"" + detail::fmt_f2(lx) + "\" y=\"" + detail::fmt_f2(ly - 6.0) +
           "\" font-size=\"12\" font-family=\"sans-serif\">round</text>\n";
    constexpr int kSwatches = 5;
    for (int s = 0; s < kSwatches; ++s) {
      const double rank = static_cast<double>(s) / (kSwatches - 1);
      const std::size_t label =
          min_round + static_cast<std::size_t>(std::lround(rank * double(max_round - min_round)));
      svg += "<rect x=\"" + detail::fmt_f2(lx) + "\" y=\"" + detail::fmt_f2(ly) +
             "\" width=\"12\" height=\"12\" fill=\"" + round_color(rank) + "\"/>\n";
      svg += "<text x=\"" + detail::fmt_f2(lx + 18.0) + "\" y=\"" + detail::fmt_f2(ly + 10.0) +
             "\" font-size=\"12\" font-family=\"sans-serif\">" + std::to_string(label) +
             "</text>\n";
      ly += 18.0;
    }
  }
  svg += "</svg>\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("render_svg: cannot open " + path);
  out << svg;
  if (!out) throw std::runtime_error("render_svg: write failed: " + path);
}

}  // namespace fdsim
