#include "taec/metrics.hpp"

#include "taec/errors.hpp"
#include "taec/globalassign.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

namespace taec {

std::string to_string(MatchingScope s) { return s == MatchingScope::local ? "local" : "global"; }

MatchingScope parse_scope(const std::string& name) {
  if (name == "global") return MatchingScope::global;
  if (name == "local") return MatchingScope::local;
  throw std::invalid_argument("unknown matching scope '" + name + "' (expected global or local)");
}

namespace {

void check_lengths(const std::vector<Labels>& pred, const std::vector<Labels>& gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("prediction and ground truth video counts differ");
  for (std::size_t n = 0; n < pred.size(); ++n) {
    if (pred[n].size() != gt[n].size()) {
      throw std::invalid_argument("video " + std::to_string(n) + ": prediction has " + std::to_string(pred[n].size()) +
                                  " frames, ground truth " + std::to_string(gt[n].size()));
    }
  }
}

struct Segment {
  int label;
  std::size_t begin;
  std::size_t end;  // exclusive
};

std::vector<Segment> segments(const Labels& labels) {
  std::vector<Segment> out;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (out.empty() || out.back().label != labels[t]) {
      out.push_back({labels[t], t, t + 1});
    } else {
      out.back().end = t + 1;
    }
  }
  return out;
}

// Drops frames whose ground truth is ignored.
std::pair<Labels, Labels> counted_frames(const Labels& pred, const Labels& gt, int ignore_label) {
  std::pair<Labels, Labels> out;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (gt[t] == ignore_label) continue;
    out.first.push_back(pred[t]);
    out.second.push_back(gt[t]);
  }
  return out;
}

double video_f1(const Labels& pred, const Labels& gt) {
  const std::vector<Segment> ps = segments(pred);
  const std::vector<Segment> gs = segments(gt);
  if (ps.empty() && gs.empty()) return 100.0;

  struct Candidate {
    std::size_t overlap;
    std::size_t pred_index;
    std::size_t gt_index;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Segment& s = ps[i];
    std::size_t same = 0;
    for (std::size_t t = s.begin; t < s.end; ++t) same += gt[t] == s.label ? 1 : 0;
    if (2 * same <= s.end - s.begin) continue;
    std::size_t best_overlap = 0;
    std::size_t best_gt = 0;
    for (std::size_t j = 0; j < gs.size(); ++j) {
      if (gs[j].label != s.label) continue;
      const std::size_t lo = std::max(s.begin, gs[j].begin);
      const std::size_t hi = std::min(s.end, gs[j].end);
      const std::size_t overlap = hi > lo ? hi - lo : 0;
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best_gt = j;
      }
    }
    candidates.push_back({best_overlap, i, best_gt});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.overlap > b.overlap; });
  std::vector<char> claimed(gs.size(), 0);
  double tp = 0.0;
  for (const Candidate& c : candidates) {
    if (claimed[c.gt_index]) continue;
    claimed[c.gt_index] = 1;
    tp += 1.0;
  }
  const double precision = ps.empty() ? 0.0 : tp / static_cast<double>(ps.size());
  const double recall = gs.empty() ? 0.0 : tp / static_cast<double>(gs.size());
  if (precision + recall == 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

}  // namespace

LabelMapping match_labels(const std::vector<Labels>& pred, const std::vector<Labels>& gt, int ignore_label) {
  check_lengths(pred, gt);
  std::set<int> cluster_set;
  std::set<int> class_set;
  std::size_t frames = 0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    frames += pred[n].size();
    for (std::size_t t = 0; t < pred[n].size(); ++t) {
      cluster_set.insert(pred[n][t]);
      if (gt[n][t] != ignore_label) class_set.insert(gt[n][t]);
    }
  }
  if (frames == 0) throw std::invalid_argument("match_labels: empty input");

  const std::vector<int> clusters(cluster_set.begin(), cluster_set.end());
  const std::vector<int> classes(class_set.begin(), class_set.end());
  const auto size = static_cast<Eigen::Index>(std::max(clusters.size(), classes.size()));
  Matrix overlap = Matrix::Zero(size, size);
  auto index_of = [](const std::vector<int>& v, int x) {
    return static_cast<Eigen::Index>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
  };
  for (std::size_t n = 0; n < pred.size(); ++n) {
    for (std::size_t t = 0; t < pred[n].size(); ++t) {
      if (gt[n][t] == ignore_label) continue;
      overlap(index_of(clusters, pred[n][t]), index_of(classes, gt[n][t])) += 1.0;
    }
  }
  const std::vector<int> perm = hungarian(-overlap);
  LabelMapping mapping;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto col = static_cast<std::size_t>(perm[i]);
    mapping[clusters[i]] = col < classes.size() ? classes[col] : kNoClass;
  }
  return mapping;
}

std::vector<LabelMapping> match_labels(const std::vector<Labels>& pred, const std::vector<Labels>& gt,
                                       MatchingScope scope, int ignore_label) {
  check_lengths(pred, gt);
  if (pred.empty()) throw std::invalid_argument("match_labels: empty input");
  if (scope == MatchingScope::global) return {match_labels(pred, gt, ignore_label)};
  std::vector<LabelMapping> out;
  for (std::size_t n = 0; n < pred.size(); ++n) out.push_back(match_labels({pred[n]}, {gt[n]}, ignore_label));
  return out;
}

std::vector<Labels> apply_mapping(const std::vector<Labels>& pred, const std::vector<LabelMapping>& mappings) {
  if (mappings.size() != 1 && mappings.size() != pred.size()) {
    throw std::invalid_argument("apply_mapping: need one mapping or one per video");
  }
  std::vector<Labels> out(pred.size());
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const LabelMapping& m = mappings.size() == 1 ? mappings.front() : mappings[n];
    for (int p : pred[n]) {
      const auto it = m.find(p);
      out[n].push_back(it == m.end() ? kNoClass : it->second);
    }
  }
  return out;
}

double mof(const std::vector<Labels>& pred, const std::vector<Labels>& gt, int ignore_label) {
  check_lengths(pred, gt);
  std::size_t correct = 0;
  std::size_t counted = 0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    for (std::size_t t = 0; t < pred[n].size(); ++t) {
      if (gt[n][t] == ignore_label) continue;
      ++counted;
      correct += pred[n][t] == gt[n][t] ? 1 : 0;
    }
  }
  if (counted == 0) throw UndefinedMetric("mof: no frames with a ground-truth class");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(counted);
}

double ciou(const std::vector<Labels>& pred, const std::vector<Labels>& gt, int ignore_label) {
  check_lengths(pred, gt);
  std::map<int, std::pair<std::size_t, std::size_t>> stats;  // class -> (intersection, union)
  for (const Labels& g : gt) {
    for (int c : g) {
      if (c != ignore_label) stats.try_emplace(c, 0, 0);
    }
  }
  if (stats.empty()) throw UndefinedMetric("ciou: no frames with a ground-truth class");
  for (std::size_t n = 0; n < pred.size(); ++n) {
    for (std::size_t t = 0; t < pred[n].size(); ++t) {
      const int g = gt[n][t];
      if (g == ignore_label) continue;
      const int p = pred[n][t];
      if (p == g) {
        ++stats[g].first;
        ++stats[g].second;
      } else {
        ++stats[g].second;
        const auto it = stats.find(p);
        if (it != stats.end()) ++it->second.second;
      }
    }
  }
  double sum = 0.0;
  for (const auto& [cls, s] : stats) sum += static_cast<double>(s.first) / static_cast<double>(s.second);
  return 100.0 * sum / static_cast<double>(stats.size());
}

double f1_score(const std::vector<Labels>& pred, const std::vector<Labels>& gt, int ignore_label) {
  check_lengths(pred, gt);
  double sum = 0.0;
  std::size_t videos = 0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const auto [p, g] = counted_frames(pred[n], gt[n], ignore_label);
    if (g.empty()) continue;
    sum += video_f1(p, g);
    ++videos;
  }
  if (videos == 0) throw UndefinedMetric("f1: no frames with a ground-truth class");
  return sum / static_cast<double>(videos);
}

std::vector<int> collapse_runs(const Labels& labels) {
  std::vector<int> out;
  for (int l : labels) {
    if (out.empty() || out.back() != l) out.push_back(l);
  }
  return out;
}

int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> prev(b.size() + 1);
  std::vector<int> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double edit_score(const std::vector<Labels>& pred, const std::vector<Labels>& gt, int ignore_label) {
  check_lengths(pred, gt);
  if (pred.empty()) throw UndefinedMetric("edit: no videos");
  double sum = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const auto [p, g] = counted_frames(pred[n], gt[n], ignore_label);
    const std::vector<int> a = collapse_runs(p);
    const std::vector<int> b = collapse_runs(g);
    const std::size_t longest = std::max(a.size(), b.size());
    sum += longest == 0 ? 100.0 : 100.0 * (1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest));
  }
  return sum / static_cast<double>(pred.size());
}

MetricsReport evaluate(const std::vector<Labels>& pred, const std::vector<Labels>& gt,
                       const std::vector<std::string>& video_ids, MatchingScope scope, int ignore_label) {
  check_lengths(pred, gt);
  if (video_ids.size() != pred.size()) throw std::invalid_argument("evaluate: one video id per video required");
  const std::vector<Labels> mapped = apply_mapping(pred, match_labels(pred, gt, scope, ignore_label));

  MetricsReport report;
  report.scope = scope;
  for (const Labels& g : gt) {
    report.ignore_label_used = report.ignore_label_used || std::find(g.begin(), g.end(), ignore_label) != g.end();
  }
  report.mof = mof(mapped, gt, ignore_label);
  report.ciou = ciou(mapped, gt, ignore_label);
  report.f1 = f1_score(mapped, gt, ignore_label);
  report.edit = edit_score(mapped, gt, ignore_label);

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t n = 0; n < pred.size(); ++n) {
    VideoScores v;
    v.video_id = video_ids[n];
    const std::vector<Labels> p{mapped[n]};
    const std::vector<Labels> g{gt[n]};
    try {
      v.mof = mof(p, g, ignore_label);
      v.ciou = ciou(p, g, ignore_label);
      v.f1 = f1_score(p, g, ignore_label);
    } catch (const UndefinedMetric&) {
      v.mof = v.ciou = v.f1 = nan;
    }
    v.edit = edit_score(p, g, ignore_label);
    report.per_video.push_back(v);
  }
  return report;
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

void write_report(std::ostream& out, const MetricsReport& report) {
  out << "# evaluation report\n";
  out << "# matching scope: " << to_string(report.scope) << " Hungarian\n";
  out << "# videos: " << report.per_video.size() << "\n";
  out << "# ignore label present: " << (report.ignore_label_used ? "yes" : "no") << "\n";
  out << "# MoF " << fixed4(report.mof) << "  cIoU " << fixed4(report.ciou) << "  F1 " << fixed4(report.f1)
      << "  Edit " << fixed4(report.edit) << "\n";
  out << "mof=" << fixed4(report.mof) << "\n";
  out << "ciou=" << fixed4(report.ciou) << "\n";
  out << "f1=" << fixed4(report.f1) << "\n";
  out << "edit=" << fixed4(report.edit) << "\n";
  out << "scope=" << to_string(report.scope) << "\n";
  for (const VideoScores& v : report.per_video) {
    out << "video." << v.video_id << ".mof=" << fixed4(v.mof) << "\n";
    out << "video." << v.video_id << ".ciou=" << fixed4(v.ciou) << "\n";
    out << "video." << v.video_id << ".f1=" << fixed4(v.f1) << "\n";
    out << "video." << v.video_id << ".edit=" << fixed4(v.edit) << "\n";
  }
}

}  // namespace taec
