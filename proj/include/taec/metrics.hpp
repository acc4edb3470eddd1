#pragma once

// Evaluation of unsupervised segmentations against ground truth. Predicted
// cluster ids are first mapped to ground-truth classes by Hungarian matching
// on frame overlap, either once for the whole dataset (global) or per video
// (local). Frames whose ground truth is the ignore label are excluded from
// matching and from every score.

#include "taec/types.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace taec {

enum class MatchingScope { global, local };

std::string to_string(MatchingScope s);
MatchingScope parse_scope(const std::string& name);

// Value given to clusters that are left without a class when there are more
// clusters than classes.
inline constexpr int kNoClass = -2;

using LabelMapping = std::map<int, int>;

// Maximum-overlap cluster -> class mapping over the given videos (pooled).
LabelMapping match_labels(const std::vector<Labels>& pred, const std::vector<Labels>& gt,
                          int ignore_label = kIgnoreLabel);

// One mapping (global scope) or one per video (local scope).
std::vector<LabelMapping> match_labels(const std::vector<Labels>& pred, const std::vector<Labels>& gt,
                                       MatchingScope scope, int ignore_label = kIgnoreLabel);

std::vector<Labels> apply_mapping(const std::vector<Labels>& pred, const std::vector<LabelMapping>& mappings);

// Scores take mapped predictions and return percentages.

// Pooled frame accuracy. Throws UndefinedMetric when every frame is ignored.
double mof(const std::vector<Labels>& pred, const std::vector<Labels>& gt, int ignore_label = kIgnoreLabel);

// Mean over ground-truth classes of the pooled intersection over union.
double ciou(const std::vector<Labels>& pred, const std::vector<Labels>& gt, int ignore_label = kIgnoreLabel);

// Segment-level F1 averaged over videos. A predicted segment is a true
// positive when more than half of its frames carry its label in the ground
// truth and it is the first claimant (in order of decreasing overlap) of the
// ground-truth segment of that label it overlaps most.
double f1_score(const std::vector<Labels>& pred, const std::vector<Labels>& gt, int ignore_label = kIgnoreLabel);

// 100 * (1 - levenshtein / max(len)) on run-collapsed label sequences,
// averaged over videos.
double edit_score(const std::vector<Labels>& pred, const std::vector<Labels>& gt, int ignore_label = kIgnoreLabel);

// Helpers shared with tests and the CLI.
std::vector<int> collapse_runs(const Labels& labels);
int levenshtein(const std::vector<int>& a, const std::vector<int>& b);

struct VideoScores {
  std::string video_id;
  double mof = 0.0;
  double ciou = 0.0;
  double f1 = 0.0;
  double edit = 0.0;
};

struct MetricsReport {
  double mof = 0.0;
  double ciou = 0.0;
  double f1 = 0.0;
  double edit = 0.0;
  MatchingScope scope = MatchingScope::global;
  bool ignore_label_used = false;
  std::vector<VideoScores> per_video;
};

// Matches (global or local), maps, and scores. Per-video scores use the same
// mapping as the pooled ones.
MetricsReport evaluate(const std::vector<Labels>& pred, const std::vector<Labels>& gt,
                       const std::vector<std::string>& video_ids, MatchingScope scope,
                       int ignore_label = kIgnoreLabel);

// Human-readable summary lines prefixed with '#', followed by key=value lines
// (mof, ciou, f1, edit, scope), then per-video lines.
void write_report(std::ostream& out, const MetricsReport& report);

}  // namespace taec
