#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hifind/cube.hpp"
#include "hifind/detect.hpp"

namespace hifind::eval {

// Voxelwise overlap scores between two binary masks on the same grid.
// Conventions: IoU of two empty sets is 0, Dice of two empty sets is 1.
double voxel_iou(const LabelVolume& a, const LabelVolume& b);
double voxel_dice(const LabelVolume& a, const LabelVolume& b);

struct MatchPair {
  int64_t pred_id = 0;
  int64_t gt_id = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // matched (tp) pairs
  int64_t tp = 0, fp = 0, fn = 0;
  std::vector<int64_t> unmatched_pred;
  std::vector<int64_t> unmatched_gt;
};

// Greedy one-to-one matching in descending IoU order among pairs with
// IoU >= threshold; ties broken by (pred_id, gt_id). Each prediction and
// ground-truth component is used at most once; a second detection of the
// same source counts as a false positive.
MatchResult match_detections(const detect::Components& preds,
                             const detect::Components& gts,
                             double iou_threshold = 0.2);

struct PerSourceRow {
  std::string kind;  // "gt" (matched or missed) or "fp"
  int64_t gt_id = -1;
  int64_t pred_id = -1;
  double iou = 0.0;
  int64_t n_voxels = 0;
};

struct EvalReport {
  double iou_mean = 0.0;   // voxelwise, averaged per cube
  double dice_mean = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  int64_t tp = 0, fp = 0, fn = 0;
  bool zero_denominator = false;  // a rate had an empty denominator
  std::vector<PerSourceRow> per_source;
};

// Detection-rate arithmetic from raw counts (recall = tp/(tp+fn),
// precision = tp/(tp+fp); zero denominators report 0 with a flag).
EvalReport report_from_counts(int64_t tp, int64_t fp, int64_t fn,
                              double iou_mean = 0.0, double dice_mean = 0.0);

EvalReport compute_report(const MatchResult& match, double iou_mean,
                          double dice_mean);

// Percentage with one decimal for display, e.g. 91.6.
double display_percent(double rate);

// Human-readable results table (header + one row per method entry).
struct TableRow {
  std::string method;
  EvalReport report;
};
std::string format_table(const std::vector<TableRow>& rows);

}  // namespace hifind::eval
