#include "hifind/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace hifind::eval {

namespace {

void require_same_grid(const LabelVolume& a, const LabelVolume& b) {
  if (a.shape != b.shape)
    fail_data("grid mismatch: " + to_string(a.shape) + " vs " +
              to_string(b.shape));
}

}  // namespace

double voxel_iou(const LabelVolume& a, const LabelVolume& b) {
  require_same_grid(a, b);
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const bool av = a.data[i] != 0, bv = b.data[i] != 0;
    inter += av && bv;
    uni += av || bv;
  }
  if (uni == 0) return 0.0;
  return double(inter) / double(uni);
}

double voxel_dice(const LabelVolume& a, const LabelVolume& b) {
  require_same_grid(a, b);
  int64_t inter = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const bool av = a.data[i] != 0, bv = b.data[i] != 0;
    inter += av && bv;
    na += av;
    nb += bv;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(inter) / double(na + nb);
}

MatchResult match_detections(const detect::Components& preds,
                             const detect::Components& gts,
                             double iou_threshold) {
  require_same_grid(preds.labels, gts.labels);

  // Pairwise intersections in one joint scan.
  std::map<std::pair<int32_t, int32_t>, int64_t> inter;
  for (size_t i = 0; i < preds.labels.data.size(); ++i) {
    const int32_t p = preds.labels.data[i];
    const int32_t g = gts.labels.data[i];
    if (p > 0 && g > 0) ++inter[{p, g}];
  }
  std::map<int64_t, int64_t> pred_size, gt_size;
  for (const auto& rec : preds.records) pred_size[rec.id] = rec.n_voxels;
  for (const auto& rec : gts.records) gt_size[rec.id] = rec.n_voxels;

  struct Cand {
    double iou;
    int64_t pred_id, gt_id;
  };
  std::vector<Cand> cands;
  for (const auto& [key, n] : inter) {
    const int64_t uni = pred_size[key.first] + gt_size[key.second] - n;
    const double iou = uni > 0 ? double(n) / double(uni) : 0.0;
    if (iou >= iou_threshold) cands.push_back({iou, key.first, key.second});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred_id != b.pred_id) return a.pred_id < b.pred_id;
    return a.gt_id < b.gt_id;
  });

  MatchResult out;
  std::set<int64_t> used_pred, used_gt;
  for (const auto& c : cands) {
    if (used_pred.count(c.pred_id) || used_gt.count(c.gt_id)) continue;
    used_pred.insert(c.pred_id);
    used_gt.insert(c.gt_id);
    out.pairs.push_back({c.pred_id, c.gt_id, c.iou});
  }
  for (const auto& rec : preds.records)
    if (!used_pred.count(rec.id)) out.unmatched_pred.push_back(rec.id);
  for (const auto& rec : gts.records)
    if (!used_gt.count(rec.id)) out.unmatched_gt.push_back(rec.id);
  out.tp = int64_t(out.pairs.size());
  out.fp = int64_t(out.unmatched_pred.size());
  out.fn = int64_t(out.unmatched_gt.size());
  return out;
}

EvalReport report_from_counts(int64_t tp, int64_t fp, int64_t fn,
                              double iou_mean, double dice_mean) {
  EvalReport rep;
  rep.tp = tp;
  rep.fp = fp;
  rep.fn = fn;
  rep.iou_mean = iou_mean;
  rep.dice_mean = dice_mean;
  if (tp + fn > 0) {
    rep.recall = double(tp) / double(tp + fn);
  } else {
    rep.recall = 0.0;
    rep.zero_denominator = true;
  }
  if (tp + fp > 0) {
    rep.precision = double(tp) / double(tp + fp);
  } else {
    rep.precision = 0.0;
    rep.zero_denominator = true;
  }
  return rep;
}

EvalReport compute_report(const MatchResult& match, double iou_mean,
                          double dice_mean) {
  EvalReport rep =
      report_from_counts(match.tp, match.fp, match.fn, iou_mean, dice_mean);
  for (const auto& p : match.pairs) {
    PerSourceRow row;
    row.kind = "gt";
    row.gt_id = p.gt_id;
    row.pred_id = p.pred_id;
    row.iou = p.iou;
    rep.per_source.push_back(row);
  }
  for (int64_t g : match.unmatched_gt) {
    PerSourceRow row;
    row.kind = "gt";
    row.gt_id = g;
    rep.per_source.push_back(row);
  }
  for (int64_t p : match.unmatched_pred) {
    PerSourceRow row;
    row.kind = "fp";
    row.pred_id = p;
    rep.per_source.push_back(row);
  }
  return rep;
}

double display_percent(double rate) {
  return std::round(rate * 1000.0) / 10.0;
}

std::string format_table(const std::vector<TableRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %7s %7s %8s %10s %6s %6s\n",
                "Method", "IoU", "Dice", "Recall", "Precision", "TP", "FP");
  out += buf;
  for (const auto& row : rows) {
    const auto& r = row.report;
    std::snprintf(buf, sizeof buf,
                  "%-24s %6.1f%% %6.1f%% %7.1f%% %9.1f%% %6lld %6lld\n",
                  row.method.c_str(), display_percent(r.iou_mean),
                  display_percent(r.dice_mean), display_percent(r.recall),
                  display_percent(r.precision), (long long)r.tp,
                  (long long)r.fp);
    out += buf;
  }
  return out;
}

}  // namespace hifind::eval
