#include "vxseg/metrics.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vxseg/errors.hpp"

namespace vxseg {

const ClassCounts& ConfusionCounts::of(int label) const {
  for (const auto& c : classes)
    if (c.label == label) return c;
  throw ContractError("class " + std::to_string(label) + " is not in the evaluated label set");
}

ConfusionCounts confusion(const LabelVolume& gt, const LabelVolume& pred,
                          const std::vector<int>& label_set) {
  if (!(gt.dims() == pred.dims())) {
    throw ContractError("confusion: ground truth " + dims_string(gt.dims()) + " and prediction " +
                        dims_string(pred.dims()) + " differ");
  }
  std::array<std::uint64_t, 256> gt_n{}, pred_n{}, both{};
  const auto& g = gt.voxels();
  const auto& p = pred.voxels();
  for (std::size_t i = 0; i < g.size(); ++i) {
    ++gt_n[g[i]];
    ++pred_n[p[i]];
    if (g[i] == p[i]) ++both[g[i]];
  }
  ConfusionCounts out;
  for (int l : label_set) {
    if (l < 0 || l > 255) throw ContractError("label " + std::to_string(l) + " out of range");
    ClassCounts c;
    c.label = l;
    c.intersection = both[l];
    c.gt = gt_n[l];
    c.pred = pred_n[l];
    c.union_ = c.gt + c.pred - c.intersection;
    out.classes.push_back(c);
  }
  return out;
}

namespace {
const ClassCounts& present_or_throw(const ConfusionCounts& counts, int label) {
  const auto& c = counts.of(label);
  if (!c.present()) {
    throw UndefinedMetricError("class " + std::to_string(label) + " is absent from both volumes");
  }
  return c;
}
}  // namespace

double iou(const ConfusionCounts& counts, int label) {
  const auto& c = present_or_throw(counts, label);
  return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

double dsc(const ConfusionCounts& counts, int label, DiceDenominator denom) {
  const auto& c = present_or_throw(counts, label);
  const double d = denom == DiceDenominator::sum_of_sizes ? static_cast<double>(c.gt + c.pred)
                                                          : static_cast<double>(c.union_);
  return 2.0 * static_cast<double>(c.intersection) / d;
}

namespace {
template <class F>
double present_mean(const ConfusionCounts& counts, const std::vector<int>& label_set, F&& metric) {
  double total = 0.0;
  int n = 0;
  for (int l : label_set) {
    if (!counts.of(l).present()) continue;
    total += metric(l);
    ++n;
  }
  if (n == 0) throw UndefinedMetricError("no evaluated class is present in either volume");
  return total / n;
}
}  // namespace

double miou(const ConfusionCounts& counts, const std::vector<int>& label_set) {
  return present_mean(counts, label_set, [&](int l) { return iou(counts, l); });
}

double mean_dsc(const ConfusionCounts& counts, const std::vector<int>& label_set, DiceDenominator denom) {
  return present_mean(counts, label_set, [&](int l) { return dsc(counts, l, denom); });
}

std::vector<int> default_label_set(int classes, bool include_background) {
  std::vector<int> out;
  for (int c = include_background ? 0 : 1; c < classes; ++c) out.push_back(c);
  return out;
}

MetricsReport evaluate(const LabelVolume& gt, const LabelVolume& pred,
                       const std::vector<int>& label_set, DiceDenominator denom) {
  const auto counts = confusion(gt, pred, label_set);
  MetricsReport r;
  r.label_set = label_set;
  for (const auto& c : counts.classes) {
    ClassMetrics m{c, std::nullopt, std::nullopt};
    if (c.present()) {
      m.iou = iou(counts, c.label);
      m.dsc = dsc(counts, c.label, denom);
    }
    r.classes.push_back(m);
  }
  r.miou = miou(counts, label_set);
  r.mean_dsc = mean_dsc(counts, label_set, denom);
  return r;
}

std::string report_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "class,present,intersection,gt,pred,union,iou,dsc\n";
  char buf[64];
  const auto num = [&](const std::optional<double>& v) -> std::string {
    if (!v) return "nan";
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
  };
  for (const auto& m : report.classes) {
    const auto& c = m.counts;
    os << c.label << ',' << (c.present() ? 1 : 0) << ',' << c.intersection << ',' << c.gt << ','
       << c.pred << ',' << c.union_ << ',' << num(m.iou) << ',' << num(m.dsc) << '\n';
  }
  os << "mIoU," << num(report.miou) << '\n';
  return os.str();
}

MetricsReport parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "class,present,intersection,gt,pred,union,iou,dsc") {
    throw FormatError("metrics CSV: unexpected header", 0);
  }
  MetricsReport r;
  std::uint64_t offset = line.size() + 1;
  bool have_summary = false;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    const auto opt = [](const std::string& s) -> std::optional<double> {
      if (s == "nan") return std::nullopt;
      return std::stod(s);
    };
    try {
      if (cells.size() == 2 && cells[0] == "mIoU") {
        r.miou = std::stod(cells[1]);
        have_summary = true;
      } else if (cells.size() == 8) {
        ClassMetrics m;
        m.counts.label = std::stoi(cells[0]);
        m.counts.intersection = std::stoull(cells[2]);
        m.counts.gt = std::stoull(cells[3]);
        m.counts.pred = std::stoull(cells[4]);
        m.counts.union_ = std::stoull(cells[5]);
        m.iou = opt(cells[6]);
        m.dsc = opt(cells[7]);
        r.label_set.push_back(m.counts.label);
        r.classes.push_back(m);
      } else {
        throw FormatError("metrics CSV: malformed row '" + line + "'", offset);
      }
    } catch (const std::logic_error&) {
      throw FormatError("metrics CSV: bad number in '" + line + "'", offset);
    }
    offset += line.size() + 1;
  }
  if (!have_summary) throw FormatError("metrics CSV: missing mIoU row", offset);
  double total = 0;
  int n = 0;
  for (const auto& m : r.classes)
    if (m.dsc) total += *m.dsc, ++n;
  r.mean_dsc = n ? total / n : 0.0;
  return r;
}

void write_report(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << report_csv(report);
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace vxseg
