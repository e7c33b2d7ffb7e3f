#include <cmath>
#include <map>

#include "doctest.h"
#include "test_support.hpp"
#include "vxseg/errors.hpp"
#include "vxseg/metrics.hpp"
#include "vxseg/phantom.hpp"

using namespace vxseg;
using vxseg::testing::random_labels;

namespace {

// Two 2x2x2 cubes offset by one voxel along x: 4 shared voxels.
std::pair<LabelVolume, LabelVolume> cube_fixture() {
  LabelVolume a({4, 4, 4}, {}, 0), b({4, 4, 4}, {}, 0);
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        a(x, y, z) = 1;
        b(x + 1, y, z) = 1;
      }
  return {a, b};
}

struct OracleCounts {
  std::uint64_t inter = 0, gt = 0, pred = 0, uni = 0;
};

std::map<int, OracleCounts> brute_force(const LabelVolume& gt, const LabelVolume& pred, int classes) {
  std::map<int, OracleCounts> out;
  for (int c = 0; c < classes; ++c) out[c];
  const Dims d = gt.dims();
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        const int g = gt(x, y, z), p = pred(x, y, z);
        for (int c = 0; c < classes; ++c) {
          const bool in_g = g == c, in_p = p == c;
          out[c].inter += in_g && in_p;
          out[c].gt += in_g;
          out[c].pred += in_p;
          out[c].uni += in_g || in_p;
        }
      }
  return out;
}

}  // namespace

TEST_CASE("cube fixture") {
  const auto [a, b] = cube_fixture();
  const std::vector<int> set = {1};
  const auto c = confusion(a, b, set);
  CHECK(c.of(1).intersection == 4);
  CHECK(c.of(1).union_ == 12);
  CHECK(iou(c, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(dsc(c, 1) == 0.5);
  CHECK(2.0 * (1.0 / 3.0) / (1.0 + 1.0 / 3.0) == doctest::Approx(dsc(c, 1)).epsilon(1e-15));
  CHECK(dsc(c, 1, DiceDenominator::set_union) == doctest::Approx(8.0 / 12.0));
}

TEST_CASE("identical and disjoint masks") {
  const auto l = random_labels({5, 6, 7}, 6, 3);
  const auto set = default_label_set(6, true);
  const auto c = confusion(l, l, set);
  for (const auto& k : c.classes) {
    CHECK(k.intersection == k.gt);
    CHECK(k.gt == k.pred);
    CHECK(k.pred == k.union_);
  }
  CHECK(miou(c, set) == 1.0);
  CHECK(mean_dsc(c, set) == 1.0);

  LabelVolume a({4, 1, 1}, {}, std::vector<std::uint8_t>{1, 1, 0, 0});
  LabelVolume b({4, 1, 1}, {}, std::vector<std::uint8_t>{0, 0, 1, 1});
  const auto d = confusion(a, b, {1});
  CHECK(d.of(1).intersection == 0);
  CHECK(iou(d, 1) == 0.0);
  CHECK(dsc(d, 1) == 0.0);
}

TEST_CASE("absent classes") {
  LabelVolume a({2, 2, 1}, {}, std::vector<std::uint8_t>{0, 1, 1, 0});
  const auto set = default_label_set(6);
  CHECK(set == std::vector<int>{1, 2, 3, 4, 5});
  const auto c = confusion(a, a, set);
  CHECK_THROWS_AS(iou(c, 3), UndefinedMetricError);
  CHECK(miou(c, set) == 1.0);
  const LabelVolume bg({2, 2, 1}, {}, 0);
  CHECK_THROWS_AS(miou(confusion(bg, bg, set), set), UndefinedMetricError);
  const auto report = evaluate(a, a, set);
  CHECK(report.classes.size() == 5);
  CHECK_FALSE(report.classes[2].iou.has_value());
  CHECK_THROWS_AS(confusion(a, LabelVolume({2, 1, 2}, {}, 0), set), ContractError);
}

TEST_CASE("metrics match a brute-force counting oracle") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    CounterRng rng(s);
    const Dims d{static_cast<int>(rng.uniform_int(1, 8)), static_cast<int>(rng.uniform_int(1, 8)),
                 static_cast<int>(rng.uniform_int(1, 8))};
    const int classes = static_cast<int>(rng.uniform_int(2, 6));
    const auto gt = random_labels(d, classes, 1000 + s);
    const auto pred = random_labels(d, classes, 2000 + s);
    const auto set = default_label_set(classes, true);
    const auto oracle = brute_force(gt, pred, classes);
    const auto c = confusion(gt, pred, set);
    double iou_sum = 0.0;
    int present = 0;
    for (int k = 0; k < classes; ++k) {
      const auto& o = oracle.at(k);
      const auto& got = c.of(k);
      CHECK(got.intersection == o.inter);
      CHECK(got.gt == o.gt);
      CHECK(got.pred == o.pred);
      CHECK(got.union_ == o.uni);
      if (o.uni == 0) continue;
      const double i = static_cast<double>(o.inter) / static_cast<double>(o.uni);
      const double dc = 2.0 * static_cast<double>(o.inter) / static_cast<double>(o.gt + o.pred);
      CHECK(iou(c, k) == i);
      CHECK(dsc(c, k) == dc);
      CHECK(std::abs(dc - 2.0 * i / (1.0 + i)) < 1e-12);
      iou_sum += i;
      ++present;
    }
    CHECK(miou(c, set) == doctest::Approx(iou_sum / present).epsilon(1e-15));
  }
}

TEST_CASE("phantom labels vs their thick reconstruction") {
  const auto p = generate_phantom(21, {32, 32, 32}, 4);
  const LabelVolume coarse = replicate_z(p.thick_labels, 4);
  const auto oracle = brute_force(p.thin_labels, coarse, 6);
  const auto report = evaluate(p.thin_labels, coarse, default_label_set(6));
  double sum = 0.0;
  int n = 0;
  for (const auto& m : report.classes) {
    const auto& o = oracle.at(m.counts.label);
    CHECK(m.counts.intersection == o.inter);
    if (o.uni == 0) continue;
    CHECK(*m.iou == static_cast<double>(o.inter) / static_cast<double>(o.uni));
    sum += *m.iou;
    ++n;
  }
  CHECK(report.miou == doctest::Approx(sum / n).epsilon(1e-15));
}

TEST_CASE("report CSV round trip") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto gt = random_labels({5, 5, 5}, 4, s), pred = random_labels({5, 5, 5}, 4, 50 + s);
    const auto r = evaluate(gt, pred, default_label_set(6));
    const std::string csv = report_csv(r);
    CHECK(csv.rfind("class,present,intersection,gt,pred,union,iou,dsc\n", 0) == 0);
    CHECK(csv.find("nan") != std::string::npos);
    const auto back = parse_report_csv(csv);
    CHECK(report_csv(back) == csv);
    CHECK(back.miou == r.miou);
    REQUIRE(back.classes.size() == r.classes.size());
    for (std::size_t i = 0; i < r.classes.size(); ++i) CHECK(back.classes[i].iou == r.classes[i].iou);
  }
  CHECK_THROWS_AS(parse_report_csv("nope\n"), FormatError);
}
