#include "cada/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "cada/errors.hpp"
#include "cada/image_io.hpp"

namespace cada {

ConfusionCounts confusion(const Tensor& pred, const Tensor& gt) {
  if (!pred.same_shape(gt))
    throw std::invalid_argument("confusion: shape mismatch " + shape_str(pred) + " vs " +
                                shape_str(gt));
  ConfusionCounts c;
  for (int i = 0; i < pred.numel(); ++i) {
    const double p = pred[i], g = gt[i];
    if ((p != 0.0 && p != 1.0) || (g != 0.0 && g != 1.0))
      throw std::invalid_argument("confusion: inputs must be binary (index " + std::to_string(i) +
                                  ")");
    if (p == 1.0) {
      g == 1.0 ? ++c.tp : ++c.fp;
    } else {
      g == 1.0 ? ++c.fn : ++c.tn;
    }
  }
  return c;
}

MetricTriple metrics(const ConfusionCounts& c) {
  MetricTriple m;
  m.recall = c.tp + c.fn == 0 ? 1.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
  m.precision = c.tp + c.fp == 0 ? 1.0 : static_cast<double>(c.tp) / (c.tp + c.fp);
  m.dice = 2 * c.tp + c.fp + c.fn == 0 ? 1.0
                                       : 2.0 * static_cast<double>(c.tp) / (2 * c.tp + c.fp + c.fn);
  return m;
}

Tensor binarize(const Tensor& prob, double threshold) {
  Tensor out(prob.shape());
  for (int i = 0; i < prob.numel(); ++i) out[i] = prob[i] >= threshold ? 1.0 : 0.0;
  return out;
}

Tensor render_overlay(const Tensor& pred, const Tensor& gt, const Tensor& base) {
  if (!pred.same_shape(gt) || !pred.same_shape(base))
    throw std::invalid_argument("render_overlay: shape mismatch");
  int h = 0, w = 0;
  if (pred.ndim() == 3 && pred.dim(0) == 1) {
    h = pred.dim(1);
    w = pred.dim(2);
  } else if (pred.ndim() == 2) {
    h = pred.dim(0);
    w = pred.dim(1);
  } else {
    throw std::invalid_argument("render_overlay: expected [1,H,W] or [H,W], got " +
                                shape_str(pred));
  }
  Tensor rgb({3, h, w});
  const int plane = h * w;
  for (int i = 0; i < plane; ++i) {
    const bool p = pred[i] == 1.0, g = gt[i] == 1.0;
    double r, gc, b;
    if (p && g) {           // true positive
      r = 0.0; gc = 1.0; b = 0.0;
    } else if (!p && g) {   // false negative
      r = 1.0; gc = 0.0; b = 0.0;
    } else if (p && !g) {   // false positive
      r = 1.0; gc = 165.0 / 255.0; b = 0.0;
    } else {
      r = gc = b = base[i];
    }
    rgb[i] = r;
    rgb[plane + i] = gc;
    rgb[2 * plane + i] = b;
  }
  return rgb;
}

namespace {

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

SplitReport evaluate_split(const UNet& net, const std::vector<LoadedSample>& split, Domain domain,
                           const std::string& csv_path, const std::string& overlay_dir) {
  if (split.empty()) throw std::invalid_argument("evaluate_split: empty split");
  for (const LoadedSample& s : split)
    if (!s.labeled)
      throw std::invalid_argument("evaluate_split: sample '" + s.id + "' has no mask");

  SplitReport rep;
  for (const LoadedSample& s : split) {
    Tensor x({1, 1, s.image.dim(1), s.image.dim(2)});
    std::copy_n(s.image.data(), static_cast<std::size_t>(s.image.numel()), x.data());
    const Tensor prob = net.predict_eval(x, domain);
    Tensor pred({1, s.image.dim(1), s.image.dim(2)});
    std::copy_n(prob.data(), static_cast<std::size_t>(pred.numel()), pred.data());
    pred = binarize(pred);
    rep.ids.push_back(s.id);
    rep.per_image.push_back(metrics(confusion(pred, s.mask)));
    if (!overlay_dir.empty()) {
      const auto path = std::filesystem::path(overlay_dir) / (s.id + "_overlay.ppm");
      save_ppm(path.string(), render_overlay(pred, s.mask, s.image));
    }
  }

  const double n = static_cast<double>(rep.per_image.size());
  for (const MetricTriple& m : rep.per_image) {
    rep.mean.recall += m.recall / n;
    rep.mean.precision += m.precision / n;
    rep.mean.dice += m.dice / n;
  }
  for (const MetricTriple& m : rep.per_image) {
    rep.stddev.recall += (m.recall - rep.mean.recall) * (m.recall - rep.mean.recall) / n;
    rep.stddev.precision +=
        (m.precision - rep.mean.precision) * (m.precision - rep.mean.precision) / n;
    rep.stddev.dice += (m.dice - rep.mean.dice) * (m.dice - rep.mean.dice) / n;
  }
  rep.stddev.recall = std::sqrt(rep.stddev.recall);
  rep.stddev.precision = std::sqrt(rep.stddev.precision);
  rep.stddev.dice = std::sqrt(rep.stddev.dice);

  if (!csv_path.empty()) {
    std::ofstream os(csv_path, std::ios::binary);
    if (!os) throw DataError("cannot write report: " + csv_path);
    os << "id,recall,precision,dice\n";
    for (std::size_t i = 0; i < rep.ids.size(); ++i) {
      const MetricTriple& m = rep.per_image[i];
      os << rep.ids[i] << ',' << fmt4(m.recall) << ',' << fmt4(m.precision) << ','
         << fmt4(m.dice) << '\n';
    }
    os << "MEAN\xc2\xb1STD," << fmt4(rep.mean.recall) << "\xc2\xb1" << fmt4(rep.stddev.recall)
       << ',' << fmt4(rep.mean.precision) << "\xc2\xb1" << fmt4(rep.stddev.precision) << ','
       << fmt4(rep.mean.dice) << "\xc2\xb1" << fmt4(rep.stddev.dice) << '\n';
    os.close();
    if (!os) throw DataError("report write failed: " + csv_path);
  }
  return rep;
}

}  // namespace cada
