#include "cada/bn_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "cada/errors.hpp"
#include "cada/rng.hpp"
#include "cada/trainer.hpp"

namespace cada {

const char* depth_class_name(DepthClass c) {
  switch (c) {
    case DepthClass::Shallow: return "shallow";
    case DepthClass::Intermediate: return "intermediate";
    case DepthClass::Deep: return "deep";
  }
  return "?";
}

namespace {

std::vector<double> stat_vector(const VsbnLayer& bn) {
  const Tensor& mean = bn.last_batch_mean();
  const Tensor& var = bn.last_batch_var();
  const int c = mean.numel();
  std::vector<double> v(static_cast<std::size_t>(2 * c));
  for (int i = 0; i < c; ++i) {
    v[static_cast<std::size_t>(i)] = mean[i];
    v[static_cast<std::size_t>(c + i)] = std::sqrt(std::max(0.0, var[i]));
  }
  return v;
}

}  // namespace

std::vector<BnStatRecord> collect_bn_stats(const UNet& net,
                                           const std::vector<LoadedSample>& source_split,
                                           const std::vector<LoadedSample>& target_split,
                                           int n_batches, int batch_size, std::uint64_t seed) {
  if (n_batches < 2)
    throw std::invalid_argument("collect_bn_stats: need at least 2 batches per domain");
  if (batch_size < 2)
    throw std::invalid_argument("collect_bn_stats: need batch_size >= 2 for batch statistics");
  if (source_split.empty() || target_split.empty())
    throw DataError("collect_bn_stats: both domain splits must be nonempty");

  UNet probe = net;  // TRAIN forwards mutate running stats; keep the original intact
  std::vector<BnStatRecord> records;
  records.reserve(static_cast<std::size_t>(2 * 3 * n_batches));

  const Domain domains[2] = {Domain::Source, Domain::Target};
  for (const Domain d : domains) {
    const auto& split = (d == Domain::Source) ? source_split : target_split;
    DeckSampler deck(static_cast<int>(split.size()), mix_seed(seed, "batches"));
    for (int b = 0; b < n_batches; ++b) {
      const Tensor x = stack_images(split, deck.draw(batch_size));
      probe.predict(x, d, Mode::Train);
      const struct {
        DepthClass cls;
        const VsbnLayer* bn;
      } taps[3] = {{DepthClass::Shallow, &probe.first_encoder_bn()},
                   {DepthClass::Intermediate, &probe.bottleneck_bn()},
                   {DepthClass::Deep, &probe.last_decoder_bn()}};
      for (const auto& tap : taps)
        records.push_back({tap.bn->id(), tap.cls, d, stat_vector(*tap.bn)});
    }
  }
  return records;
}

namespace {

// Cyclic Jacobi eigen-decomposition of a symmetric matrix. a is n x n
// row-major and is destroyed; v receives eigenvectors in columns.
void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& eigvals,
                  std::vector<double>& v) {
  v.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;

  const auto at = [&](int r, int c) -> double& { return a[static_cast<std::size_t>(r) * n + c]; };
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale += at(i, j) * at(i, j);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += 2.0 * at(i, j) * at(i, j);
    if (off <= 1e-28 * scale || off == 0.0) break;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (std::abs(apq) == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (int k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const std::size_t kp = static_cast<std::size_t>(k) * n + p;
          const std::size_t kq = static_cast<std::size_t>(k) * n + q;
          const double vkp = v[kp];
          const double vkq = v[kq];
          v[kp] = c * vkp - s * vkq;
          v[kq] = s * vkp + c * vkq;
        }
      }
    }
  }

  eigvals.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) eigvals[static_cast<std::size_t>(i)] = at(i, i);
}

}  // namespace

std::vector<std::array<double, 2>> pca_embed_2d(const std::vector<std::vector<double>>& vectors) {
  const int npts = static_cast<int>(vectors.size());
  if (npts < 3) throw std::invalid_argument("pca_embed_2d: need at least 3 records");
  const int dim = static_cast<int>(vectors.front().size());
  for (const auto& v : vectors)
    if (static_cast<int>(v.size()) != dim)
      throw std::invalid_argument("pca_embed_2d: records have mismatched lengths");
  if (dim < 1) throw std::invalid_argument("pca_embed_2d: empty records");

  std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
  for (const auto& v : vectors)
    for (int j = 0; j < dim; ++j) mean[static_cast<std::size_t>(j)] += v[static_cast<std::size_t>(j)];
  for (double& m : mean) m /= npts;

  std::vector<std::vector<double>> centered(vectors.size());
  double total_var = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    centered[i].resize(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      const double c = vectors[i][static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)];
      centered[i][static_cast<std::size_t>(j)] = c;
      total_var += c * c;
    }
  }

  std::vector<std::array<double, 2>> points(vectors.size(), {0.0, 0.0});
  if (total_var <= 1e-300) return points;

  std::vector<double> cov(static_cast<std::size_t>(dim) * dim, 0.0);
  for (const auto& row : centered)
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j)
        cov[static_cast<std::size_t>(i) * dim + j] +=
            row[static_cast<std::size_t>(i)] * row[static_cast<std::size_t>(j)];
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) {
      const double c = cov[static_cast<std::size_t>(i) * dim + j] / npts;
      cov[static_cast<std::size_t>(i) * dim + j] = c;
      cov[static_cast<std::size_t>(j) * dim + i] = c;
    }

  std::vector<double> eigvals, eigvecs;
  jacobi_eigen(cov, dim, eigvals, eigvecs);

  std::vector<int> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ea = eigvals[static_cast<std::size_t>(a)];
    const double eb = eigvals[static_cast<std::size_t>(b)];
    if (ea != eb) return ea > eb;
    return a < b;
  });

  for (int comp = 0; comp < 2 && comp < dim; ++comp) {
    const int col = order[static_cast<std::size_t>(comp)];
    std::vector<double> axis(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i)
      axis[static_cast<std::size_t>(i)] = eigvecs[static_cast<std::size_t>(i) * dim + col];
    int peak = 0;
    for (int i = 1; i < dim; ++i)
      if (std::abs(axis[static_cast<std::size_t>(i)]) > std::abs(axis[static_cast<std::size_t>(peak)]))
        peak = i;
    if (axis[static_cast<std::size_t>(peak)] < 0.0)
      for (double& x : axis) x = -x;
    for (std::size_t i = 0; i < centered.size(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < dim; ++j)
        dot += centered[i][static_cast<std::size_t>(j)] * axis[static_cast<std::size_t>(j)];
      points[i][static_cast<std::size_t>(comp)] = dot;
    }
  }
  return points;
}

namespace {

double point_dist(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double silhouette_separability(const std::vector<std::array<double, 2>>& points,
                               const std::vector<int>& labels) {
  const std::size_t n = points.size();
  if (labels.size() != n)
    throw std::invalid_argument("silhouette: points/labels size mismatch");

  std::vector<int> distinct(labels);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2)
    throw std::invalid_argument("silhouette: need at least two distinct labels");
  for (const int lab : distinct) {
    const auto count = std::count(labels.begin(), labels.end(), lab);
    if (count < 2)
      throw std::invalid_argument("silhouette: every label needs at least 2 points");
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double own_sum = 0.0;
    long own_count = 0;
    double best_other = 0.0;
    bool have_other = false;
    for (const int lab : distinct) {
      if (lab == labels[i]) continue;
      double sum = 0.0;
      long count = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (labels[j] != lab) continue;
        sum += point_dist(points[i], points[j]);
        ++count;
      }
      const double mean = sum / static_cast<double>(count);
      if (!have_other || mean < best_other) {
        best_other = mean;
        have_other = true;
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || labels[j] != labels[i]) continue;
      own_sum += point_dist(points[i], points[j]);
      ++own_count;
    }
    const double a = own_sum / static_cast<double>(own_count);
    const double b = best_other;
    const double denom = std::max(a, b);
    total += (denom > 0.0) ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

double permuted_silhouette(const std::vector<std::array<double, 2>>& points,
                           const std::vector<int>& labels, int n_perms, std::uint64_t seed) {
  if (n_perms < 1) throw std::invalid_argument("permuted_silhouette: need n_perms >= 1");
  double total = 0.0;
  for (int p = 0; p < n_perms; ++p) {
    std::vector<int> shuffled(labels);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(p)));
    rng.shuffle(shuffled);
    total += silhouette_separability(points, shuffled);
  }
  return total / n_perms;
}

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<BnLayerReport> analyze_bn(const UNet& net,
                                      const std::vector<LoadedSample>& source_split,
                                      const std::vector<LoadedSample>& target_split,
                                      const std::string& out_dir, int n_batches, int batch_size,
                                      std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + out_dir + ": " + ec.message());

  const auto records = collect_bn_stats(net, source_split, target_split, n_batches, batch_size,
                                        mix_seed(seed, "collect"));

  std::vector<BnLayerReport> reports;
  const DepthClass classes[3] = {DepthClass::Shallow, DepthClass::Intermediate, DepthClass::Deep};
  for (const DepthClass cls : classes) {
    std::vector<std::vector<double>> vectors;
    std::vector<int> labels;
    std::string layer_id;
    for (const auto& r : records) {
      if (r.depth_class != cls) continue;
      vectors.push_back(r.vector);
      labels.push_back(static_cast<int>(r.domain));
      layer_id = r.layer_id;
    }

    const std::string tag = depth_class_name(cls);
    const auto stats_path = std::filesystem::path(out_dir) / ("bnstats_" + tag + ".csv");
    std::ofstream sf(stats_path, std::ios::binary);
    if (!sf) throw DataError("cannot write " + stats_path.string());
    const int channels = static_cast<int>(vectors.front().size()) / 2;
    sf << "domain";
    for (int i = 0; i < channels; ++i) sf << ",mean_" << i;
    for (int i = 0; i < channels; ++i) sf << ",std_" << i;
    sf << '\n';
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      sf << domain_name(labels[i] == 0 ? Domain::Source : Domain::Target);
      for (const double v : vectors[i]) sf << ',' << fmt17(v);
      sf << '\n';
    }
    sf.close();
    if (!sf) throw DataError("write failed: " + stats_path.string());

    const auto points = pca_embed_2d(vectors);
    const auto embed_path = std::filesystem::path(out_dir) / ("bnstats_" + tag + "_embed.csv");
    std::ofstream ef(embed_path, std::ios::binary);
    if (!ef) throw DataError("cannot write " + embed_path.string());
    ef << "x,y,domain\n";
    for (std::size_t i = 0; i < points.size(); ++i)
      ef << fmt17(points[i][0]) << ',' << fmt17(points[i][1]) << ','
         << domain_name(labels[i] == 0 ? Domain::Source : Domain::Target) << '\n';
    ef.close();
    if (!ef) throw DataError("write failed: " + embed_path.string());

    BnLayerReport rep;
    rep.depth_class = cls;
    rep.layer_id = layer_id;
    rep.silhouette = silhouette_separability(points, labels);
    rep.permuted = permuted_silhouette(points, labels, 10, mix_seed(seed, "perm." + tag));
    reports.push_back(rep);
  }
  return reports;
}

}  // namespace cada
