// Copyright 2026 The aesthetic-vae Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "aest/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "aest/errors.hpp"
#include "aest/rng.hpp"

namespace aest::inline AEST_PREC {

double mae(const std::vector<double>& preds, const std::vector<double>& truths) {
  require(!preds.empty(), "mae: empty input");
  require(preds.size() == truths.size(), "mae: " + std::to_string(preds.size()) + " predictions for " +
                                             std::to_string(truths.size()) + " truths");
  double s = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += std::abs(std::clamp(preds[i], kScaleMin, kScaleMax) - truths[i]);
  return s / static_cast<double>(preds.size());
}

std::vector<double> baseline_midpoint(std::size_t n) { return std::vector<double>(n, kScaleMidpoint); }

std::vector<double> baseline_median(const std::vector<double>& train_ratings, std::size_t n) {
  require(!train_ratings.empty(), "baseline_median: no training ratings");
  std::vector<double> v = train_ratings;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  const double median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  return std::vector<double>(n, median);
}

namespace {

std::pair<std::size_t, std::size_t> plane_dims(const Tensor& gray) {
  require(gray.rank() == 2 || (gray.rank() == 3 && gray.dim(0) == 1), "hog: expected a grayscale [H,W] image, got " +
                                                                         shape_string(gray.dims()));
  return {gray.dim(gray.rank() - 2), gray.dim(gray.rank() - 1)};
}

}  // namespace

Tensor grayscale(const Tensor& image) {
  require(image.rank() == 3, "grayscale: expected [C,H,W], got " + shape_string(image.dims()));
  const std::size_t c = image.dim(0), hw = image.dim(1) * image.dim(2);
  Tensor g({image.dim(1), image.dim(2)});
  for (std::size_t i = 0; i < hw; ++i) {
    double s = 0;
    for (std::size_t k = 0; k < c; ++k) s += image[k * hw + i];
    g[i] = static_cast<real>(s / static_cast<double>(c));
  }
  return g;
}

std::vector<double> hog_descriptor(const Tensor& gray, std::size_t cell, std::size_t bins) {
  const auto [h, w] = plane_dims(gray);
  require(cell > 0 && bins > 0, "hog: cell and bins must be positive");
  require(h % cell == 0 && w % cell == 0, "hog: cell " + std::to_string(cell) + " does not divide " +
                                              std::to_string(h) + "x" + std::to_string(w));
  auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
    return static_cast<double>(gray[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)]);
  };
  const std::size_t ch = h / cell, cw = w / cell;
  std::vector<double> out(ch * cw * bins, 0.0);
  const double bin_width = 180.0 / static_cast<double>(bins);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const auto iy = static_cast<std::ptrdiff_t>(y), ix = static_cast<std::ptrdiff_t>(x);
      // Differences of values that are equal up to a shared offset cancel exactly.
      const double gx = 0.5 * (px(iy, ix + 1) - px(iy, ix - 1));
      const double gy = 0.5 * (px(iy + 1, ix) - px(iy - 1, ix));
      const double mag = std::hypot(gx, gy);
      if (mag == 0) continue;
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      if (angle >= 180.0) angle -= 180.0;
      // Bin b is centred at b * bin_width; mass is shared with the next centre.
      const double p = angle / bin_width;
      const auto b0 = static_cast<std::size_t>(std::floor(p)) % bins;
      const double frac = p - std::floor(p);
      double* hist = &out[((y / cell) * cw + x / cell) * bins];
      hist[b0] += (1 - frac) * mag;
      hist[(b0 + 1) % bins] += frac * mag;
    }
  constexpr double kEps = 1e-6;
  for (std::size_t c = 0; c < ch * cw; ++c) {
    double ss = 0;
    for (std::size_t b = 0; b < bins; ++b) ss += out[c * bins + b] * out[c * bins + b];
    const double norm = std::sqrt(ss + kEps * kEps);
    for (std::size_t b = 0; b < bins; ++b) out[c * bins + b] /= norm;
  }
  return out;
}

std::vector<double> hog_features(const Tensor& gray, std::size_t cell, std::size_t bins) {
  std::vector<double> f = hog_descriptor(gray, cell, bins);
  const auto [h, w] = plane_dims(gray);
  constexpr std::size_t kPool = 8, kHist = 16;
  require(h % kPool == 0 && w % kPool == 0, "hog_features: image sides must be multiples of 8");
  const std::size_t py = h / kPool, pxw = w / kPool;
  for (std::size_t by = 0; by < kPool; ++by)
    for (std::size_t bx = 0; bx < kPool; ++bx) {
      double s = 0;
      for (std::size_t y = by * py; y < (by + 1) * py; ++y)
        for (std::size_t x = bx * pxw; x < (bx + 1) * pxw; ++x) s += gray[y * w + x];
      f.push_back(s / static_cast<double>(py * pxw));
    }
  std::vector<double> hist(kHist, 0.0);
  for (std::size_t i = 0; i < h * w; ++i) {
    const double v = std::clamp(static_cast<double>(gray[i]), 0.0, 1.0);
    hist[std::min(kHist - 1, static_cast<std::size_t>(v * kHist))] += 1;
  }
  for (double v : hist) f.push_back(v / static_cast<double>(h * w));
  return f;
}

SplitChoice best_split(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                       const std::vector<std::size_t>& rows, const std::vector<std::size_t>& features,
                       std::size_t min_leaf) {
  SplitChoice best;
  const std::size_t n = rows.size();
  const std::size_t leaf = std::max<std::size_t>(1, min_leaf);
  if (n < 2 * leaf) return best;
  double sum = 0, sumsq = 0;
  for (std::size_t r : rows) sum += y[r], sumsq += y[r] * y[r];
  const double parent = sumsq - sum * sum / static_cast<double>(n);
  const double tol = 1e-9 * (1 + std::abs(parent));
  std::vector<std::size_t> order(rows);
  for (std::size_t f : features) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
    double ls = 0, lss = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double yi = y[order[i]];
      ls += yi, lss += yi * yi;
      const std::size_t nl = i + 1, nr = n - nl;
      const double a = x[order[i]][f], b = x[order[i + 1]][f];
      if (nl < leaf || nr < leaf || !(a < b)) continue;
      const double rs = sum - ls, rss = sumsq - lss;
      const double sse = (lss - ls * ls / static_cast<double>(nl)) + (rss - rs * rs / static_cast<double>(nr));
      const double gain = parent - sse;
      if (gain > best.gain + tol) best = {static_cast<int>(f), 0.5 * (a + b), gain};
    }
  }
  return best;
}

namespace {

double mean_of(const std::vector<double>& y, const std::vector<std::size_t>& rows) {
  double s = 0;
  for (std::size_t r : rows) s += y[r];
  return s / static_cast<double>(rows.size());
}

Tree grow_tree(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
               std::vector<std::size_t> rows, std::size_t n_features, const ForestOptions& o, Rng& rng) {
  Tree tree;
  struct Pending {
    std::size_t node;
    std::vector<std::size_t> rows;
    std::size_t depth;
  };
  std::vector<Pending> stack;
  tree.push_back({});
  stack.push_back({0, std::move(rows), 0});
  const std::size_t m = o.max_features ? std::min(o.max_features, n_features) : (n_features + 2) / 3;
  std::vector<std::size_t> all(n_features);
  while (!stack.empty()) {
    Pending p = std::move(stack.back());
    stack.pop_back();
    tree[p.node].value = mean_of(y, p.rows);
    if (p.depth >= o.max_depth) continue;
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < m; ++i) std::swap(all[i], all[i + rng.index(n_features - i)]);
    std::vector<std::size_t> subset(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(subset.begin(), subset.end());
    const SplitChoice s = best_split(x, y, p.rows, subset, o.min_leaf);
    if (s.feature < 0) continue;
    std::vector<std::size_t> left, right;
    for (std::size_t r : p.rows) (x[r][static_cast<std::size_t>(s.feature)] <= s.threshold ? left : right).push_back(r);
    const int l = static_cast<int>(tree.size());
    tree.push_back({});
    tree.push_back({});
    tree[p.node].feature = s.feature;
    tree[p.node].threshold = s.threshold;
    tree[p.node].left = l;
    tree[p.node].right = l + 1;
    stack.push_back({static_cast<std::size_t>(l + 1), std::move(right), p.depth + 1});
    stack.push_back({static_cast<std::size_t>(l), std::move(left), p.depth + 1});
  }
  return tree;
}

}  // namespace

ForestModel forest_fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y, std::uint64_t seed,
                       const ForestOptions& options) {
  require(x.size() == y.size(), "forest_fit: feature and target counts differ");
  require(x.size() >= 2, "forest_fit: need at least 2 training rows");
  require(options.n_trees > 0, "forest_fit: n_trees must be positive");
  const std::size_t f = x.front().size();
  require(f > 0, "forest_fit: empty feature vectors");
  for (const auto& row : x) require(row.size() == f, "forest_fit: ragged feature matrix");
  ForestModel model{{}, seed, options};
  const std::size_t n = x.size();
  for (std::size_t t = 0; t < options.n_trees; ++t) {
    Rng rng(Rng::mix(seed, t));
    std::vector<std::size_t> rows(n);
    if (options.bootstrap)
      for (auto& r : rows) r = rng.index(n);
    else
      std::iota(rows.begin(), rows.end(), 0);
    model.trees.push_back(grow_tree(x, y, std::move(rows), f, options, rng));
  }
  return model;
}

double tree_predict(const Tree& tree, const std::vector<double>& x) {
  std::size_t i = 0;
  while (tree[i].feature >= 0)
    i = static_cast<std::size_t>(x.at(static_cast<std::size_t>(tree[i].feature)) <= tree[i].threshold ? tree[i].left
                                                                                                         : tree[i].right);
  return tree[i].value;
}

std::vector<double> forest_predict(const ForestModel& model, const std::vector<std::vector<double>>& x) {
  require(!model.trees.empty(), "forest_predict: empty forest");
  std::vector<double> out;
  std::vector<double> votes(model.trees.size());
  for (const auto& row : x) {
    for (std::size_t t = 0; t < model.trees.size(); ++t) votes[t] = tree_predict(model.trees[t], row);
    // Summing in sorted order keeps the result independent of tree order.
    std::sort(votes.begin(), votes.end());
    double s = 0;
    for (double v : votes) s += v;
    out.push_back(s / static_cast<double>(votes.size()));
  }
  return out;
}

std::vector<double> slerp(const std::vector<double>& h1, const std::vector<double>& h2, double t) {
  require(h1.size() == h2.size() && !h1.empty(), "slerp: vectors must be nonempty and of equal length");
  require(t >= 0 && t <= 1, "slerp: t must lie in [0,1]");
  const double n1 = std::sqrt(std::inner_product(h1.begin(), h1.end(), h1.begin(), 0.0));
  const double n2 = std::sqrt(std::inner_product(h2.begin(), h2.end(), h2.begin(), 0.0));
  require(n1 > 0 && n2 > 0, "slerp: zero vector");
  if (t == 0) return h1;
  if (t == 1) return h2;
  const double c = std::clamp(std::inner_product(h1.begin(), h1.end(), h2.begin(), 0.0) / (n1 * n2), -1.0, 1.0);
  const double omega = std::acos(c);
  std::vector<double> out(h1.size());
  // Nearly parallel or antipodal directions have no stable great circle.
  if (omega < 1e-4 || std::numbers::pi - omega < 1e-4) {
    for (std::size_t i = 0; i < h1.size(); ++i) out[i] = (1 - t) * h1[i] + t * h2[i];
    return out;
  }
  const double s = std::sin(omega);
  const double a = std::sin((1 - t) * omega) / s, b = std::sin(t * omega) / s;
  const double norm = (1 - t) * n1 + t * n2;
  for (std::size_t i = 0; i < h1.size(); ++i) out[i] = (a * h1[i] / n1 + b * h2[i] / n2) * norm;
  return out;
}

std::vector<double> project_to_sphere(std::vector<double> h) {
  const double n = std::sqrt(std::inner_product(h.begin(), h.end(), h.begin(), 0.0));
  require(n > 0, "project_to_sphere: zero vector");
  const double r = std::sqrt(static_cast<double>(h.size())) / n;
  for (double& v : h) v *= r;
  return h;
}

namespace {

constexpr std::size_t kInferenceChunk = 64;

StageConfig full_stage(const ParameterSet& params) { return {params.model().ladder.size() - 1, 1}; }

Tensor rows_tensor(const std::vector<std::vector<double>>& h, std::size_t b, std::size_t e, std::size_t k) {
  Tensor t({e - b, k});
  for (std::size_t i = b; i < e; ++i) {
    require(h[i].size() == k, "embedding length " + std::to_string(h[i].size()) + " differs from K=" +
                                  std::to_string(k));
    for (std::size_t j = 0; j < k; ++j) t[(i - b) * k + j] = static_cast<real>(h[i][j]);
  }
  return t;
}

// Rows [b, e) of an [N, C, R, R] stack, with single-channel images broadcast.
Tensor image_rows(const Tensor& images, std::size_t b, std::size_t e, const ModelConfig& model) {
  require(images.rank() == 4, "expected images [N,C,R,R], got " + shape_string(images.dims()));
  const std::size_t c = images.dim(1), r = images.dim(2);
  const std::size_t full = model.full_resolution(), want = model.image_channels;
  require(images.dim(2) == full && images.dim(3) == full,
          "expected " + std::to_string(full) + "x" + std::to_string(full) + " images, got " +
              std::to_string(images.dim(2)) + "x" + std::to_string(images.dim(3)));
  require(c == want || c == 1, "expected 1 or " + std::to_string(want) + " image channels, got " + std::to_string(c));
  Tensor out({e - b, want, r, r});
  const std::size_t plane = r * r;
  for (std::size_t n = b; n < e; ++n)
    for (std::size_t k = 0; k < want; ++k)
      std::copy_n(images.data() + (n * c + (c == 1 ? 0 : k)) * plane, plane, out.data() + ((n - b) * want + k) * plane);
  return out;
}

}  // namespace

std::vector<double> predict_from_embeddings(ParameterSet& params, const std::vector<std::vector<double>>& h) {
  const std::size_t k = params.model().embedding_dim;
  std::vector<double> out;
  for (std::size_t b = 0; b < h.size(); b += kInferenceChunk) {
    const std::size_t e = std::min(h.size(), b + kInferenceChunk);
    Tape tape;
    NetContext net(tape, params, {}, false);
    const Tensor& y = predict(net, tape.constant(rows_tensor(h, b, e, k))).value();
    for (std::size_t i = 0; i < e - b; ++i) out.push_back(y[i]);
  }
  return out;
}

std::vector<std::vector<double>> encode_means(ParameterSet& params, const Tensor& images,
                                              const std::vector<AttributeAssignment>& attrs) {
  require(images.rank() == 4 && images.dim(0) == attrs.size(), "encode_means: need one attribute row per image");
  const std::size_t k = params.model().embedding_dim;
  std::vector<std::vector<double>> out;
  for (std::size_t b = 0; b < attrs.size(); b += kInferenceChunk) {
    const std::size_t e = std::min(attrs.size(), b + kInferenceChunk);
    Tape tape;
    NetContext net(tape, params, {}, false);
    const std::vector<AttributeAssignment> a(attrs.begin() + static_cast<std::ptrdiff_t>(b),
                                             attrs.begin() + static_cast<std::ptrdiff_t>(e));
    Encoding enc = encode(net, tape.constant(image_rows(images, b, e, params.model())),
                          tape.constant(one_hot_batch(params.schema(), a)), full_stage(params));
    const Tensor mu = enc.mu.value();
    for (std::size_t i = 0; i < e - b; ++i) out.emplace_back(mu.data() + i * k, mu.data() + (i + 1) * k);
  }
  return out;
}

std::vector<double> predict_images(ParameterSet& params, const Tensor& images,
                                   const std::vector<AttributeAssignment>& attrs) {
  return predict_from_embeddings(params, encode_means(params, images, attrs));
}

GeneratedBatch generate_images(ParameterSet& params, const std::vector<std::vector<double>>& h,
                               const std::vector<AttributeAssignment>& attrs) {
  require(h.size() == attrs.size() && !h.empty(), "generate_images: need one attribute row per embedding");
  const ModelConfig& m = params.model();
  const std::size_t r = m.full_resolution(), c = m.image_channels, n = h.size();
  GeneratedBatch out{Tensor({n, c, r, r}), Tensor({n, 1, r, r})};
  for (std::size_t b = 0; b < n; b += kInferenceChunk) {
    const std::size_t e = std::min(n, b + kInferenceChunk);
    Tape tape;
    NetContext net(tape, params, {}, false);
    const std::vector<AttributeAssignment> a(attrs.begin() + static_cast<std::ptrdiff_t>(b),
                                             attrs.begin() + static_cast<std::ptrdiff_t>(e));
    Generated g = generate(net, tape.constant(rows_tensor(h, b, e, m.embedding_dim)),
                           tape.constant(one_hot_batch(params.schema(), a)), full_stage(params));
    const Tensor img = g.image.value(), msk = g.mask.value();
    std::copy(img.data(), img.data() + img.size(), out.image.data() + b * c * r * r);
    std::copy(msk.data(), msk.data() + msk.size(), out.mask.data() + b * r * r);
  }
  return out;
}

const MethodResult& BenchmarkReport::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.name == name) return m;
  contract_fail("benchmark report has no method '" + name + "'");
}

namespace {

MethodResult summarize(std::string name, std::vector<double> maes, bool deterministic) {
  MethodResult m{std::move(name), std::move(maes), 0, std::nullopt, 0};
  m.mean = std::accumulate(m.maes.begin(), m.maes.end(), 0.0) / static_cast<double>(m.maes.size());
  if (!deterministic) {
    double ss = 0;
    for (double v : m.maes) ss += (v - m.mean) * (v - m.mean);
    m.stddev = m.maes.size() > 1 ? std::sqrt(ss / static_cast<double>(m.maes.size() - 1)) : 0.0;
  }
  return m;
}

Tensor stack_images(const std::vector<const ImageSample*>& s) {
  require(!s.empty(), "no images to stack");
  const Shape d = s.front()->image.dims();
  Shape out{s.size()};
  out.insert(out.end(), d.begin(), d.end());
  Tensor t(out);
  const std::size_t n = s.front()->image.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    require(s[i]->image.dims() == d, "image shapes differ within a split");
    std::copy_n(s[i]->image.data(), n, t.data() + i * n);
  }
  return t;
}

}  // namespace

BenchmarkReport run_prediction_benchmark(const Dataset& ds, std::vector<ParameterSet*> models,
                                         const BenchmarkOptions& options) {
  std::vector<const ImageSample*> train, test;
  for (const auto& s : ds.samples) {
    if (!s.rated()) continue;
    if (s.split == Split::train) train.push_back(&s);
    if (s.split == Split::test) test.push_back(&s);
  }
  require(!test.empty(), "run_prediction_benchmark: dataset has no rated samples tagged 'test'");
  require(!train.empty(), "run_prediction_benchmark: dataset has no rated samples tagged 'train'");
  require(!options.forest_seeds.empty(), "run_prediction_benchmark: no forest seeds");

  std::vector<double> y_train, y_test;
  std::vector<std::vector<double>> f_train, f_test;
  for (auto* s : train) y_train.push_back(*s->rating), f_train.push_back(hog_features(grayscale(s->image)));
  for (auto* s : test) y_test.push_back(*s->rating), f_test.push_back(hog_features(grayscale(s->image)));

  BenchmarkReport report;
  report.test_items = test.size();
  report.methods.push_back(summarize("midpoint", {mae(baseline_midpoint(test.size()), y_test)}, true));
  report.methods.push_back(summarize("median", {mae(baseline_median(y_train, test.size()), y_test)}, true));
  std::vector<double> forest;
  for (auto seed : options.forest_seeds)
    forest.push_back(mae(forest_predict(forest_fit(f_train, y_train, seed, options.forest), f_test), y_test));
  report.methods.push_back(summarize("hog_forest", forest, false));

  if (models.empty()) {
    report.partial = true;
    report.notes.push_back("no trained model supplied; baselines only");
  } else {
    const Tensor images = stack_images(test);
    std::vector<AttributeAssignment> attrs;
    for (auto* s : test) attrs.push_back(s->attributes);
    std::vector<double> deep;
    for (ParameterSet* p : models) {
      require(p != nullptr, "run_prediction_benchmark: null model");
      require(p->schema() == ds.schema, "run_prediction_benchmark: model schema differs from the dataset's");
      deep.push_back(mae(predict_images(*p, images, attrs), y_test));
    }
    report.methods.push_back(summarize("deep", deep, false));
  }
  const double mid = report.methods.front().mean;
  for (auto& m : report.methods) m.improvement = mid > 0 ? (mid - m.mean) / mid : 0;
  report.notes.push_back("pretrained-CNN baseline omitted: it needs externally distributed weights");
  return report;
}

double mask_iou(const Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), "mask_iou: mask sizes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] > real(0.5), y = b[i] > real(0.5);
    inter += x && y;
    uni += x || y;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

namespace {

struct ParamAxis {
  double ShapeParams::*field;
  double lo, hi;
  std::vector<double> grid;
};

const std::vector<ParamAxis>& param_axes() {
  static const std::vector<ParamAxis> axes = {
      {&ShapeParams::aspect, 0.3, 1.3, {0.35, 0.55, 0.8, 1.05, 1.3}},
      {&ShapeParams::roundness, 0, 1, {0.1, 0.4, 0.7, 0.95}},
      {&ShapeParams::beltline, -1, 1, {-0.5, 0, 0.5}},
      {&ShapeParams::wheel, 0.1, 0.4, {0.15, 0.25, 0.35}},
      {&ShapeParams::greenhouse, 0.2, 0.6, {0.25, 0.4, 0.55}},
  };
  return axes;
}

}  // namespace

ShapeFit fit_shape(const Tensor& mask, bool three_quarter) {
  require(mask.rank() >= 2, "fit_shape: expected a mask image");
  const std::size_t r = mask.dim(mask.rank() - 1);
  require(mask.dim(mask.rank() - 2) == r, "fit_shape: mask must be square");
  const auto& axes = param_axes();
  auto score = [&](const ShapeParams& p) { return mask_iou(render_mask(p, three_quarter, r), mask); };

  ShapeFit best{{}, -1};
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    ShapeParams p;
    for (std::size_t a = 0; a < axes.size(); ++a) p.*(axes[a].field) = axes[a].grid[idx[a]];
    const double s = score(p);
    if (s > best.iou) best = {p, s};
    std::size_t a = 0;
    while (a < axes.size() && ++idx[a] == axes[a].grid.size()) idx[a++] = 0;
    if (a == axes.size()) break;
  }
  std::vector<double> step;
  for (const auto& ax : axes) step.push_back((ax.hi - ax.lo) / 8);
  for (int round = 0; round < 6; ++round) {
    for (std::size_t a = 0; a < axes.size(); ++a) {
      bool moved = true;
      while (moved) {
        moved = false;
        for (double dir : {-1.0, 1.0}) {
          ShapeParams p = best.params;
          double& v = p.*(axes[a].field);
          v = std::clamp(v + dir * step[a], axes[a].lo, axes[a].hi);
          if (v == best.params.*(axes[a].field)) continue;
          const double s = score(p);
          if (s > best.iou) {
            best = {p, s};
            moved = true;
            break;
          }
        }
      }
    }
    for (double& s : step) s /= 2;
  }
  return best;
}

double cross_pair_agreement(const std::vector<double>& high, const std::vector<double>& low) {
  require(!high.empty() && !low.empty(), "cross_pair_agreement: empty arm");
  double wins = 0;
  for (double a : high)
    for (double b : low) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return wins / static_cast<double>(high.size() * low.size());
}

namespace {

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double f = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] * (1 - f) + v[i + 1] * f : v[i];
}

std::vector<double> prior_draw(Rng& rng, std::size_t k) {
  std::vector<double> h(k);
  for (double& v : h) v = rng.normal();
  return project_to_sphere(std::move(h));
}

}  // namespace

GenerationStudy run_generation_study(ParameterSet& params, const GenerationStudyOptions& o) {
  require(o.n_per_arm > 0, "run_generation_study: n_per_arm must be positive");
  require(o.calibration_draws >= 2, "run_generation_study: need at least 2 calibration draws");
  const AttributeSchema& schema = params.schema();
  AttributeAssignment attrs(schema.size(), 0);
  for (const auto& [name, level] : o.condition) {
    const std::size_t c = schema.index_of(name);
    attrs[c] = schema.level_index(c, level);
  }
  const bool three_quarter = world_attributes(schema, attrs).three_quarter;
  const std::size_t k = params.model().embedding_dim;
  Rng rng(Rng::mix(o.seed, 0x57D7));
  constexpr std::size_t kBatch = 256;
  auto draw_batch = [&](std::size_t n) {
    std::vector<std::vector<double>> h;
    for (std::size_t i = 0; i < n; ++i) h.push_back(prior_draw(rng, k));
    std::vector<double> y = predict_from_embeddings(params, h);
    for (double& v : y) v = std::clamp(v, kScaleMin, kScaleMax);
    return std::make_pair(std::move(h), std::move(y));
  };

  GenerationStudy st;
  {
    const auto [h, y] = draw_batch(o.calibration_draws);
    st.threshold_high = o.threshold_high.value_or(percentile(y, 0.8));
    st.threshold_low = o.threshold_low.value_or(percentile(y, 0.2));
  }
  std::size_t budget = o.max_draws;
  bool deal_high = true;
  while (st.high.size() < o.n_per_arm || st.low.size() < o.n_per_arm) {
    if (st.draws >= budget) {
      // Narrow the gap around its centre and keep sampling.
      const double mid = 0.5 * (st.threshold_high + st.threshold_low);
      st.threshold_high = mid + 0.5 * (st.threshold_high - mid);
      st.threshold_low = mid - 0.5 * (mid - st.threshold_low);
      st.relaxed = true;
      budget += o.max_draws;
      require(budget <= 20 * o.max_draws, "run_generation_study: could not fill both arms");
    }
    const auto [h, y] = draw_batch(kBatch);
    for (std::size_t i = 0; i < h.size() && st.draws < budget; ++i) {
      const bool want_high = st.high.size() < o.n_per_arm, want_low = st.low.size() < o.n_per_arm;
      if (!want_high && !want_low) break;
      ++st.draws;
      StudyDesign d{h[i], y[i], 0, 0};
      if (o.null_arms) {
        if (want_high && (deal_high || !want_low)) st.high.push_back(std::move(d));
        else if (want_low) st.low.push_back(std::move(d));
        deal_high = !deal_high;
      } else if (want_high && y[i] >= st.threshold_high) {
        st.high.push_back(std::move(d));
      } else if (want_low && y[i] <= st.threshold_low) {
        st.low.push_back(std::move(d));
      }
    }
  }

  auto score_arm = [&](std::vector<StudyDesign>& arm) {
    std::vector<std::vector<double>> h;
    for (const auto& d : arm) h.push_back(d.h);
    const GeneratedBatch g = generate_images(params, h, std::vector<AttributeAssignment>(arm.size(), attrs));
    const std::size_t r = params.model().full_resolution();
    std::vector<double> scores;
    for (std::size_t i = 0; i < arm.size(); ++i) {
      Tensor m({1, r, r});
      std::copy_n(g.mask.data() + i * r * r, r * r, m.data());
      const ShapeFit fit = fit_shape(m, three_quarter);
      arm[i].oracle = oracle_rating(fit.params);
      arm[i].fit_iou = fit.iou;
      scores.push_back(arm[i].oracle);
    }
    return scores;
  };
  const std::vector<double> hs = score_arm(st.high), ls = score_arm(st.low);
  st.agreement = cross_pair_agreement(hs, ls);
  return st;
}

}  // namespace aest::inline AEST_PREC
