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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aest/nets.hpp"
#include "aest/synth/dataset.hpp"

namespace aest::inline AEST_PREC {

inline constexpr double kScaleMin = 1;
inline constexpr double kScaleMax = 5;
inline constexpr double kScaleMidpoint = 3;

// Mean |clamp(pred) - truth|.
double mae(const std::vector<double>& preds, const std::vector<double>& truths);
std::vector<double> baseline_midpoint(std::size_t n);
std::vector<double> baseline_median(const std::vector<double>& train_ratings, std::size_t n);

// Cell histograms of unsigned gradient orientation, each L2-normalized.
std::vector<double> hog_descriptor(const Tensor& gray, std::size_t cell = 4, std::size_t bins = 9);
// HOG, then the 8x8 average-pooled image, then a 16-bin intensity histogram.
std::vector<double> hog_features(const Tensor& gray, std::size_t cell = 4, std::size_t bins = 9);
// Channel mean of a [C, H, W] image as [H, W].
Tensor grayscale(const Tensor& image);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1, right = -1;
  double value = 0;  // leaf mean
};
using Tree = std::vector<TreeNode>;  // node 0 is the root

struct ForestOptions {
  std::size_t n_trees = 100;
  std::size_t max_depth = 12;
  std::size_t min_leaf = 2;
  std::size_t max_features = 0;  // 0 means ceil(F/3)
  bool bootstrap = true;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::uint64_t seed = 0;
  ForestOptions options;
};

struct SplitChoice {
  int feature = -1;  // -1 when no split reduces the squared error
  double threshold = 0;
  double gain = 0;   // parent SSE minus children SSE
};
// Best variance-reduction split of `rows` over the candidate features. A later
// candidate must beat the best by 1e-9 (1 + parent SSE), so ties go to the
// earlier feature and the lower threshold; thresholds sit halfway between
// adjacent distinct values.
SplitChoice best_split(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                       const std::vector<std::size_t>& rows, const std::vector<std::size_t>& features,
                       std::size_t min_leaf);

ForestModel forest_fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y, std::uint64_t seed,
                       const ForestOptions& options = {});
double tree_predict(const Tree& tree, const std::vector<double>& x);
std::vector<double> forest_predict(const ForestModel& model, const std::vector<std::vector<double>>& x);

// Spherical interpolation of directions, linear interpolation of norms.
std::vector<double> slerp(const std::vector<double>& h1, const std::vector<double>& h2, double t);
// Rescale to radius sqrt(K).
std::vector<double> project_to_sphere(std::vector<double> h);

// Full-resolution inference with frozen spectral estimates.
std::vector<double> predict_from_embeddings(ParameterSet& params, const std::vector<std::vector<double>>& h);
std::vector<std::vector<double>> encode_means(ParameterSet& params, const Tensor& images,
                                              const std::vector<AttributeAssignment>& attrs);
std::vector<double> predict_images(ParameterSet& params, const Tensor& images,
                                   const std::vector<AttributeAssignment>& attrs);
struct GeneratedBatch {
  Tensor image;  // [N, C, R, R]
  Tensor mask;   // [N, 1, R, R]
};
GeneratedBatch generate_images(ParameterSet& params, const std::vector<std::vector<double>>& h,
                               const std::vector<AttributeAssignment>& attrs);

struct MethodResult {
  std::string name;
  std::vector<double> maes;  // one per seed; a single entry for deterministic baselines
  double mean = 0;
  std::optional<double> stddev;  // absent for deterministic baselines
  double improvement = 0;        // (mae_midpoint - mean) / mae_midpoint
};

struct BenchmarkOptions {
  std::vector<std::uint64_t> forest_seeds = {0, 1, 2, 3, 4};
  ForestOptions forest;
};

struct BenchmarkReport {
  std::size_t test_items = 0;
  std::vector<MethodResult> methods;  // midpoint, median, forest, then deep when present
  bool partial = false;               // no trained model was supplied
  std::vector<std::string> notes;

  const MethodResult& method(const std::string& name) const;
};

// All methods are scored on the rated test samples. `models` holds one trained
// parameter set per seed; an empty list runs the baselines only.
BenchmarkReport run_prediction_benchmark(const Dataset& ds, std::vector<ParameterSet*> models,
                                         const BenchmarkOptions& options = {});

struct ShapeFit {
  ShapeParams params;
  double iou = 0;
};
double mask_iou(const Tensor& a, const Tensor& b);
// Grid search over ShapeParams refined by coordinate descent on IoU.
ShapeFit fit_shape(const Tensor& mask, bool three_quarter);

struct GenerationStudyOptions {
  std::size_t n_per_arm = 25;
  std::optional<double> threshold_high;  // default: 80th percentile of prior predictions
  std::optional<double> threshold_low;   // default: 20th percentile
  bool null_arms = false;  // both gates accept every draw; draws are dealt to the arms alternately
  std::size_t calibration_draws = 1000;
  std::size_t max_draws = 100000;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> condition = {
      {"bodytype", "boxy"}, {"viewpoint", "side"}, {"shade", "light"}};
};

struct StudyDesign {
  std::vector<double> h;
  double predicted = 0;
  double oracle = 0;
  double fit_iou = 0;
};

struct GenerationStudy {
  double threshold_high = 0, threshold_low = 0;
  std::size_t draws = 0;
  bool relaxed = false;  // the threshold gap was lowered to fill the arms
  std::vector<StudyDesign> high, low;
  double agreement = 0;  // share of (high, low) pairs with oracle(high) > oracle(low); ties count half
};

GenerationStudy run_generation_study(ParameterSet& params, const GenerationStudyOptions& options = {});
double cross_pair_agreement(const std::vector<double>& high, const std::vector<double>& low);

struct EvaluationOptions {
  std::vector<std::uint64_t> forest_seeds = {0, 1, 2, 3, 4};
  bool generation = true;          // run the study on the first checkpoint
  std::uint64_t study_seed = 0;
  std::size_t null_seeds = 30;     // null-configuration repeats, averaged
  std::size_t max_draws = 100000;
  std::string dataset_label;       // echoed in the report
};

// JSON report: the benchmark over one model per checkpoint, the generation
// study, and the training and evaluation configuration.
std::string evaluation_report(const Dataset& ds, const std::vector<std::filesystem::path>& checkpoints,
                              const EvaluationOptions& options = {});

}  // namespace aest::inline AEST_PREC
