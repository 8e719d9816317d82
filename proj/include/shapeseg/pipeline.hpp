#pragma once

// End-to-end oracle round trip on generated scenes: per family, measure the
// dataset, size a kernel, derive (optionally corrupted) ground-truth
// affinities, segment them and score the result.

#include <optional>
#include <string>
#include <vector>

#include "shapeseg/affinity.hpp"
#include "shapeseg/eval.hpp"
#include "shapeseg/graph_merge.hpp"
#include "shapeseg/kernel.hpp"
#include "shapeseg/metrics.hpp"
#include "shapeseg/parallel.hpp"
#include "shapeseg/rng.hpp"
#include "shapeseg/synth.hpp"

namespace shapeseg {

struct PipelineOptions {
  SuiteOptions suite;
  std::optional<KernelParams> fixed_kernel;  // nullopt: adapt per family
  AdaptOptions adapt;
  NoiseModel noise;
  MergeOptions merge;
  double semantic_prob = 1.0;
  EvalConfig eval;
  unsigned threads = 1;
};

struct FamilyOutcome {
  std::string name;
  Family family = Family::wire;  // meaningful only for generated suites
  KernelParams kernel;
  std::size_t neighbors = 0;
  DatasetReport stats;
  EvalSummary summary;
  std::vector<SceneSpec> specs;
  std::vector<InstanceMap> ground_truth;
  std::vector<SegmentationResult> results;
  /// Per scene, the largest spanning gap over its instances.
  std::vector<double> max_gap;
};

struct PipelineOutcome {
  std::vector<FamilyOutcome> families;
  /// Mean of the per-family mmAP values (families weigh equally).
  double mean_mmap = 0.0;
};

/// Largest spanning gap over the instances of one map.
inline double scene_max_gap(const InstanceMap& map) {
  double g = 0.0;
  for (const auto& [id, _] : map.classes) g = std::max(g, measure_instance(map, id).gap);
  return g;
}

/// Noise seed of one scene; independent of thread scheduling. `group` is the
/// family enum value for generated suites, the group position otherwise.
inline std::uint64_t scene_noise_seed(std::uint64_t seed, std::uint64_t group, std::size_t index) {
  return hash_combine(seed, group + 0x100, index);
}

/// One group of scenes through kernel sizing, affinity, merge and scoring.
inline FamilyOutcome run_group(const PipelineOptions& opt, std::string name, std::uint64_t group,
                               std::vector<InstanceMap> maps) {
  if (maps.empty()) throw ParameterError("group '" + name + "' has no scenes");
  FamilyOutcome out;
  out.name = std::move(name);
  const std::size_t n = maps.size();
  out.stats = dataset_report(maps, out.name);
  out.kernel = opt.fixed_kernel ? *opt.fixed_kernel : adapt_kernel_params(measure_gap_stats(maps), opt.adapt);
  const auto kernel = generate_asis_kernel(out.kernel.radius, out.kernel.gap);
  out.neighbors = kernel.size();

  out.results.resize(n);
  out.max_gap.resize(n);
  parallel_for(n, opt.threads, [&](std::size_t i) {
    auto aff = gt_affinity(maps[i], kernel);
    if (opt.noise.flip_rate > 0.0 || opt.noise.jitter_sd > 0.0) {
      NoiseModel noise = opt.noise;
      noise.seed = scene_noise_seed(opt.noise.seed, group, i);
      aff = corrupt_affinity(aff, noise);
    }
    const auto semantic = semantic_from_instances(maps[i], opt.semantic_prob, scene_noise_seed(opt.suite.base_seed, group, i));
    out.results[i] = segment(aff, semantic, opt.merge);
    out.max_gap[i] = scene_max_gap(maps[i]);
  });

  std::vector<EvalImage> images;
  images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) images.push_back({detections_from(out.results[i]), maps[i]});
  out.summary = evaluate(images, opt.eval);
  out.ground_truth = std::move(maps);
  return out;
}

inline FamilyOutcome run_family(const PipelineOptions& opt, Family f, std::vector<InstanceMap> maps) {
  auto out = run_group(opt, std::string(family_name(f)), static_cast<std::uint64_t>(f), std::move(maps));
  out.family = f;
  return out;
}

struct SubsetScore {
  std::size_t scenes = 0;
  std::size_t perfect = 0;  // scenes scoring mmAP 1 on their own
  std::optional<double> mmap;  // pooled over the subset
};

/// Scores the scenes whose largest instance gap the group's kernel radius
/// covers.
inline SubsetScore reachable_subset_score(const FamilyOutcome& g, const EvalConfig& cfg) {
  SubsetScore s;
  std::vector<EvalImage> images;
  for (std::size_t i = 0; i < g.results.size(); ++i) {
    if (g.max_gap[i] > static_cast<double>(g.kernel.radius)) continue;
    EvalImage img{detections_from(g.results[i]), g.ground_truth[i]};
    ++s.scenes;
    const auto one = evaluate(std::span<const EvalImage>(&img, 1), cfg).mmap;
    if (!one || *one >= 1.0 - 1e-12) ++s.perfect;
    images.push_back(std::move(img));
  }
  if (!images.empty()) s.mmap = evaluate(images, cfg).mmap;
  return s;
}

inline double mean_group_mmap(const std::vector<FamilyOutcome>& groups) {
  double acc = 0.0;
  std::size_t scored = 0;
  for (const auto& g : groups)
    if (g.summary.mmap) {
      acc += *g.summary.mmap;
      ++scored;
    }
  return scored ? acc / static_cast<double>(scored) : 0.0;
}

inline PipelineOutcome run_pipeline(const PipelineOptions& opt) {
  PipelineOutcome outcome;
  for (const auto f : opt.suite.families) {
    std::vector<SceneSpec> specs;
    for (std::size_t i = 0; i < opt.suite.scenes_per_family; ++i) specs.push_back(suite_scene_spec(opt.suite, f, i));
    std::vector<InstanceMap> maps(specs.size());
    parallel_for(specs.size(), opt.threads, [&](std::size_t i) { maps[i] = generate_scene(specs[i]).instance_map; });
    auto fam = run_family(opt, f, std::move(maps));
    fam.specs = std::move(specs);
    outcome.families.push_back(std::move(fam));
  }
  outcome.mean_mmap = mean_group_mmap(outcome.families);
  return outcome;
}

}  // namespace shapeseg
