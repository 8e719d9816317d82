#pragma once

// Subcommands of the shapeseg tool. run_cli takes the arguments after the
// program name, so tests can drive commands in-process.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "shapeseg/shapeseg.hpp"

namespace shapeseg::cli {

namespace fs = std::filesystem;

inline std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::vector<Family> parse_families(const std::string& s) {
  if (s == "all") return {kAllFamilies.begin(), kAllFamilies.end()};
  std::vector<Family> out;
  for (const auto& name : split(s, ',')) {
    const auto f = parse_family(name);
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  }
  if (out.empty()) throw ParameterError("no families selected");
  return out;
}

inline std::vector<double> parse_thresholds(const std::string& s) {
  if (s == "coco") return coco_iou_thresholds();
  std::vector<double> out;
  for (const auto& t : split(s, ',')) {
    try {
      out.push_back(parse_double(t));
    } catch (const FormatError&) {
      throw ParameterError("bad IoU threshold '" + t + "'");
    }
  }
  EvalConfig{out, true}.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Option registry. Every registered option is echoed to run.meta as key=value,
// which is also the --config syntax.

inline std::string render(const std::string& v) { return v; }
inline std::string render(bool v) { return v ? "true" : "false"; }
inline std::string render(double v) { return format_double(v); }
template <typename T>
  requires std::is_integral_v<T>
std::string render(T v) {
  return std::to_string(v);
}

class Command {
 public:
  Command(CLI::App& app, const std::string& name, const std::string& desc)
      : sub_(app.add_subcommand(name, desc)), name_(name) {
    sub_->add_option("--config", config_, "key=value file; command-line flags win");
  }

  template <typename T>
  CLI::Option* option(const std::string& key, T& var, const std::string& desc) {
    items_.emplace_back(key, [&var] { return render(var); });
    return sub_->add_option("--" + key, var, desc);
  }

  CLI::Option* flag(const std::string& key, bool& var, const std::string& desc) {
    items_.emplace_back(key, [&var] { return render(var); });
    return sub_->add_flag("--" + key, var, desc);
  }

  std::string meta() const {
    std::string out = "# shapeseg " + name_ + "\n";
    for (const auto& [k, get] : items_) out += k + "=" + get() + "\n";
    return out;
  }

  CLI::App* app() const noexcept { return sub_; }
  const std::string& name() const noexcept { return name_; }

  std::function<void(std::ostream&)> run;

 private:
  CLI::App* sub_;
  std::string name_;
  std::string config_;
  std::vector<std::pair<std::string, std::function<std::string()>>> items_;
};

/// Lines of a --config file as `--key=value` arguments. Blank values and
/// `#` comments are skipped.
inline std::vector<std::string> config_arguments(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  std::vector<std::string> args;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line without '=': " + line);
    auto key = line.substr(first, eq - first);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    auto value = line.substr(eq + 1);
    const auto vs = value.find_first_not_of(" \t");
    value = vs == std::string::npos ? "" : value.substr(vs);
    if (key.empty()) throw FormatError("config line without key: " + line);
    if (key == "config") throw FormatError("config files cannot nest");
    if (value.empty()) continue;
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

inline void require_dir(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir)) throw IoError(std::string(what) + " directory not found: " + dir.string());
}

/// Output directories must not be an input directory or live inside one.
inline void check_disjoint(const fs::path& out, const fs::path& in) {
  const auto o = fs::weakly_canonical(out), i = fs::weakly_canonical(in);
  auto rel = o.lexically_relative(i);
  if (!rel.empty() && *rel.begin() != "..") throw ParameterError("output " + out.string() + " lies inside input " + in.string());
}

inline void write_meta(const fs::path& dir, const Command& cmd) { write_file_atomic(dir / "run.meta", cmd.meta()); }

// ---------------------------------------------------------------------------
// Datasets: a suite directory with manifest.csv, or any tree of instance map
// PNGs with sidecars (rendered `_image.png` files are ignored).

struct DatasetEntry {
  std::string group;
  std::string rel;  // generic path relative to the root
  fs::path path;
};

struct Dataset {
  fs::path root;
  std::vector<DatasetEntry> entries;
  std::vector<std::string> groups;  // order of first appearance
};

inline Dataset load_dataset(const fs::path& root) {
  require_dir(root, "dataset");
  Dataset d;
  d.root = root;
  if (fs::exists(root / "manifest.csv")) {
    const auto bytes = read_file(root / "manifest.csv");
    for (const auto& row : manifest_from_csv(std::string(bytes.begin(), bytes.end())))
      d.entries.push_back({std::string(family_name(row.family)), row.path, root / row.path});
  } else {
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file() || e.path().extension() != ".png") continue;
      const auto name = e.path().filename().string();
      if (name.size() >= 10 && name.ends_with("_image.png")) continue;
      if (!fs::exists(sidecar_path(e.path()))) continue;
      const auto rel = e.path().lexically_relative(root);
      auto group = rel.parent_path().generic_string();
      d.entries.push_back({group.empty() ? "dataset" : group, rel.generic_string(), e.path()});
    }
    std::sort(d.entries.begin(), d.entries.end(), [](const auto& a, const auto& b) { return a.rel < b.rel; });
  }
  if (d.entries.empty()) throw IoError("no instance maps under " + root.string());
  for (const auto& e : d.entries)
    if (std::find(d.groups.begin(), d.groups.end(), e.group) == d.groups.end()) d.groups.push_back(e.group);
  return d;
}

inline Dataset filter_group(Dataset d, const std::string& group) {
  if (group.empty()) return d;
  std::erase_if(d.entries, [&](const DatasetEntry& e) { return e.group != group; });
  if (d.entries.empty()) throw ParameterError("dataset has no group '" + group + "'");
  d.groups = {group};
  return d;
}

inline std::vector<InstanceMap> load_maps(const std::vector<DatasetEntry>& entries, unsigned threads) {
  std::vector<InstanceMap> maps(entries.size());
  parallel_for(entries.size(), threads, [&](std::size_t i) { maps[i] = load_instance_map(entries[i].path); });
  return maps;
}

inline fs::path with_extension(const fs::path& base, const std::string& rel, const char* ext) {
  auto p = base / fs::path(rel);
  p.replace_extension(ext);
  return p;
}

/// Files below `root` with the given extension, sorted by relative path.
inline std::vector<std::string> list_files(const fs::path& root, const std::string& ext) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path().lexically_relative(root).generic_string());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Visualization

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Hue steps by the golden ratio conjugate per id; fixed saturation/value.
inline Rgb instance_color(InstanceId id) {
  if (id == 0) return {};
  const double h = std::fmod(0.1 + 0.6180339887498949 * static_cast<double>(id), 1.0) * 6.0;
  const double s = 0.85, v = 0.95;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  const auto q8 = [](double x) { return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); };
  return {q8(r), q8(g), q8(b)};
}

/// Labels colored by id over black, or blended (alpha) over a gray background.
inline PngImage render_labels(const Grid<InstanceId>& labels, const PngImage* background, double alpha) {
  PngImage out;
  out.width = labels.width();
  out.height = labels.height();
  out.channels = 3;
  out.bit_depth = 8;
  out.samples.resize(labels.size() * 3);
  if (background && (background->width != out.width || background->height != out.height))
    throw ContractError("background size differs from the label map");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double gray = 0.0;
    if (background) {
      const int ch = background->channels;
      double acc = 0.0;
      for (int c = 0; c < ch; ++c) acc += background->samples[i * ch + c];
      gray = acc / ch / (background->bit_depth == 16 ? 257.0 : 1.0);
    }
    const auto col = instance_color(labels[i]);
    const std::uint8_t rgb[3] = {col.r, col.g, col.b};
    for (int c = 0; c < 3; ++c) {
      double v = rgb[c];
      if (background) v = labels[i] ? alpha * rgb[c] + (1 - alpha) * gray : gray;
      out.samples[i * 3 + c] = static_cast<std::uint16_t>(std::lround(v));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text tables

inline std::string fixed6(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

inline std::string opt6(const std::optional<double>& v) { return v ? fixed6(*v) : "skipped"; }

inline std::string eval_csv_header(const std::vector<double>& thresholds) {
  std::ostringstream os;
  os << "group,images";
  for (const double t : thresholds) os << ",AP@" << std::fixed << std::setprecision(2) << t;
  os << ",mmAP";
  return os.str();
}

inline std::string eval_csv_row(const std::string& group, std::size_t images, const EvalSummary& s) {
  std::string out = group + "," + std::to_string(images);
  for (const double a : s.ap) out += "," + fixed6(a);
  return out + "," + opt6(s.mmap);
}

inline std::optional<double> ap_at(const EvalSummary& s, double t) {
  for (std::size_t i = 0; i < s.thresholds.size(); ++i)
    if (std::abs(s.thresholds[i] - t) < 1e-9) return s.ap[i];
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Commands

struct SynthArgs {
  std::string out, families = "all";
  std::size_t scenes = 50;
  std::uint64_t seed = 0;
  int width = 256, height = 256;
  bool images = false;
  unsigned threads = 1;
};

struct StatsArgs {
  std::string data, out, name = "dataset";
  unsigned threads = 1;
};

struct KernelArgs {
  std::string data, out, group;
  int radius = 0, gap = 0;
  bool symmetric = false, per_group = false;
  double coverage = 0.95;
  std::size_t budget = 64, sample_limit = 0;
  int max_radius = 64;
  unsigned threads = 1;
};

struct AffgenArgs {
  std::string data, kernel, out, group;
  double flip = 0.0, jitter = 0.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct SegmentArgs {
  std::string aff, gt, out;
  double semantic_prob = 1.0, class_flip = 0.0, merge_threshold = 0.0, prior = 1.0;
  std::size_t min_px = 16;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct EvalArgs {
  std::string results, gt, out, thresholds = "coco";
  bool class_agnostic = false;
  unsigned threads = 1;
};

struct VizArgs {
  std::string input, out, background;
  double alpha = 0.6;
};

struct PipelineArgs {
  std::string out, data, families = "all", thresholds = "coco";
  std::size_t scenes = 50, min_px = 16, budget = 64;
  std::uint64_t seed = 0;
  int width = 256, height = 256, radius = 0, gap = 0, max_radius = 64;
  double coverage = 0.95, noise = 0.0, jitter = 0.0, merge_threshold = 0.0, prior = 1.0, semantic_prob = 1.0;
  bool class_agnostic = false, results = true;
  unsigned threads = 1;
};

struct CalibrateArgs {
  std::string out, families = "all", candidates = "-0.2,-0.1,0,0.1,0.2";
  std::size_t scenes = 10;
  std::uint64_t seed = 1000;
  int width = 256, height = 256;
  double noise = 0.05, prior = 1.0;
  unsigned threads = 1;
};

inline void synth_cmd(const Command& cmd, const SynthArgs& a, std::ostream& out) {
  SuiteOptions opt;
  opt.families = parse_families(a.families);
  opt.scenes_per_family = a.scenes;
  opt.base_seed = a.seed;
  opt.width = a.width;
  opt.height = a.height;
  opt.write_images = a.images;
  opt.threads = a.threads;
  ensure_dir(a.out);
  const auto rows = generate_suite(opt, a.out);
  write_meta(a.out, cmd);
  out << "wrote " << rows.size() << " scenes to " << a.out << '\n';
}

inline void stats_cmd(const Command& cmd, const StatsArgs& a, std::ostream& out) {
  const auto data = load_dataset(a.data);
  check_disjoint(a.out, a.data);
  std::vector<ImageStats> per(data.entries.size());
  parallel_for(data.entries.size(), a.threads,
               [&](std::size_t i) { per[i] = image_stats(load_instance_map(data.entries[i].path)); });
  std::vector<DatasetReport> reports;
  for (const auto& g : data.groups) {
    std::vector<ImageStats> sub;
    for (std::size_t i = 0; i < per.size(); ++i)
      if (data.entries[i].group == g) sub.push_back(per[i]);
    reports.push_back(reduce_stats(sub, g));
  }
  if (data.groups.size() > 1 || data.groups.front() != a.name) reports.push_back(reduce_stats(per, a.name));
  std::string text;
  for (std::size_t i = 0; i < reports.size(); ++i) text += (i ? "\n" : "") + report_to_text(reports[i]);
  ensure_dir(a.out);
  write_file_atomic(fs::path(a.out) / "report.txt", text);
  write_file_atomic(fs::path(a.out) / "report.csv", reports_to_csv(reports));
  write_meta(a.out, cmd);
  out << reports_to_csv(reports);
}

inline AffinityKernel make_kernel(int radius, int gap, bool symmetric) {
  return symmetric ? generate_symmetric_kernel(radius, gap) : generate_asis_kernel(radius, gap);
}

inline void kernel_cmd(const Command& cmd, const KernelArgs& a, std::ostream& out) {
  const bool fixed = a.radius != 0 || a.gap != 0;
  if (fixed == !a.data.empty()) throw ParameterError("give either --data or both --radius and --gap");
  if (fixed && (a.radius == 0 || a.gap == 0)) throw ParameterError("--radius and --gap go together");
  if (a.per_group && a.data.empty()) throw ParameterError("--per-group needs --data");
  if (!a.data.empty()) check_disjoint(a.out, a.data);
  ensure_dir(a.out);
  const fs::path dir(a.out);
  const AdaptOptions adapt{a.coverage, a.budget, a.max_radius};

  const auto emit = [&](const fs::path& file, const KernelParams& p, const std::string& label) {
    const auto k = make_kernel(p.radius, p.gap, a.symmetric);
    write_file_atomic(file, kernel_to_string(k));
    out << label << ": r_k=" << p.radius << " g=" << p.gap << " neighbors=" << k.size() << '\n';
  };

  if (fixed) {
    emit(dir / "kernel.txt", {a.radius, a.gap}, "kernel");
  } else {
    const auto data = filter_group(load_dataset(a.data), a.group);
    const auto maps = load_maps(data.entries, a.threads);
    emit(dir / "kernel.txt", adapt_kernel_params(measure_gap_stats(maps, a.sample_limit), adapt), "kernel");
    if (a.per_group)
      for (const auto& g : data.groups) {
        std::vector<InstanceMap> sub;
        for (std::size_t i = 0; i < maps.size(); ++i)
          if (data.entries[i].group == g) sub.push_back(maps[i]);
        ensure_dir(dir / g);
        emit(dir / g / "kernel.txt", adapt_kernel_params(measure_gap_stats(sub, a.sample_limit), adapt), g);
      }
  }
  write_meta(a.out, cmd);
}

/// A kernel file, or a directory holding `kernel.txt` with optional
/// `<group>/kernel.txt` overrides.
class KernelSource {
 public:
  explicit KernelSource(const fs::path& p) : path_(p) {
    if (fs::is_regular_file(p)) {
      single_ = load_kernel(p.string());
    } else if (!fs::is_directory(p)) {
      throw IoError("kernel not found: " + p.string());
    }
  }

  const AffinityKernel& get(const std::string& group) {
    if (single_) return *single_;
    auto it = cache_.find(group);
    if (it != cache_.end()) return it->second;
    auto file = path_ / group / "kernel.txt";
    if (!fs::exists(file)) file = path_ / "kernel.txt";
    if (!fs::exists(file)) throw IoError("no kernel for group '" + group + "' under " + path_.string());
    return cache_.emplace(group, load_kernel(file.string())).first->second;
  }

 private:
  fs::path path_;
  std::optional<AffinityKernel> single_;
  std::map<std::string, AffinityKernel> cache_;
};

inline void affgen_cmd(const Command& cmd, const AffgenArgs& a, std::ostream& out) {
  const auto data = filter_group(load_dataset(a.data), a.group);
  check_disjoint(a.out, a.data);
  KernelSource kernels(a.kernel);
  std::vector<const AffinityKernel*> per(data.entries.size());
  for (std::size_t i = 0; i < per.size(); ++i) per[i] = &kernels.get(data.entries[i].group);
  NoiseModel base{a.flip, a.jitter, 0};
  if (!(base.flip_rate >= 0.0 && base.flip_rate <= 1.0)) throw ParameterError("flip must be in [0, 1]");
  if (!(base.jitter_sd >= 0.0)) throw ParameterError("jitter must be >= 0");
  ensure_dir(a.out);
  parallel_for(data.entries.size(), a.threads, [&](std::size_t i) {
    const auto& e = data.entries[i];
    const auto map = load_instance_map(e.path);
    NoiseModel noise = base;
    noise.seed = hash_combine(a.seed, fnv1a(e.rel));
    const auto aff = corrupt_affinity(gt_affinity(map, *per[i]), noise);
    const auto file = with_extension(a.out, e.rel, ".aff");
    ensure_dir(file.parent_path());
    write_file_atomic(file, write_affinity(aff));
  });
  write_meta(a.out, cmd);
  out << "wrote " << data.entries.size() << " affinity maps to " << a.out << '\n';
}

inline void segment_cmd(const Command& cmd, const SegmentArgs& a, std::ostream& out) {
  require_dir(a.aff, "affinity");
  require_dir(a.gt, "ground-truth");
  check_disjoint(a.out, a.aff);
  check_disjoint(a.out, a.gt);
  const auto files = list_files(a.aff, ".aff");
  if (files.empty()) throw IoError("no .aff files under " + a.aff);
  MergeOptions merge{a.merge_threshold, a.min_px, a.prior};
  if (!(merge.prior_count >= 0.0)) throw ParameterError("prior must be >= 0");
  for (const auto& rel : files)
    if (!fs::exists(with_extension(a.gt, rel, ".png")))
      throw IoError("no ground truth for " + rel + " under " + a.gt);
  ensure_dir(a.out);
  parallel_for(files.size(), a.threads, [&](std::size_t i) {
    const auto& rel = files[i];
    const auto aff = read_affinity(read_file(fs::path(a.aff) / rel));
    const auto gt = load_instance_map(with_extension(a.gt, rel, ".png"));
    if (gt.width() != aff.width() || gt.height() != aff.height())
      throw ContractError(rel + ": affinity and ground truth differ in size");
    const auto sem = semantic_from_instances(gt, a.semantic_prob, hash_combine(a.seed, fnv1a(rel)), a.class_flip);
    const auto seg = segment(aff, sem, merge);
    const auto file = with_extension(a.out, rel, ".png");
    ensure_dir(file.parent_path());
    save_segmentation(file, seg, {{"source", rel}});
  });
  write_meta(a.out, cmd);
  out << "segmented " << files.size() << " maps into " << a.out << '\n';
}

inline void eval_cmd(const Command& cmd, const EvalArgs& a, std::ostream& out) {
  EvalConfig cfg{parse_thresholds(a.thresholds), !a.class_agnostic};
  const auto data = load_dataset(a.gt);
  require_dir(a.results, "results");
  check_disjoint(a.out, a.gt);
  check_disjoint(a.out, a.results);
  std::vector<EvalImage> images(data.entries.size());
  parallel_for(data.entries.size(), a.threads, [&](std::size_t i) {
    const auto& e = data.entries[i];
    const auto res = fs::path(a.results) / e.rel;
    if (!fs::exists(res)) throw IoError("missing result " + res.string());
    images[i] = {detections_from(load_segmentation(res)), load_instance_map(e.path)};
  });

  std::vector<FamilyOutcome> groups;
  std::string csv = eval_csv_header(cfg.iou_thresholds) + "\n", text;
  for (const auto& g : data.groups) {
    std::vector<EvalImage> sub;
    for (std::size_t i = 0; i < images.size(); ++i)
      if (data.entries[i].group == g) sub.push_back(images[i]);
    FamilyOutcome o;
    o.name = g;
    o.summary = evaluate(sub, cfg);
    csv += eval_csv_row(g, sub.size(), o.summary) + "\n";
    text += "[" + g + "]\n" + summary_to_text(o.summary) + "\n";
    groups.push_back(std::move(o));
  }
  const auto pooled = evaluate(images, cfg);
  csv += eval_csv_row("pooled", images.size(), pooled) + "\n";
  text += "[pooled]\n" + summary_to_text(pooled) + "\n";
  const double mean = mean_group_mmap(groups);
  text += "mean_group_mmAP=" + fixed6(mean) + "\n";
  ensure_dir(a.out);
  write_file_atomic(fs::path(a.out) / "eval.csv", csv);
  write_file_atomic(fs::path(a.out) / "eval.txt", text);
  write_meta(a.out, cmd);
  out << csv << "mean_group_mmAP=" << fixed6(mean) << '\n';
}

inline void viz_cmd(const Command&, const VizArgs& a, std::ostream& out) {
  if (!(a.alpha >= 0.0 && a.alpha <= 1.0)) throw ParameterError("alpha must be in [0, 1]");
  const auto img = load_png(a.input);
  if (img.channels != 1) throw FormatError(a.input + ": label map must be single-channel");
  Grid<InstanceId> labels(img.width, img.height);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = img.samples[i];
  std::optional<PngImage> bg;
  if (!a.background.empty()) bg = load_png(a.background);
  const auto outp = fs::absolute(a.out);
  if (fs::exists(outp) && fs::equivalent(outp, fs::path(a.input))) throw ParameterError("viz would overwrite its input");
  if (outp.has_parent_path()) ensure_dir(outp.parent_path());
  save_png(a.out, render_labels(labels, bg ? &*bg : nullptr, a.alpha));
  out << "wrote " << a.out << '\n';
}

inline PipelineOptions pipeline_options(const PipelineArgs& a) {
  PipelineOptions opt;
  opt.suite.families = parse_families(a.families);
  opt.suite.scenes_per_family = a.scenes;
  opt.suite.base_seed = a.seed;
  opt.suite.width = a.width;
  opt.suite.height = a.height;
  if (a.radius != 0 || a.gap != 0) {
    detail::check_kernel_params(a.radius, a.gap);
    opt.fixed_kernel = KernelParams{a.radius, a.gap};
  }
  opt.adapt = {a.coverage, a.budget, a.max_radius};
  opt.noise = {a.noise, a.jitter, a.seed};
  if (!(a.noise >= 0.0 && a.noise <= 1.0)) throw ParameterError("noise must be in [0, 1]");
  opt.merge = {a.merge_threshold, a.min_px, a.prior};
  opt.semantic_prob = a.semantic_prob;
  opt.eval = {parse_thresholds(a.thresholds), !a.class_agnostic};
  opt.threads = a.threads;
  return opt;
}

inline void pipeline_cmd(const Command& cmd, const PipelineArgs& a, std::ostream& out) {
  const auto opt = pipeline_options(a);
  PipelineOutcome outcome;
  std::vector<std::vector<std::string>> rels;
  if (a.data.empty()) {
    outcome = run_pipeline(opt);
    for (const auto& g : outcome.families) {
      rels.emplace_back();
      for (std::size_t i = 0; i < g.results.size(); ++i) rels.back().push_back(scene_file_name(g.family, i));
    }
  } else {
    check_disjoint(a.out, a.data);
    const auto data = load_dataset(a.data);
    for (std::size_t gi = 0; gi < data.groups.size(); ++gi) {
      std::vector<DatasetEntry> sub;
      for (const auto& e : data.entries)
        if (e.group == data.groups[gi]) sub.push_back(e);
      outcome.families.push_back(run_group(opt, data.groups[gi], gi, load_maps(sub, a.threads)));
      rels.emplace_back();
      for (const auto& e : sub) rels.back().push_back(fs::path(e.rel).filename().string());
    }
    outcome.mean_mmap = mean_group_mmap(outcome.families);
  }

  const fs::path dir(a.out);
  ensure_dir(dir / "kernels");
  std::vector<DatasetReport> reports;
  std::ostringstream csv, text;
  csv << "group,scenes,r_k,g,neighbors,AP50,AP75,mmAP,reachable_scenes,reachable_perfect,reachable_mmAP\n";
  for (std::size_t gi = 0; gi < outcome.families.size(); ++gi) {
    const auto& g = outcome.families[gi];
    reports.push_back(g.stats);
    write_file_atomic(dir / "kernels" / (g.name + ".txt"),
                      kernel_to_string(generate_asis_kernel(g.kernel.radius, g.kernel.gap)));
    const auto sub = reachable_subset_score(g, opt.eval);
    const auto ap50 = ap_at(g.summary, 0.5), ap75 = ap_at(g.summary, 0.75);
    csv << g.name << ',' << g.results.size() << ',' << g.kernel.radius << ',' << g.kernel.gap << ',' << g.neighbors
        << ',' << opt6(ap50) << ',' << opt6(ap75) << ',' << opt6(g.summary.mmap) << ',' << sub.scenes << ','
        << sub.perfect << ',' << opt6(sub.mmap) << '\n';
    text << "[" << g.name << "]\nkernel r_k=" << g.kernel.radius << " g=" << g.kernel.gap
         << " neighbors=" << g.neighbors << '\n'
         << summary_to_text(g.summary) << "reachable_scenes=" << sub.scenes << " perfect=" << sub.perfect
         << " mmAP=" << opt6(sub.mmap) << "\n\n";
    out << g.name << ": r_k=" << g.kernel.radius << " g=" << g.kernel.gap << " neighbors=" << g.neighbors
        << " mmAP=" << opt6(g.summary.mmap) << '\n';
    if (a.results) {
      const auto rdir = dir / "results" / g.name;
      ensure_dir(rdir);
      parallel_for(g.results.size(), a.threads, [&](std::size_t i) {
        save_segmentation(rdir / rels[gi][i], g.results[i], {{"group", g.name}});
      });
    }
  }
  text << "mean_mmAP=" << fixed6(outcome.mean_mmap) << '\n';
  write_file_atomic(dir / "report.csv", csv.str());
  write_file_atomic(dir / "report.txt", text.str());
  write_file_atomic(dir / "stats.csv", reports_to_csv(reports));
  write_meta(dir, cmd);
  out << "mean mmAP=" << fixed6(outcome.mean_mmap) << '\n';
}

/// Sweeps merge_threshold on a calibration suite (seeded apart from the
/// default suite) and writes the winner as a config file.
inline void calibrate_cmd(const Command& cmd, const CalibrateArgs& a, std::ostream& out) {
  PipelineArgs p;
  p.families = a.families;
  p.scenes = a.scenes;
  p.seed = a.seed;
  p.width = a.width;
  p.height = a.height;
  p.noise = a.noise;
  p.prior = a.prior;
  p.threads = a.threads;
  std::vector<double> cands;
  for (const auto& c : split(a.candidates, ',')) cands.push_back(parse_double(c));
  if (cands.empty()) throw ParameterError("no candidates");
  std::optional<double> best;
  double best_score = -1.0;
  std::ostringstream log;
  for (const double c : cands) {
    p.merge_threshold = c;
    const auto score = run_pipeline(pipeline_options(p)).mean_mmap;
    log << "# merge-threshold " << format_double(c) << " mmAP " << fixed6(score) << '\n';
    out << "merge-threshold=" << format_double(c) << " mmAP=" << fixed6(score) << '\n';
    // Ties go to the threshold nearest 0.
    const bool tie = std::abs(score - best_score) <= 1e-12 && best && std::abs(c) < std::abs(*best);
    if (score > best_score + 1e-12 || tie) {
      best_score = score;
      best = c;
    }
  }
  const fs::path file(a.out);
  if (file.has_parent_path()) ensure_dir(file.parent_path());
  std::ostringstream conf;
  conf << "# pipeline defaults calibrated at noise " << format_double(a.noise) << " on seed " << a.seed << '\n'
       << log.str() << "merge-threshold=" << format_double(*best) << "\nprior=" << format_double(a.prior) << '\n';
  write_file_atomic(file, conf.str());
  if (file.has_parent_path()) write_meta(file.parent_path(), cmd);
  out << "chose merge-threshold=" << format_double(*best) << '\n';
}

// ---------------------------------------------------------------------------
// Entry

inline int exit_code_of(const std::exception_ptr& e, std::string& kind, std::string& msg) {
  try {
    std::rethrow_exception(e);
  } catch (const ParameterError& x) {
    kind = "parameter", msg = x.what();
    return 2;
  } catch (const IoError& x) {
    kind = "io", msg = x.what();
    return 3;
  } catch (const FormatError& x) {
    kind = "format", msg = x.what();
    return 4;
  } catch (const ContractError& x) {
    kind = "contract", msg = x.what();
    return 5;
  } catch (const EmptyMaskError& x) {
    kind = "empty-mask", msg = x.what();
    return 5;
  } catch (const GenerationError& x) {
    kind = "generation", msg = x.what();
    return 6;
  } catch (const fs::filesystem_error& x) {
    kind = "io", msg = x.what();
    return 3;
  } catch (const std::exception& x) {
    kind = "internal", msg = x.what();
    return 1;
  }
}

inline void print_error(std::ostream& err, const std::string& kind, std::string msg) {
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  err << "error: " << kind << ": " << msg << '\n';
}

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Irregular-shape instance segmentation toolkit", "shapeseg"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  SynthArgs synth;
  StatsArgs stats;
  KernelArgs kern;
  AffgenArgs affgen;
  SegmentArgs seg;
  EvalArgs ev;
  VizArgs viz;
  PipelineArgs pipe;
  CalibrateArgs cal;
  std::vector<std::unique_ptr<Command>> cmds;
  const auto add = [&](const char* name, const char* desc) -> Command& {
    cmds.push_back(std::make_unique<Command>(app, name, desc));
    return *cmds.back();
  };

  {
    auto& c = add("synth", "generate a synthetic scene suite");
    c.option("out", synth.out, "output directory")->required();
    c.option("families", synth.families, "comma list or 'all'");
    c.option("scenes", synth.scenes, "scenes per family");
    c.option("seed", synth.seed, "base seed");
    c.option("width", synth.width, "scene width");
    c.option("height", synth.height, "scene height");
    c.flag("images", synth.images, "also write rendered _image.png files");
    c.option("threads", synth.threads, "worker threads (0 = all cores)");
    c.run = [&](std::ostream& o) { synth_cmd(c, synth, o); };
  }
  {
    auto& c = add("stats", "dataset statistics (OoS, MaxIoU, aspect ratio, CCPI)");
    c.option("data", stats.data, "dataset directory")->required();
    c.option("out", stats.out, "output directory")->required();
    c.option("name", stats.name, "name of the whole-dataset row");
    c.option("threads", stats.threads, "worker threads (0 = all cores)");
    c.run = [&](std::ostream& o) { stats_cmd(c, stats, o); };
  }
  {
    auto& c = add("kernel", "build an affinity kernel, fixed or adapted to a dataset");
    c.option("data", kern.data, "dataset directory (adaptive mode)");
    c.option("radius", kern.radius, "fixed r_k");
    c.option("gap", kern.gap, "fixed g");
    c.option("out", kern.out, "output directory")->required();
    c.option("group", kern.group, "restrict to one dataset group");
    c.flag("per-group", kern.per_group, "also write <group>/kernel.txt per group");
    c.flag("symmetric", kern.symmetric, "write the symmetric kernel instead");
    c.option("coverage", kern.coverage, "gap quantile r_k must cover");
    c.option("budget", kern.budget, "neighbor budget");
    c.option("max-radius", kern.max_radius, "largest r_k");
    c.option("sample-limit", kern.sample_limit, "measure at most this many scenes (0 = all)");
    c.option("threads", kern.threads, "worker threads (0 = all cores)");
    c.run = [&](std::ostream& o) { kernel_cmd(c, kern, o); };
  }
  {
    auto& c = add("affgen", "ground-truth affinity maps, optionally corrupted");
    c.option("data", affgen.data, "dataset directory")->required();
    c.option("kernel", affgen.kernel, "kernel file or kernel directory")->required();
    c.option("out", affgen.out, "output directory")->required();
    c.option("group", affgen.group, "restrict to one dataset group");
    c.option("flip", affgen.flip, "per-slot flip probability");
    c.option("jitter", affgen.jitter, "Gaussian jitter sd");
    c.option("seed", affgen.seed, "noise seed");
    c.option("threads", affgen.threads, "worker threads (0 = all cores)");
    c.run = [&](std::ostream& o) { affgen_cmd(c, affgen, o); };
  }
  {
    auto& c = add("segment", "graph merge and class assignment");
    c.option("aff", seg.aff, "directory of .aff files")->required();
    c.option("gt", seg.gt, "ground-truth directory (oracle semantic source)")->required();
    c.option("out", seg.out, "output directory")->required();
    c.option("semantic-prob", seg.semantic_prob, "probability mass on the true class");
    c.option("class-flip", seg.class_flip, "per-pixel class flip rate");
    c.option("merge-threshold", seg.merge_threshold, "merge while mean score exceeds this");
    c.option("min-px", seg.min_px, "smallest kept instance");
    c.option("prior", seg.prior, "queue prior count");
    c.option("seed", seg.seed, "semantic noise seed");
    c.option("threads", seg.threads, "worker threads (0 = all cores)");
    c.run = [&](std::ostream& o) { segment_cmd(c, seg, o); };
  }
  {
    auto& c = add("eval", "COCO-style mask AP of results against ground truth");
    c.option("results", ev.results, "results directory")->required();
    c.option("gt", ev.gt, "ground-truth directory")->required();
    c.option("out", ev.out, "output directory")->required();
    c.option("thresholds", ev.thresholds, "'coco' or comma list of IoU thresholds");
    c.flag("class-agnostic", ev.class_agnostic, "ignore classes when matching");
    c.option("threads", ev.threads, "worker threads (0 = all cores)");
    c.run = [&](std::ostream& o) { eval_cmd(c, ev, o); };
  }
  {
    auto& c = add("viz", "color an instance map by id");
    c.option("input", viz.input, "instance map or result PNG")->required();
    c.option("out", viz.out, "output PNG")->required();
    c.option("background", viz.background, "optional image to blend over");
    c.option("alpha", viz.alpha, "overlay opacity with a background");
    c.run = [&](std::ostream& o) { viz_cmd(c, viz, o); };
  }
  {
    auto& c = add("pipeline", "synth or load, kernel, affinity, merge and eval in one run");
    c.option("out", pipe.out, "output directory")->required();
    c.option("data", pipe.data, "dataset directory (default: generate a suite)");
    c.option("families", pipe.families, "comma list or 'all'");
    c.option("scenes", pipe.scenes, "scenes per family");
    c.option("seed", pipe.seed, "suite and noise seed");
    c.option("width", pipe.width, "scene width");
    c.option("height", pipe.height, "scene height");
    c.option("radius", pipe.radius, "fixed r_k (0 = adaptive)");
    c.option("gap", pipe.gap, "fixed g (0 = adaptive)");
    c.option("coverage", pipe.coverage, "gap quantile r_k must cover");
    c.option("budget", pipe.budget, "neighbor budget");
    c.option("max-radius", pipe.max_radius, "largest r_k");
    c.option("noise", pipe.noise, "affinity flip probability");
    c.option("jitter", pipe.jitter, "affinity jitter sd");
    c.option("merge-threshold", pipe.merge_threshold, "merge while mean score exceeds this");
    c.option("min-px", pipe.min_px, "smallest kept instance");
    c.option("prior", pipe.prior, "queue prior count");
    c.option("semantic-prob", pipe.semantic_prob, "probability mass on the true class");
    c.option("thresholds", pipe.thresholds, "'coco' or comma list of IoU thresholds");
    c.flag("class-agnostic", pipe.class_agnostic, "ignore classes when matching");
    c.flag("results", pipe.results, "write per-scene results (--results=false to skip)");
    c.option("threads", pipe.threads, "worker threads (0 = all cores)");
    c.run = [&](std::ostream& o) { pipeline_cmd(c, pipe, o); };
  }
  {
    auto& c = add("calibrate", "choose merge-threshold on a noisy calibration suite");
    c.option("out", cal.out, "config file to write")->required();
    c.option("families", cal.families, "comma list or 'all'");
    c.option("scenes", cal.scenes, "scenes per family");
    c.option("seed", cal.seed, "calibration suite seed");
    c.option("width", cal.width, "scene width");
    c.option("height", cal.height, "scene height");
    c.option("noise", cal.noise, "affinity flip probability");
    c.option("prior", cal.prior, "queue prior count");
    c.option("candidates", cal.candidates, "comma list of thresholds to try");
    c.option("threads", cal.threads, "worker threads (0 = all cores)");
    c.run = [&](std::ostream& o) { calibrate_cmd(c, cal, o); };
  }

  try {
    // Config keys go in front of the user's flags so the flags win.
    if (!args.empty()) {
      for (std::size_t i = 1; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config" && i + 1 < args.size())
          path = args[i + 1];
        else if (args[i].starts_with("--config="))
          path = args[i].substr(9);
        if (path.empty()) continue;
        const auto extra = config_arguments(path);
        args.insert(args.begin() + 1, extra.begin(), extra.end());
        break;
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  } catch (...) {
    std::string kind, msg;
    const int code = exit_code_of(std::current_exception(), kind, msg);
    print_error(err, kind, msg);
    return code;
  }

  for (const auto& c : cmds) {
    if (!c->app()->parsed()) continue;
    try {
      c->run(out);
      return 0;
    } catch (...) {
      std::string kind, msg;
      const int code = exit_code_of(std::current_exception(), kind, msg);
      print_error(err, kind, msg);
      return code;
    }
  }
  print_error(err, "usage", "no subcommand");
  return 2;
}

}  // namespace shapeseg::cli
