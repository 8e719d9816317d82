#pragma once

// InstanceMap files: a 16-bit grayscale PNG whose pixel value is the
// instance id, plus a UTF-8 sidecar of key=value lines:
//
//   # shapeseg instance map v1
//   width=256
//   height=256
//   instances=2
//   instance id=1 class=1 depth=0
//   instance id=2 class=1 depth=1 confidence=0.97
//
// Unknown single-key lines are preserved as free-form metadata.

#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "shapeseg/errors.hpp"
#include "shapeseg/graph_merge.hpp"
#include "shapeseg/png_io.hpp"
#include "shapeseg/raster.hpp"

namespace shapeseg {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw FormatError("bad number '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw FormatError("bad integer '" + s + "'");
  return v;
}

struct InstanceFile {
  InstanceMap map;
  std::map<InstanceId, double> confidences;
  std::map<std::string, std::string> metadata;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& png) {
  auto p = png;
  p.replace_extension(".txt");
  return p;
}

inline std::string sidecar_to_string(const InstanceFile& f) {
  std::ostringstream os;
  os << "# shapeseg instance map v1\n";
  os << "width=" << f.map.width() << '\n' << "height=" << f.map.height() << '\n';
  for (const auto& [k, v] : f.metadata) os << k << '=' << v << '\n';
  os << "instances=" << f.map.classes.size() << '\n';
  for (const auto& [id, cls] : f.map.classes) {
    os << "instance id=" << id << " class=" << cls;
    if (const auto d = f.map.depth_order.find(id); d != f.map.depth_order.end()) os << " depth=" << d->second;
    if (const auto c = f.confidences.find(id); c != f.confidences.end())
      os << " confidence=" << format_double(c->second);
    os << '\n';
  }
  return os.str();
}

/// Parses a sidecar; labels are left empty.
inline InstanceFile sidecar_from_string(const std::string& text) {
  InstanceFile f;
  std::istringstream is(text);
  std::string line;
  int width = -1, height = -1;
  long long declared = -1;
  std::map<InstanceId, ClassId> classes;
  std::map<InstanceId, int> depths;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("instance ", 0) == 0) {
      std::istringstream ls(line.substr(9));
      std::string tok;
      std::optional<InstanceId> id;
      std::optional<ClassId> cls;
      std::optional<int> depth;
      std::optional<double> conf;
      while (ls >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw FormatError("bad instance field '" + tok + "'");
        const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "id")
          id = static_cast<InstanceId>(parse_int(val));
        else if (key == "class")
          cls = static_cast<ClassId>(parse_int(val));
        else if (key == "depth")
          depth = static_cast<int>(parse_int(val));
        else if (key == "confidence")
          conf = parse_double(val);
        else
          throw FormatError("unknown instance field '" + key + "'");
      }
      if (!id || !cls) throw FormatError("instance line needs id and class: " + line);
      if (!classes.emplace(*id, *cls).second) throw FormatError("duplicate instance id " + std::to_string(*id));
      if (depth) depths[*id] = *depth;
      if (conf) f.confidences[*id] = *conf;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("bad sidecar line '" + line + "'");
    const auto key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "width")
      width = static_cast<int>(parse_int(val));
    else if (key == "height")
      height = static_cast<int>(parse_int(val));
    else if (key == "instances")
      declared = parse_int(val);
    else
      f.metadata[key] = val;
  }
  if (width < 0 || height < 0) throw FormatError("sidecar lacks width/height");
  if (declared >= 0 && static_cast<std::size_t>(declared) != classes.size())
    throw FormatError("sidecar instance count does not match its entries");
  f.map = InstanceMap(width, height);
  f.map.classes = std::move(classes);
  f.map.depth_order = std::move(depths);
  return f;
}

inline void save_instance_file(const std::filesystem::path& png, const InstanceFile& f) {
  f.map.validate();
  PngImage img{f.map.width(), f.map.height(), 1, 16, {}};
  img.samples.reserve(f.map.labels.size());
  for (const auto id : f.map.labels) {
    if (id > 0xffff) throw FormatError("instance id " + std::to_string(id) + " does not fit a 16-bit PNG");
    img.samples.push_back(static_cast<std::uint16_t>(id));
  }
  save_png(png, img);
  write_file_atomic(sidecar_path(png), sidecar_to_string(f));
}

inline InstanceFile load_instance_file(const std::filesystem::path& png) {
  const auto sidecar = read_file(sidecar_path(png));
  InstanceFile f;
  try {
    f = sidecar_from_string(std::string(sidecar.begin(), sidecar.end()));
  } catch (const FormatError& e) {
    throw FormatError(sidecar_path(png).string() + ": " + e.what());
  }
  const auto img = load_png(png);
  if (img.channels != 1) throw FormatError(png.string() + ": instance PNG must be grayscale");
  if (img.width != f.map.width() || img.height != f.map.height())
    throw FormatError(png.string() + ": PNG size does not match its sidecar");
  for (std::size_t i = 0; i < img.samples.size(); ++i) f.map.labels[i] = img.samples[i];
  try {
    f.map.validate();
  } catch (const FormatError& e) {
    throw FormatError(png.string() + ": " + e.what());
  }
  return f;
}

inline void save_instance_map(const std::filesystem::path& png, const InstanceMap& map,
                              std::map<std::string, std::string> metadata = {}) {
  save_instance_file(png, {map, {}, std::move(metadata)});
}

inline InstanceMap load_instance_map(const std::filesystem::path& png) { return load_instance_file(png).map; }

inline void save_segmentation(const std::filesystem::path& png, const SegmentationResult& seg,
                              std::map<std::string, std::string> metadata = {}) {
  save_instance_file(png, {seg.instance_map, seg.confidences, std::move(metadata)});
}

inline SegmentationResult load_segmentation(const std::filesystem::path& png) {
  auto f = load_instance_file(png);
  for (const auto& [id, _] : f.map.classes)
    if (!f.confidences.contains(id)) throw FormatError(png.string() + ": instance without confidence");
  return {std::move(f.map), std::move(f.confidences)};
}

}  // namespace shapeseg
