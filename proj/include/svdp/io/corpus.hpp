#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "svdp/benchmark.hpp"
#include "svdp/checkpoint.hpp"
#include "svdp/errors.hpp"
#include "svdp/io/hash.hpp"
#include "svdp/io/png.hpp"

namespace svdp {

inline constexpr double kDepthPngScale = 256.0;  // depth code = round(depth * 256)

namespace detail {

inline std::string numbered(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

}  // namespace detail

/// Writes the corpus as PNGs plus manifest.json under `dir` (created if absent).
template <typename T>
void save_corpus(const Corpus<T>& c, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "source");
  nlohmann::ordered_json m;
  m["format"] = "svdp-corpus";
  m["version"] = 1;
  m["seed"] = c.seed;
  m["height"] = c.options.height;
  m["width"] = c.options.width;
  m["n_source"] = c.options.n_source;
  m["n_per_domain"] = c.options.n_per_domain;
  m["domain_order"] = c.domains;
  for (std::size_t d = 0; d < kDomainOrder.size(); ++d) m["severity"][to_string(kDomainOrder[d])] = c.options.severity[d];
  m["depth_png_scale"] = kDepthPngScale;
  m["source"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < c.source.size(); ++i) {
    const std::string stem = "source/" + detail::numbered(i);
    png::write_rgb(dir + "/" + stem + "_image.png", c.source[i].image);
    png::write_labels(dir + "/" + stem + "_labels.png", c.source[i].labels);
    png::write_scalar16(dir + "/" + stem + "_depth.png", c.source[i].depth, kDepthPngScale);
    m["source"].push_back({{"image", stem + "_image.png"}, {"labels", stem + "_labels.png"}, {"depth", stem + "_depth.png"}});
  }
  m["target"] = nlohmann::ordered_json::array();
  for (const auto& s : c.target) {
    fs::create_directories(fs::path(dir) / "target" / s.domain_tag);
    const std::string stem = "target/" + s.domain_tag + "/" + detail::numbered(s.index);
    png::write_rgb(dir + "/" + stem + "_image.png", s.image);
    png::write_labels(dir + "/" + stem + "_labels.png", s.truth.labels);
    png::write_scalar16(dir + "/" + stem + "_depth.png", s.truth.depth, kDepthPngScale);
    m["target"].push_back({{"domain", s.domain_tag}, {"index", s.index}, {"image", stem + "_image.png"},
                           {"labels", stem + "_labels.png"}, {"depth", stem + "_depth.png"}});
  }
  std::ofstream f(dir + "/manifest.json", std::ios::binary);
  f << m.dump(2) << '\n';
  if (!f) throw IoError("cannot write " + dir + "/manifest.json");
}

template <typename T>
Corpus<T> load_corpus(const std::string& dir) {
  std::ifstream f(dir + "/manifest.json", std::ios::binary);
  if (!f) throw IoError("no manifest.json in " + dir);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed corpus manifest: " + std::string(e.what()));
  }
  if (m.value("format", "") != "svdp-corpus") throw IoError(dir + " is not an svdp corpus");
  Corpus<T> c;
  c.seed = m.at("seed").get<std::uint64_t>();
  c.options.height = m.at("height");
  c.options.width = m.at("width");
  c.options.n_source = m.at("n_source");
  c.options.n_per_domain = m.at("n_per_domain");
  c.domains = m.at("domain_order").get<std::vector<std::string>>();
  for (std::size_t d = 0; d < kDomainOrder.size(); ++d) c.options.severity[d] = m.at("severity").at(to_string(kDomainOrder[d]));
  const double scale = m.at("depth_png_scale");
  for (const auto& e : m.at("source")) {
    SyntheticScene<T> s;
    s.image = png::read_rgb<T>(dir + "/" + e.at("image").get<std::string>());
    s.labels = png::read_labels(dir + "/" + e.at("labels").get<std::string>());
    s.depth = png::read_scalar16<T>(dir + "/" + e.at("depth").get<std::string>(), scale);
    c.source.push_back(std::move(s));
  }
  for (const auto& e : m.at("target")) {
    StreamSample<T> s;
    s.domain_tag = e.at("domain");
    s.index = e.at("index");
    s.image = png::read_rgb<T>(dir + "/" + e.at("image").get<std::string>());
    s.truth.labels = png::read_labels(dir + "/" + e.at("labels").get<std::string>());
    s.truth.depth = png::read_scalar16<T>(dir + "/" + e.at("depth").get<std::string>(), scale);
    c.target.push_back(std::move(s));
  }
  return c;
}

/// SHA-1 over every file of the corpus directory, in sorted relative-path order.
inline std::string corpus_hash(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir).generic_string());
  }
  std::sort(files.begin(), files.end());
  Sha1 h;
  for (const auto& rel : files) {
    const auto bytes = read_file_bytes(dir + "/" + rel);
    h.update(rel + '\0' + std::to_string(bytes.size()) + '\0');
    h.update(bytes);
  }
  return h.hex();
}

}  // namespace svdp
