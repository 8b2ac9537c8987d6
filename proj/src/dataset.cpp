#include <cstring>

#include "json.hpp"

#include "cgat/dataset.hpp"
#include "cgat/error.hpp"
#include "cgat/parallel.hpp"
#include "cgat/sampling.hpp"

namespace cgat {

GraphRecord preprocess_mesh(const Mesh& mesh, std::size_t target_vertices) {
  GraphRecord r;
  const Mesh reduced = mesh.num_vertices() > target_vertices ? decimate_qem(mesh, target_vertices) : mesh;
  r.mesh = normalize_unit_sphere(reduced);
  r.features = compute_features(r.mesh);
  return r;
}

FeatureScaler fit_dataset_scaler(std::span<const GraphRecord> records, bool use_all) {
  std::vector<FeatureSet> fit_on;
  for (const auto& r : records) {
    if (use_all || r.split == Split::train) fit_on.push_back(r.features);
  }
  if (fit_on.empty()) fail(ErrorCode::empty_class, "no training samples to fit the feature scaler");
  return fit_scaler(fit_on, FeatureChannels::both);
}

void finalize_dataset(GraphDataset& dataset) {
  std::vector<int> labels;
  std::vector<std::size_t> unsplit;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    if (dataset.records[i].split == Split::none) {
      unsplit.push_back(i);
      labels.push_back(dataset.records[i].label);
    }
  }
  if (!unsplit.empty()) {
    const auto splits = stratified_split(labels, dataset.config.split_seed);
    for (std::size_t k = 0; k < unsplit.size(); ++k) dataset.records[unsplit[k]].split = splits[k];
  }
  dataset.scaler = fit_dataset_scaler(dataset.records, dataset.config.fit_scaler_on_all);
}

GraphDataset preprocess_dataset(std::span<const ManifestRecord> manifest, const std::filesystem::path& base_dir,
                                const PreprocessConfig& config) {
  GraphDataset dataset;
  dataset.config = config;
  dataset.records.resize(manifest.size());
  parallel_for(manifest.size(), [&](std::size_t i) {
    const auto& entry = manifest[i];
    std::filesystem::path path = entry.path;
    if (path.is_relative()) path = base_dir / path;
    GraphRecord r = preprocess_mesh(load_mesh(path), config.target_vertices);
    r.id = entry.path;
    r.label = entry.label;
    r.split = entry.split;
    dataset.records[i] = std::move(r);
  });
  finalize_dataset(dataset);
  return dataset;
}

namespace {

constexpr std::string_view kCacheMagic = "CGATGRAPHS1\n";

template <typename T>
void append_raw(std::string& out, const T* data, std::size_t count) {
  out.append(reinterpret_cast<const char*>(data), count * sizeof(T));
}

class CacheReader {
 public:
  explicit CacheReader(std::string_view bytes) : bytes_(bytes) {}

  std::string line() {
    const auto end = bytes_.find('\n', pos_);
    if (end == std::string_view::npos) fail(ErrorCode::malformed_file, "graph cache truncated");
    std::string out(bytes_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  template <typename T>
  void raw(T* dst, std::size_t count) {
    const std::size_t n = count * sizeof(T);
    if (bytes_.size() - pos_ < n) fail(ErrorCode::malformed_file, "graph cache truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) fail(ErrorCode::malformed_file, "graph cache truncated");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

void save_graph_cache(const std::filesystem::path& path, const GraphDataset& dataset) {
  const nlohmann::json header = {{"target_vertices", dataset.config.target_vertices},
                                 {"fit_scaler_on_all", dataset.config.fit_scaler_on_all},
                                 {"split_seed", dataset.config.split_seed},
                                 {"scaler_min", dataset.scaler.minimum},
                                 {"scaler_max", dataset.scaler.maximum},
                                 {"records", dataset.records.size()}};
  const std::string text = header.dump();
  std::string out(kCacheMagic);
  out += std::to_string(text.size()) + "\n" + text + "\n";
  for (const auto& r : dataset.records) {
    if (r.id.find_first_of("\t\n") != std::string::npos) {
      fail(ErrorCode::invalid_argument, "record id contains a tab or newline");
    }
    const std::size_t v = r.mesh.num_vertices();
    if (r.features.curvature.size() != v || r.features.centroid_distance.size() != v) {
      fail(ErrorCode::feature_length_mismatch, "features of '" + r.id + "' do not match its mesh");
    }
    out += r.id + "\t" + std::to_string(r.label) + "\t" + to_string(r.split) + "\t" + std::to_string(v) + "\t" +
           std::to_string(r.mesh.num_faces()) + "\n";
    for (const auto& p : r.mesh.vertices) append_raw(out, p.data(), 3);
    for (const auto& f : r.mesh.faces) append_raw(out, f.data(), 3);
    append_raw(out, r.features.curvature.data(), v);
    append_raw(out, r.features.centroid_distance.data(), v);
  }
  write_file(path, out);
}

GraphDataset load_graph_cache(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (std::string_view(bytes).substr(0, kCacheMagic.size()) != kCacheMagic) {
    fail(ErrorCode::malformed_file, path.string() + " is not a graph cache");
  }
  CacheReader in(std::string_view(bytes).substr(kCacheMagic.size()));
  GraphDataset dataset;
  std::size_t count = 0;
  try {
    const auto header = nlohmann::json::parse(in.take(std::stoull(in.line())));
    dataset.config.target_vertices = header.at("target_vertices").get<std::size_t>();
    dataset.config.fit_scaler_on_all = header.at("fit_scaler_on_all").get<bool>();
    dataset.config.split_seed = header.at("split_seed").get<std::uint64_t>();
    dataset.scaler.channels = FeatureChannels::both;
    dataset.scaler.minimum = header.at("scaler_min").get<std::vector<double>>();
    dataset.scaler.maximum = header.at("scaler_max").get<std::vector<double>>();
    count = header.at("records").get<std::size_t>();
    if (!in.line().empty()) fail(ErrorCode::malformed_file, "graph cache header not terminated");
  } catch (const std::exception& e) {
    if (dynamic_cast<const Error*>(&e)) throw;
    fail(ErrorCode::malformed_file, std::string("graph cache header: ") + e.what());
  }
  for (std::size_t k = 0; k < count; ++k) {
    const auto fields = split_tabs(in.line());
    if (fields.size() != 5) fail(ErrorCode::malformed_file, "bad graph cache record line");
    GraphRecord r;
    std::size_t v = 0, f = 0;
    try {
      r.id = fields[0];
      r.label = std::stoi(fields[1]);
      r.split = parse_split(fields[2]);
      v = std::stoull(fields[3]);
      f = std::stoull(fields[4]);
    } catch (const std::logic_error&) {
      fail(ErrorCode::malformed_file, "bad graph cache record line");
    }
    r.mesh.vertices.resize(v);
    r.mesh.faces.resize(f);
    for (auto& p : r.mesh.vertices) in.raw(p.data(), 3);
    for (auto& face : r.mesh.faces) in.raw(face.data(), 3);
    r.features.curvature.resize(v);
    r.features.centroid_distance.resize(v);
    in.raw(r.features.curvature.data(), v);
    in.raw(r.features.centroid_distance.data(), v);
    validate_mesh(r.mesh);
    dataset.records.push_back(std::move(r));
  }
  if (!in.done()) fail(ErrorCode::malformed_file, "trailing bytes in graph cache");
  return dataset;
}

Graph record_graph(const GraphRecord& record, const FeatureScaler& scaler, FeatureChannels channels) {
  return mesh_to_graph(record.mesh, apply_scaler(scaler.select(channels), record.features));
}

Sample make_sample(const GraphRecord& record, const FeatureScaler& scaler, const ModelConfig& config) {
  return {record.id, record.label, batch(prepare_graph(config, record_graph(record, scaler, config.features)))};
}

std::vector<Sample> make_samples(const GraphDataset& dataset, const ModelConfig& config, Split split) {
  std::vector<Sample> out;
  for (const auto& r : dataset.records) {
    if (r.split == split) out.push_back(make_sample(r, dataset.scaler, config));
  }
  return out;
}

}  // namespace cgat
