#include "scert/io.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace scert {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(IoErrorCode c) {
  switch (c) {
    case IoErrorCode::size_mismatch: return "size_mismatch";
    case IoErrorCode::unknown_activation: return "unknown_activation";
    case IoErrorCode::bad_version: return "bad_version";
    case IoErrorCode::missing_blob: return "missing_blob";
    case IoErrorCode::bad_manifest: return "bad_manifest";
    case IoErrorCode::label_out_of_range: return "label_out_of_range";
    case IoErrorCode::empty_dataset: return "empty_dataset";
  }
  return "unknown";
}

namespace {

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorCode::missing_blob, "cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

json read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorCode::bad_manifest, "cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(IoErrorCode::bad_manifest, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw IoError(IoErrorCode::bad_manifest, path.string() + ": manifest must be an object");
  if (!j.contains("format_version") || !j["format_version"].is_number_integer())
    throw IoError(IoErrorCode::bad_manifest, path.string() + ": missing format_version");
  if (j["format_version"].get<int>() != kFormatVersion)
    throw IoError(IoErrorCode::bad_version, path.string() + ": unsupported format_version " + j["format_version"].dump());
  return j;
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw IoError(IoErrorCode::bad_manifest, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(IoErrorCode::bad_manifest, where + ": field '" + key + "': " + e.what());
  }
}

Activation activation_field(const json& j, const std::string& where) {
  const std::string name = j.value("activation", std::string("relu"));
  try {
    return parse_activation(name);
  } catch (const std::invalid_argument&) {
    throw IoError(IoErrorCode::unknown_activation, where + ": unknown activation '" + name + "'");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError(IoErrorCode::bad_manifest, "cannot write " + path.string());
  out << text;
}

}  // namespace

std::vector<double> read_blob(const fs::path& path, std::size_t expected_count) {
  const std::vector<char> bytes = read_bytes(path);
  if (bytes.size() != 8 * expected_count)
    throw IoError(IoErrorCode::size_mismatch, path.string() + ": expected " + std::to_string(8 * expected_count) +
                                                  " bytes, found " + std::to_string(bytes.size()));
  std::vector<double> out(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    std::uint64_t raw;
    std::memcpy(&raw, bytes.data() + 8 * i, 8);
    out[i] = std::bit_cast<double>(to_le(raw));
  }
  return out;
}

void write_blob(const fs::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoErrorCode::missing_blob, "cannot write " + path.string());
  for (double v : values) {
    const std::uint64_t raw = to_le(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&raw), 8);
  }
}

void save_network(const NetworkSpec& net, const fs::path& manifest) {
  net.validate();
  const fs::path dir = manifest.parent_path();
  const std::string stem = manifest.stem().string();
  json j;
  j["format_version"] = kFormatVersion;
  j["class_count"] = net.class_count;
  j["last_layer_activation"] = net.last_activation;
  j["layers"] = json::array();
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const Layer& l = net.layers[i];
    json e;
    const Matrix& w = layer_weight(l);
    const std::string wname = stem + "_w" + std::to_string(i) + ".bin";
    write_blob(dir / wname, w.values());
    e["weight"] = wname;
    e["activation"] = to_string(layer_activation(l));
    e["rho"] = layer_rho(l);
    if (layer_reference(l).max_abs() > 0.0) {
      const std::string rname = stem + "_m" + std::to_string(i) + ".bin";
      write_blob(dir / rname, layer_reference(l).values());
      e["reference"] = rname;
    }
    if (const auto* c = std::get_if<ConvLayer>(&l)) {
      if (!c->geometry) throw IoError(IoErrorCode::bad_manifest, "conv layer " + std::to_string(i) + " has no geometry to save");
      const ConvGeometry& g = *c->geometry;
      e["kind"] = "conv";
      e["in_channels"] = g.in_channels;
      e["in_height"] = g.in_height;
      e["in_width"] = g.in_width;
      e["kernel"] = {g.kernel_h, g.kernel_w};
      e["stride"] = g.stride;
      e["out_channels"] = c->out_channels();
      e["pool"] = {{"kind", to_string(g.pool)}, {"size", g.pool_size}, {"stride", g.pool_stride}};
    } else {
      e["kind"] = "dense";
      e["rows"] = w.rows();
      e["cols"] = w.cols();
    }
    j["layers"].push_back(std::move(e));
  }
  write_text(manifest, j.dump(2) + "\n");
}

NetworkSpec load_network(const fs::path& manifest) {
  const json j = read_manifest(manifest);
  const fs::path dir = manifest.parent_path();
  const std::string where = manifest.string();
  NetworkSpec net;
  net.class_count = field<int>(j, "class_count", where);
  net.last_activation = j.value("last_layer_activation", false);
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
    throw IoError(IoErrorCode::bad_manifest, where + ": 'layers' must be a non-empty array");
  std::size_t idx = 0;
  for (const json& e : j["layers"]) {
    const std::string lw = where + " layer " + std::to_string(idx++);
    const std::string kind = field<std::string>(e, "kind", lw);
    const Activation act = activation_field(e, lw);
    const double rho = e.value("rho", 1.0);
    if (kind == "dense") {
      const auto rows = field<std::size_t>(e, "rows", lw), cols = field<std::size_t>(e, "cols", lw);
      DenseLayer d;
      d.weight = Matrix(rows, cols, read_blob(dir / field<std::string>(e, "weight", lw), rows * cols));
      d.reference = e.contains("reference")
                        ? Matrix(rows, cols, read_blob(dir / field<std::string>(e, "reference", lw), rows * cols))
                        : Matrix(rows, cols);
      d.activation = act;
      d.rho = rho;
      net.layers.emplace_back(std::move(d));
    } else if (kind == "conv") {
      ConvGeometry g;
      g.in_channels = field<int>(e, "in_channels", lw);
      g.in_height = field<int>(e, "in_height", lw);
      g.in_width = field<int>(e, "in_width", lw);
      const auto kernel = field<std::vector<int>>(e, "kernel", lw);
      if (kernel.size() != 2) throw IoError(IoErrorCode::bad_manifest, lw + ": kernel must be [height, width]");
      g.kernel_h = kernel[0];
      g.kernel_w = kernel[1];
      g.stride = e.value("stride", 1);
      if (e.contains("pool")) {
        const json& p = e["pool"];
        try {
          g.pool = parse_pool(p.value("kind", std::string("none")));
        } catch (const std::invalid_argument& ex) {
          throw IoError(IoErrorCode::bad_manifest, lw + ": " + ex.what());
        }
        g.pool_size = p.value("size", 1);
        g.pool_stride = p.value("stride", g.pool_size);
      }
      if (g.in_channels <= 0 || g.in_height <= 0 || g.in_width <= 0 || g.kernel_h <= 0 || g.kernel_w <= 0 ||
          g.stride <= 0 || g.kernel_h > g.in_height || g.kernel_w > g.in_width)
        throw IoError(IoErrorCode::size_mismatch, lw + ": inconsistent conv geometry");
      const auto out_ch = field<std::size_t>(e, "out_channels", lw);
      const std::size_t dim = static_cast<std::size_t>(g.in_channels * g.kernel_h * g.kernel_w);
      Matrix f(out_ch, dim, read_blob(dir / field<std::string>(e, "weight", lw), out_ch * dim));
      ConvLayer c;
      try {
        c = make_conv_layer(g, std::move(f), act, rho);
      } catch (const std::invalid_argument& ex) {
        throw IoError(IoErrorCode::size_mismatch, lw + ": " + ex.what());
      }
      if (e.contains("reference"))
        c.reference = Matrix(out_ch, dim, read_blob(dir / field<std::string>(e, "reference", lw), out_ch * dim));
      net.layers.emplace_back(std::move(c));
    } else {
      throw IoError(IoErrorCode::bad_manifest, lw + ": unknown layer kind '" + kind + "'");
    }
  }
  try {
    net.validate();
  } catch (const std::invalid_argument& ex) {
    throw IoError(IoErrorCode::size_mismatch, where + ": " + ex.what());
  }
  return net;
}

void save_dataset(const Dataset& data, const fs::path& manifest) {
  const fs::path dir = manifest.parent_path();
  const std::string stem = manifest.stem().string();
  write_blob(dir / (stem + "_x.bin"), data.inputs.values());
  {
    std::ofstream out(dir / (stem + "_y.bin"), std::ios::binary);
    if (!out) throw IoError(IoErrorCode::missing_blob, "cannot write labels next to " + manifest.string());
    for (int y : data.labels) {
      const std::int32_t raw = to_le(static_cast<std::int32_t>(y));
      out.write(reinterpret_cast<const char*>(&raw), 4);
    }
  }
  json j;
  j["format_version"] = kFormatVersion;
  j["samples"] = data.size();
  j["features"] = data.inputs.cols();
  j["inputs"] = stem + "_x.bin";
  j["labels"] = stem + "_y.bin";
  write_text(manifest, j.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& manifest, int class_count) {
  const json j = read_manifest(manifest);
  const fs::path dir = manifest.parent_path();
  const std::string where = manifest.string();
  const auto n = field<std::size_t>(j, "samples", where), d = field<std::size_t>(j, "features", where);
  if (n == 0 || d == 0) throw IoError(IoErrorCode::empty_dataset, where + ": dataset has no samples or no features");
  Dataset out;
  out.inputs = Matrix(n, d, read_blob(dir / field<std::string>(j, "inputs", where), n * d));
  const std::vector<char> bytes = read_bytes(dir / field<std::string>(j, "labels", where));
  if (bytes.size() != 4 * n)
    throw IoError(IoErrorCode::size_mismatch, where + ": label blob holds " + std::to_string(bytes.size()) +
                                                  " bytes, expected " + std::to_string(4 * n));
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int32_t raw;
    std::memcpy(&raw, bytes.data() + 4 * i, 4);
    out.labels[i] = to_le(raw);
    if (out.labels[i] < 0 || (class_count > 0 && out.labels[i] >= class_count))
      throw IoError(IoErrorCode::label_out_of_range,
                    where + ": label " + std::to_string(out.labels[i]) + " at sample " + std::to_string(i) + " is out of range");
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

std::string join_p(const std::vector<double>& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ';';
    s += format_double(p[i]);
  }
  return s;
}

}  // namespace

std::string report_csv(const AnalysisReport& r) {
  std::ostringstream out;
  out << "name,value,chosen_p,vacuous\n";
  for (std::size_t i = 0; i < r.bounds.size(); ++i) {
    const bool vacuous = i < r.misclassification.size() && r.misclassification[i].vacuous;
    out << r.bounds[i].name << ',' << format_double(r.bounds[i].value) << ',' << join_p(r.bounds[i].chosen_p) << ','
        << (vacuous ? "true" : "false") << '\n';
  }
  return out.str();
}

std::string report_json(const AnalysisReport& r, bool with_meta) {
  // nlohmann prints doubles in shortest round-trip form, which parses to the same value as %.17g.
  json j;
  j["command"] = r.command;
  j["sample_count"] = r.sample_count;
  j["delta"] = number(r.delta);
  j["mode"] = r.mode;
  j["margin"] = number(r.margin);
  j["margin_fraction"] = number(r.margin_fraction);
  j["train_error"] = number(r.train_error);
  j["layer_ranks"] = r.layer_ranks;
  j["bounds"] = json::array();
  for (std::size_t i = 0; i < r.bounds.size(); ++i) {
    const BoundReport& b = r.bounds[i];
    json e;
    e["name"] = b.name;
    e["value"] = number(b.value);
    e["mode"] = to_string(b.mode);
    e["chosen_p"] = json::array();
    for (double p : b.chosen_p) e["chosen_p"].push_back(number(p));
    json comps = json::object();
    for (const auto& [k, v] : b.components) comps[k] = number(v);
    e["components"] = comps;
    if (i < r.misclassification.size()) {
      e["misclassification_bound"] = number(r.misclassification[i].value);
      e["vacuous"] = r.misclassification[i].vacuous;
    }
    j["bounds"].push_back(std::move(e));
  }
  if (with_meta) {
    const auto now = std::chrono::system_clock::now();
    j["meta"] = {{"format_version", kFormatVersion},
                 {"generated_unix", std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()}};
  }
  return j.dump(2) + "\n";
}

}  // namespace scert
