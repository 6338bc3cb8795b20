#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "scert/io.hpp"

using namespace scert;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("scert_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

NetworkSpec mixed_net(std::mt19937_64& rng) {
  ConvGeometry g;
  g.in_channels = 1;
  g.in_height = 5;
  g.in_width = 5;
  g.kernel_h = 2;
  g.kernel_w = 2;
  g.pool = PoolKind::max;
  g.pool_size = 2;
  g.pool_stride = 2;
  NetworkSpec net;
  ConvLayer c = make_conv_layer(g, Matrix::gaussian(2, 4, rng));
  c.reference = Matrix::gaussian(2, 4, rng);
  net.layers.emplace_back(c);
  net.layers.emplace_back(DenseLayer{Matrix::gaussian(3, 8, rng), Matrix(3, 8), Activation::abs, 0.5});
  net.class_count = 3;
  return net;
}

void expect_code(IoErrorCode want, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "no IoError thrown";
  } catch (const IoError& e) {
    EXPECT_EQ(e.code(), want) << e.what();
  }
}

void truncate(const fs::path& p, std::size_t bytes) { fs::resize_file(p, bytes); }

}  // namespace

TEST(Blob, RoundTripBitIdentical) {
  const fs::path d = scratch("blob");
  const std::vector<double> v = {0.1, -3.5e300, 5e-324, -0.0, 1.0 / 3.0};
  write_blob(d / "x.bin", v);
  EXPECT_EQ(fs::file_size(d / "x.bin"), v.size() * 8);
  const auto w = read_blob(d / "x.bin", v.size());
  ASSERT_EQ(w.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(v[i]), std::bit_cast<std::uint64_t>(w[i]));
}

TEST(Network, RoundTripBitIdentical) {
  std::mt19937_64 rng(71);
  const NetworkSpec net = mixed_net(rng);
  const fs::path d = scratch("net");
  save_network(net, d / "net.json");
  const NetworkSpec back = load_network(d / "net.json");
  ASSERT_EQ(back.depth(), net.depth());
  EXPECT_EQ(back.class_count, 3);
  for (std::size_t i = 0; i < net.depth(); ++i) {
    EXPECT_EQ(layer_weight(back.layers[i]).values(), layer_weight(net.layers[i]).values());
    EXPECT_EQ(layer_reference(back.layers[i]).values(), layer_reference(net.layers[i]).values());
    EXPECT_EQ(layer_rho(back.layers[i]), layer_rho(net.layers[i]));
    EXPECT_EQ(layer_activation(back.layers[i]), layer_activation(net.layers[i]));
  }
  const auto& c = std::get<ConvLayer>(back.layers[0]);
  EXPECT_EQ(c.patches, std::get<ConvLayer>(net.layers[0]).patches);
  EXPECT_EQ(c.pool_windows, std::get<ConvLayer>(net.layers[0]).pool_windows);
  std::vector<double> x(25, 0.3);
  EXPECT_EQ(forward(back, x), forward(net, x));
}

TEST(Network, MissingBlob) {
  std::mt19937_64 rng(72);
  const fs::path d = scratch("missing");
  save_network(mixed_net(rng), d / "net.json");
  fs::remove(d / "net_w1.bin");
  expect_code(IoErrorCode::missing_blob, [&] { load_network(d / "net.json"); });
}

TEST(Network, TruncatedBlob) {
  std::mt19937_64 rng(73);
  const fs::path d = scratch("trunc");
  save_network(mixed_net(rng), d / "net.json");
  truncate(d / "net_w1.bin", 16);
  expect_code(IoErrorCode::size_mismatch, [&] { load_network(d / "net.json"); });
}

TEST(Network, BadVersionAndActivation) {
  std::mt19937_64 rng(74);
  const fs::path d = scratch("version");
  save_network(mixed_net(rng), d / "net.json");
  std::ifstream in(d / "net.json");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  auto rewrite = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    const auto pos = t.find(from);
    ASSERT_NE(pos, std::string::npos);
    t.replace(pos, from.size(), to);
    std::ofstream(d / "net.json") << t;
  };
  rewrite("\"format_version\": 1", "\"format_version\": 99");
  expect_code(IoErrorCode::bad_version, [&] { load_network(d / "net.json"); });
  rewrite("\"abs\"", "\"swish\"");
  expect_code(IoErrorCode::unknown_activation, [&] { load_network(d / "net.json"); });
  std::ofstream(d / "net.json") << "{ not json";
  expect_code(IoErrorCode::bad_manifest, [&] { load_network(d / "net.json"); });
}

TEST(Dataset, RoundTripAndLabelRange) {
  std::mt19937_64 rng(75);
  Dataset data;
  data.inputs = Matrix::gaussian(6, 4, rng);
  data.labels = {0, 1, 2, 0, 1, 2};
  const fs::path d = scratch("data");
  save_dataset(data, d / "data.json");
  const Dataset back = load_dataset(d / "data.json", 3);
  EXPECT_EQ(back.inputs.values(), data.inputs.values());
  EXPECT_EQ(back.labels, data.labels);
  expect_code(IoErrorCode::label_out_of_range, [&] { load_dataset(d / "data.json", 2); });
}

TEST(Dataset, EmptyRejected) {
  Dataset data;
  data.inputs = Matrix(0, 3);
  const fs::path d = scratch("empty");
  expect_code(IoErrorCode::empty_dataset, [&] {
    save_dataset(data, d / "data.json");
    load_dataset(d / "data.json");
  });
}

TEST(Report, CsvAndJsonShape) {
  AnalysisReport r;
  r.command = "analyze";
  r.sample_count = 10;
  r.delta = 0.01;
  r.mode = "dominant";
  BoundReport b;
  b.name = "dnn";
  b.value = 0.25;
  b.chosen_p = {0.5, 1.0};
  r.bounds.push_back(b);
  r.misclassification.push_back({0.35, 0.1, false});
  r.layer_ranks = {{2, 3}};
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "name,value,chosen_p,vacuous");
  EXPECT_NE(csv.find("dnn,0.25,0.5;1,"), std::string::npos);
  const std::string a = report_json(r, false);
  EXPECT_EQ(a, report_json(r, false));
  EXPECT_EQ(a.find("generated_unix"), std::string::npos);
  EXPECT_NE(report_json(r, true).find("generated_unix"), std::string::npos);
  EXPECT_EQ(format_double(INFINITY), "inf");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}
