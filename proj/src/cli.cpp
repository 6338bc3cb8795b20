#include "scert/cli.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "scert/bounds.hpp"
#include "scert/io.hpp"
#include "scert/popt.hpp"
#include "scert/verify.hpp"

namespace scert {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AnalyzeArgs {
  std::string net;
  std::string data;
  double delta = 0.01;
  std::string mode = "dominant";
  double p_step = 0.05;
  std::string margin = "auto";
  double rank_tol = kDefaultRankTol;
  std::string out;
  std::string csv;
  bool no_meta = false;
};

void add_analyze_options(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--net", a.net, "network manifest (JSON)")->required();
  cmd->add_option("--data", a.data, "dataset manifest used for the empirical quantities")->required();
  cmd->add_option("--delta", a.delta, "confidence parameter in (0, 1)");
  cmd->add_option("--mode", a.mode, "dominant or explicit")->check(CLI::IsMember({"dominant", "explicit"}));
  cmd->add_option("--p-grid", a.p_step, "step of the Schatten index grid on [0, 2]");
  cmd->add_option("--margin", a.margin, "auto, or a positive margin value");
  cmd->add_option("--rank-tol", a.rank_tol, "relative tolerance for numeric ranks");
  cmd->add_option("--out", a.out, "write the JSON report here (stdout if omitted)");
  cmd->add_option("--csv", a.csv, "also write the CSV summary here");
  cmd->add_flag("--no-meta", a.no_meta, "omit the timestamp block for byte-stable output");
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError(IoErrorCode::bad_manifest, "cannot write " + path);
  out << text;
}

void add_bound(AnalysisReport& rep, BoundReport b, const ActivationStats& stats) {
  rep.misclassification.push_back(misclassification_bound(b.value, stats, rep.margin));
  rep.bounds.push_back(std::move(b));
}

int cmd_analyze(const AnalyzeArgs& a, bool with_baselines) {
  const NetworkSpec net = load_network(a.net);
  const Dataset data = load_dataset(a.data, net.class_count);
  if (data.inputs.cols() != net.input_size())
    throw IoError(IoErrorCode::size_mismatch, "dataset has " + std::to_string(data.inputs.cols()) +
                                                  " features, network expects " + std::to_string(net.input_size()));
  const ActivationStats stats = activation_stats(net, data.inputs, data.labels);

  AnalysisReport rep;
  rep.command = with_baselines ? "compare" : "analyze";
  rep.sample_count = data.size();
  rep.delta = a.delta;
  rep.mode = a.mode;
  rep.train_error = stats.error_rate();
  if (a.margin == "auto") {
    const auto g = select_margin(stats, 0.1);
    if (!g) throw std::domain_error("no positive margin keeps the margin violation rate at or below 0.1; pass --margin explicitly");
    rep.margin = *g;
  } else {
    try {
      std::size_t pos = 0;
      rep.margin = std::stod(a.margin, &pos);
      if (pos != a.margin.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw UsageError("--margin must be 'auto' or a number, got '" + a.margin + "'");
    }
    if (!(rep.margin > 0.0)) throw UsageError("--margin must be positive");
  }
  rep.margin_fraction = margin_fraction(stats, rep.margin);

  BoundConfig cfg;
  cfg.delta = a.delta;
  cfg.sample_count = data.size();
  cfg.lip = 2.0 / rep.margin;
  cfg.mode = parse_mode(a.mode);
  cfg.p_grid_step = a.p_step;
  cfg.rank_tol = a.rank_tol;
  try {
    cfg.validate();
    p_grid(cfg.p_grid_step);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const AnalysisInputs in = prepare_inputs(net, stats, a.rank_tol);
  for (const LayerSpectrum& s : in.spectra) rep.layer_ranks.push_back({s.rank, rank_from_singulars(s.dev_singulars, 1e-3)});

  const bool dense = in.all_dense;
  for (BoundKind kind : dense ? std::vector<BoundKind>{BoundKind::dnn, BoundKind::dnn_aug}
                              : std::vector<BoundKind>{BoundKind::cnn, BoundKind::cnn_aug}) {
    PGridResult r = optimize_p(kind, cfg, in);
    r.report.components["cap"] = r.cap;
    add_bound(rep, std::move(r.report), stats);
  }
  add_bound(rep, bound_p0(dense ? BoundKind::dnn : BoundKind::cnn, cfg, in), stats);
  const bool single_linear = dense && net.depth() == 1;
  if (single_linear) {
    BoundReport best;
    best.value = std::numeric_limits<double>::infinity();
    for (double p : p_grid(cfg.p_grid_step)) {
      BoundReport b = bound_linear(in.spectra[0], cfg, static_cast<std::size_t>(net.class_count), net.input_size(), p,
                                   stats.input_bound);
      if (b.value < best.value) best = std::move(b);
    }
    add_bound(rep, std::move(best), stats);
  }
  if (with_baselines) {
    std::vector<std::string> names;
    if (dense)
      names = {"golowich", "neyshabur", "bartlett", "long_sedghi", "graf", "alt", "alt_c1_1"};
    else
      names = {"galanti_cnn", "ledent_cnn", "long_sedghi", "graf"};
    if (single_linear) names.push_back("lei_linear");
    for (const auto& n : names) add_bound(rep, baseline(n, in, cfg), stats);
  }

  const std::string json = report_json(rep, !a.no_meta);
  if (a.out.empty())
    std::cout << json;
  else
    write_file(a.out, json);
  if (!a.csv.empty()) write_file(a.csv, report_csv(rep));
  return exit_ok;
}

struct TrainArgs {
  std::string config;
  std::string out_net;
  std::string out_train;
  std::string out_test;
};

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) && !j[key].is_null() ? j[key].get<T>() : fallback;
}

int cmd_train(const TrainArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw IoError(IoErrorCode::bad_manifest, "cannot open config " + a.config);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoErrorCode::bad_manifest, a.config + ": " + e.what());
  }
  static const std::set<std::string> known = {
      "seed",     "classes",    "features",   "train_samples", "test_samples", "center_radius", "noise_std",
      "min_separation", "hidden", "linear_prefix", "activation", "conv", "in_channels", "in_height", "in_width",
      "epochs", "batch_size", "learning_rate", "weight_decay", "spectral_cap"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw IoError(IoErrorCode::bad_manifest, a.config + ": unknown key '" + k + "'");

  TrainConfig cfg;
  SynthOptions so;
  std::size_t n_train = 0, n_test = 0;
  try {
    cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
    cfg.arch.classes = get_or<std::size_t>(j, "classes", 2);
    cfg.arch.input_dim = get_or<std::size_t>(j, "features", 2);
    n_train = get_or<std::size_t>(j, "train_samples", 200);
    n_test = get_or<std::size_t>(j, "test_samples", 200);
    so.center_radius = get_or(j, "center_radius", so.center_radius);
    so.noise_std = get_or(j, "noise_std", so.noise_std);
    so.min_separation = get_or(j, "min_separation", so.min_separation);
    cfg.arch.hidden = get_or<std::vector<std::size_t>>(j, "hidden", {});
    cfg.arch.linear_prefix = get_or(j, "linear_prefix", 0);
    cfg.arch.activation = parse_activation(get_or<std::string>(j, "activation", "relu"));
    cfg.arch.in_channels = get_or(j, "in_channels", 1);
    cfg.arch.in_height = get_or(j, "in_height", 0);
    cfg.arch.in_width = get_or(j, "in_width", 0);
    if (j.contains("conv"))
      for (const auto& c : j["conv"]) {
        ConvStage st;
        st.out_channels = get_or(c, "out_channels", st.out_channels);
        st.kernel = get_or(c, "kernel", st.kernel);
        st.stride = get_or(c, "stride", st.stride);
        st.pool = get_or(c, "pool", st.pool);
        st.pool_stride = get_or(c, "pool_stride", st.pool_stride);
        cfg.arch.conv.push_back(st);
      }
    cfg.epochs = get_or(j, "epochs", cfg.epochs);
    cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
    cfg.learning_rate = get_or(j, "learning_rate", cfg.learning_rate);
    cfg.weight_decay = get_or(j, "weight_decay", cfg.weight_decay);
    if (j.contains("spectral_cap") && !j["spectral_cap"].is_null()) cfg.spectral_cap = j["spectral_cap"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoErrorCode::bad_manifest, a.config + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(IoErrorCode::unknown_activation, a.config + ": " + e.what());
  }

  const Dataset all = synth_dataset(cfg.arch.classes, cfg.arch.input_dim, n_train + n_test, cfg.seed, so);
  const Dataset train = subset(all, 0, n_train), test = subset(all, n_train, n_train + n_test);
  const TrainResult res = sgd_train(build_network(cfg.arch, cfg.seed), train, cfg);
  save_network(res.net, a.out_net);
  if (!a.out_train.empty()) save_dataset(train, a.out_train);
  if (!a.out_test.empty() && test.size() > 0) save_dataset(test, a.out_test);
  std::cout << "final objective " << format_double(res.epoch_loss.back()) << "\n"
            << "train accuracy " << format_double(accuracy(res.net, train)) << "\n";
  if (test.size() > 0) std::cout << "test accuracy " << format_double(accuracy(res.net, test)) << "\n";
  return exit_ok;
}

int cmd_verify(const std::vector<std::string>& suites, bool quick) {
  std::vector<CheckResult> results;
  auto want = [&](const char* s) { return suites.empty() || std::find(suites.begin(), suites.end(), s) != suites.end(); };
  if (want("variational")) {
    DescentOptions o;
    if (quick) o.seeds = 4;
    results.push_back(check_variational(quick ? 12 : 100, 1, o));
    results.push_back(check_schatten_identity(quick ? 10 : 50));
  }
  if (want("decomposition")) results.push_back(check_decomposition(quick ? 40 : 200));
  if (want("cover")) results.push_back(check_cover_domination(4, quick));
  if (want("conv")) results.push_back(check_conv_operator());
  if (want("gradient")) results.push_back(check_gradient());
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " [" << r.instances << " cases, "
              << r.seconds << " s]\n";
    ok = ok && r.passed;
  }
  return ok ? exit_ok : exit_verify;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Schatten-norm generalization certificates for trained networks"};
  app.require_subcommand(1);

  AnalyzeArgs analyze_args, compare_args;
  auto* analyze = app.add_subcommand("analyze", "evaluate the Schatten-class bounds on a trained network");
  add_analyze_options(analyze, analyze_args);
  auto* compare = app.add_subcommand("compare", "as analyze, plus the norm- and parameter-based baselines");
  add_analyze_options(compare, compare_args);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a network on a synthetic task described by a JSON config");
  train->add_option("--config", train_args.config, "training config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out-net", train_args.out_net, "network manifest to write")->required();
  train->add_option("--out-train", train_args.out_train, "training set manifest to write");
  train->add_option("--out-test", train_args.out_test, "held-out set manifest to write");

  std::vector<std::string> suites;
  bool quick = false;
  auto* verify = app.add_subcommand("verify", "run the numerical oracle suites");
  verify->add_option("--suite", suites, "variational, decomposition, cover, conv, gradient (default: all)")
      ->check(CLI::IsMember({"variational", "decomposition", "cover", "conv", "gradient"}));
  verify->add_flag("--quick", quick, "reduced instance counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*analyze) return cmd_analyze(analyze_args, false);
    if (*compare) return cmd_analyze(compare_args, true);
    if (*train) return cmd_train(train_args);
    if (*verify) return cmd_verify(suites, quick);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const IoError& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_data;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_data;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_data;
  }
  return exit_usage;
}

}  // namespace scert
