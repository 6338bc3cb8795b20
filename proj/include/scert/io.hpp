#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "scert/bounds.hpp"
#include "scert/netmodel.hpp"
#include "scert/trainer.hpp"

namespace scert {

enum class IoErrorCode {
  size_mismatch,
  unknown_activation,
  bad_version,
  missing_blob,
  bad_manifest,
  label_out_of_range,
  empty_dataset,
};

std::string to_string(IoErrorCode c);

class IoError : public std::runtime_error {
 public:
  IoError(IoErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  IoErrorCode code() const { return code_; }

 private:
  IoErrorCode code_;
};

inline constexpr int kFormatVersion = 1;

std::vector<double> read_blob(const std::filesystem::path& path, std::size_t expected_count);
void write_blob(const std::filesystem::path& path, const std::vector<double>& values);

// Writes manifest plus one blob per weight (and per non-zero reference) next to it.
void save_network(const NetworkSpec& net, const std::filesystem::path& manifest);
NetworkSpec load_network(const std::filesystem::path& manifest);

void save_dataset(const Dataset& data, const std::filesystem::path& manifest);
// class_count > 0 enables the label range check.
Dataset load_dataset(const std::filesystem::path& manifest, int class_count = 0);

struct AnalysisReport {
  std::string command;
  std::size_t sample_count = 0;
  double delta = 0.0;
  std::string mode;
  double margin = 0.0;
  double margin_fraction = 0.0;
  double train_error = 0.0;
  std::vector<BoundReport> bounds;
  std::vector<MisclassificationBound> misclassification;  // parallel to bounds
  std::vector<std::vector<int>> layer_ranks;
};

// CSV columns: name,value,chosen_p,vacuous. chosen_p joins entries with ';'.
std::string report_csv(const AnalysisReport& r);
std::string report_json(const AnalysisReport& r, bool with_meta);
std::string format_double(double v);

}  // namespace scert
