#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bobnet/model.hpp"
#include "bobnet/optimizer.hpp"
#include "bobnet/slicing.hpp"
#include "bobnet/volume.hpp"

namespace bobnet {

// Dataset directory contract: one sub-directory per volume holding
// volume.mhd, volume.raw and boxes.txt, plus split.txt at the root.
struct DatasetIndex {
  std::filesystem::path root;
  DatasetSplit split;
};

// Loads split.txt and verifies every listed volume directory is complete;
// a missing file raises a FormatError naming the volume.
DatasetIndex load_dataset_dir(const std::filesystem::path& root);

// Sorted union of structure names over every boxes.txt in the dataset;
// the model's output pairs follow this order.
std::vector<std::string> dataset_structure_names(const DatasetIndex& index);

// Resampled, normalized, labeled slices of all three planes of one volume.
std::vector<LabeledSlice> build_labeled_slices(const Volume3D& volume, const std::vector<BBox3D>& boxes,
                                               const std::vector<std::string>& structure_names,
                                               double target_spacing_mm);

struct TrainOptions {
  OptimizerConfig optimizer;
  double target_spacing_mm = 1.5;
  std::size_t min_input = 224;
  Rational channel_scale{1, 1};
  std::uint64_t seed = 1;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainResult {
  std::vector<std::string> structure_names;
  std::vector<EpochLog> epochs;
};

// Trains a BoBNet on all three planes' slices of the training volumes,
// evaluating validation F1 (threshold 0.5, native slice sizes) every epoch.
// Single-worker and bit-deterministic for a given seed. Throws
// std::runtime_error with an epoch/batch diagnostic if the loss or a
// gradient goes non-finite.
BobNet<float> train_model(const DatasetIndex& index, const TrainOptions& options, TrainResult& result,
                          std::ostream* log = nullptr);

// Micro-averaged F1 of thresholded slice predictions (native sizes).
double evaluate_slice_f1(const BobNet<float>& model, const std::vector<LabeledSlice>& slices,
                         double threshold = 0.5);

}  // namespace bobnet
