#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zonocert/tensor.hpp"

namespace zonocert::data {

struct Example {
    nn::Tensor x; // entries in [0,1]
    int label = 0;
};

struct DatasetSplit {
    std::vector<Example> examples;
    std::string name; // train | test
    int num_classes = 0;

    std::size_t size() const { return examples.size(); }
};

// IDX-format reader (big-endian magic 0x803 for images, 0x801 for labels).
// Pixels are scaled to [0,1] by /255. limit == 0 keeps everything.
DatasetSplit load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                            int limit, const std::string& name);

// Seeded Gaussian clusters clipped to the unit box; class means are placed
// pairwise at least `margin` apart.
DatasetSplit synth_blobs(int classes, int per_class, int dim, double margin, std::uint64_t seed,
                         const std::string& name);

} // namespace zonocert::data
