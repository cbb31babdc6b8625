#pragma once

// Self-contained 28x28 digit-glyph dataset in IDX format. Stands in for an
// MNIST subset on machines without the real files: ten glyph classes with
// random placement, stroke-intensity jitter, pixel dropout and Gaussian
// noise, tuned so small networks plateau well below 100% accuracy.

#include <cstdint>
#include <string>

namespace zonocert::testsupport {

struct GlyphNoise {
    double sigma = 18.0;       // Gaussian pixel noise, 0..255 scale
    double dropout = 0.08;     // probability a stroke pixel is dropped
    int max_shift = 6;         // uniform placement jitter in pixels
};

void write_glyph_idx(const std::string& images_path, const std::string& labels_path, int count,
                     std::uint64_t seed, const GlyphNoise& noise = {});

// Writes train/test IDX files into dir (names: train-images.idx,
// train-labels.idx, test-images.idx, test-labels.idx) unless already present.
void ensure_glyph_dataset(const std::string& dir, int train_n, int test_n, std::uint64_t seed);

} // namespace zonocert::testsupport
