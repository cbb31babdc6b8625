#include "zonocert/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "zonocert/rng.hpp"

namespace zonocert::data {

namespace {

std::uint32_t read_u32_be(std::istream& is, const std::string& path) {
    unsigned char buf[4];
    if (!is.read(reinterpret_cast<char*>(buf), 4)) throw FormatError("truncated file: " + path);
    return (static_cast<std::uint32_t>(buf[0]) << 24) | (static_cast<std::uint32_t>(buf[1]) << 16) |
           (static_cast<std::uint32_t>(buf[2]) << 8) | static_cast<std::uint32_t>(buf[3]);
}

} // namespace

DatasetSplit load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                            int limit, const std::string& name) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw FormatError("cannot open images file: " + images_path);
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw FormatError("cannot open labels file: " + labels_path);

    const std::uint32_t img_magic = read_u32_be(imgs, images_path);
    if (img_magic != 0x00000803u) {
        throw FormatError("bad magic in images file " + images_path);
    }
    const std::uint32_t lab_magic = read_u32_be(labs, labels_path);
    if (lab_magic != 0x00000801u) {
        throw FormatError("bad magic in labels file " + labels_path);
    }
    const std::uint32_t n_imgs = read_u32_be(imgs, images_path);
    const std::uint32_t rows = read_u32_be(imgs, images_path);
    const std::uint32_t cols = read_u32_be(imgs, images_path);
    const std::uint32_t n_labs = read_u32_be(labs, labels_path);
    if (n_imgs != n_labs) {
        throw FormatError("image/label count mismatch: " + std::to_string(n_imgs) + " vs " +
                          std::to_string(n_labs));
    }
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096) {
        throw FormatError("implausible image size in " + images_path);
    }
    std::uint32_t n = n_imgs;
    if (limit > 0) n = std::min(n, static_cast<std::uint32_t>(limit));

    DatasetSplit split;
    split.name = name;
    split.examples.reserve(n);
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> buf(pixels);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
            throw FormatError("truncated file: " + images_path);
        }
        char lab = 0;
        if (!labs.read(&lab, 1)) throw FormatError("truncated file: " + labels_path);
        const int label = static_cast<unsigned char>(lab);
        max_label = std::max(max_label, label);
        std::vector<double> data(pixels);
        for (std::size_t p = 0; p < pixels; ++p) data[p] = static_cast<double>(buf[p]) / 255.0;
        Example ex;
        ex.x = nn::Tensor({1, static_cast<int>(rows), static_cast<int>(cols)}, std::move(data));
        ex.label = label;
        split.examples.push_back(std::move(ex));
    }
    split.num_classes = max_label + 1;
    return split;
}

DatasetSplit synth_blobs(int classes, int per_class, int dim, double margin, std::uint64_t seed,
                         const std::string& name) {
    if (classes < 2) throw DomainError("need at least 2 classes");
    if (per_class < 1 || dim < 1) throw DomainError("per_class and dim must be positive");
    if (margin <= 0.0) throw DomainError("margin must be positive");

    Rng rng(derive_seed(seed, {0xb10b5}));
    std::vector<Eigen::VectorXd> means;

    auto far_enough = [&](const Eigen::VectorXd& c) {
        for (const auto& m : means) {
            if ((m - c).norm() < margin) return false;
        }
        return true;
    };

    for (int k = 0; k < classes; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
            Eigen::VectorXd c(dim);
            for (int d = 0; d < dim; ++d) c[d] = rng.uniform(0.2, 0.8);
            if (far_enough(c)) {
                means.push_back(c);
                placed = true;
            }
        }
        if (!placed) {
            // Deterministic fallback: evenly spaced along the main diagonal.
            means.clear();
            for (int j = 0; j < classes; ++j) {
                const double t = classes == 1 ? 0.5 : 0.1 + 0.8 * j / (classes - 1);
                means.push_back(Eigen::VectorXd::Constant(dim, t));
            }
            for (int a = 0; a < classes; ++a) {
                for (int b = a + 1; b < classes; ++b) {
                    if ((means[a] - means[b]).norm() < margin) {
                        throw DomainError("margin too large for unit box placement");
                    }
                }
            }
            break;
        }
    }

    const double sigma = std::min(0.08, margin / 8.0);
    DatasetSplit split;
    split.name = name;
    split.num_classes = classes;
    split.examples.reserve(static_cast<std::size_t>(classes) * per_class);
    for (int k = 0; k < classes; ++k) {
        for (int i = 0; i < per_class; ++i) {
            std::vector<double> v(static_cast<std::size_t>(dim));
            for (int d = 0; d < dim; ++d) {
                v[static_cast<std::size_t>(d)] =
                    std::clamp(means[static_cast<std::size_t>(k)][d] + sigma * rng.gaussian(), 0.0, 1.0);
            }
            Example ex;
            ex.x = nn::Tensor({dim}, std::move(v));
            ex.label = k;
            split.examples.push_back(std::move(ex));
        }
    }
    return split;
}

} // namespace zonocert::data
