#include "glyphs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "zonocert/rng.hpp"

namespace zonocert::testsupport {

namespace {

// 5x7 digit font; '#' marks stroke pixels.
const std::array<std::array<const char*, 7>, 10> kFont = {{
    {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "},
    {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "},
    {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"},
    {" ### ", "#   #", "    #", "  ## ", "    #", "#   #", " ### "},
    {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "},
    {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "},
    {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "},
    {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "},
    {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "},
    {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "},
}};

void write_be32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace

void write_glyph_idx(const std::string& images_path, const std::string& labels_path, int count,
                     std::uint64_t seed, const GlyphNoise& noise) {
    constexpr int kSide = 28;
    constexpr int kScale = 3; // glyph renders to 15x21
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("cannot write " + images_path);
    std::ofstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("cannot write " + labels_path);

    write_be32(imgs, 0x803u);
    write_be32(imgs, static_cast<std::uint32_t>(count));
    write_be32(imgs, kSide);
    write_be32(imgs, kSide);
    write_be32(labs, 0x801u);
    write_be32(labs, static_cast<std::uint32_t>(count));

    Rng rng(derive_seed(seed, {0x91f9}));
    std::vector<unsigned char> image(kSide * kSide);
    for (int i = 0; i < count; ++i) {
        const int digit = static_cast<int>(rng.below(10));
        const int gw = 5 * kScale, gh = 7 * kScale;
        const int max_dx = std::min(noise.max_shift, kSide - gw);
        const int max_dy = std::min(noise.max_shift, kSide - gh);
        const int dx = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_dx + 1)));
        const int dy = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_dy + 1)));
        const double intensity = rng.uniform(150.0, 255.0);

        std::fill(image.begin(), image.end(), 0);
        for (int r = 0; r < 7; ++r) {
            for (int c = 0; c < 5; ++c) {
                if (kFont[static_cast<std::size_t>(digit)][static_cast<std::size_t>(r)][c] != '#') {
                    continue;
                }
                if (rng.uniform01() < noise.dropout) continue;
                for (int sy = 0; sy < kScale; ++sy) {
                    for (int sx = 0; sx < kScale; ++sx) {
                        const int py = dy + r * kScale + sy;
                        const int px = dx + c * kScale + sx;
                        image[static_cast<std::size_t>(py * kSide + px)] =
                            static_cast<unsigned char>(intensity);
                    }
                }
            }
        }
        for (auto& p : image) {
            const double v = static_cast<double>(p) + noise.sigma * rng.gaussian();
            p = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
        }
        imgs.write(reinterpret_cast<const char*>(image.data()),
                   static_cast<std::streamsize>(image.size()));
        const char lab = static_cast<char>(digit);
        labs.write(&lab, 1);
    }
}

void ensure_glyph_dataset(const std::string& dir, int train_n, int test_n, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string ti = dir + "/train-images.idx", tl = dir + "/train-labels.idx";
    const std::string si = dir + "/test-images.idx", sl = dir + "/test-labels.idx";
    if (!fs::exists(ti) || !fs::exists(tl)) {
        write_glyph_idx(ti, tl, train_n, derive_seed(seed, {1}));
    }
    if (!fs::exists(si) || !fs::exists(sl)) {
        write_glyph_idx(si, sl, test_n, derive_seed(seed, {2}));
    }
}

} // namespace zonocert::testsupport
