// Writes the bundled sample dataset (digit glyphs in IDX format) so the demo
// configs can run without external data files.
#include <cstdlib>
#include <iostream>
#include <string>

#include "glyphs.hpp"

int main(int argc, char** argv) {
    std::string dir = "data/glyphs";
    int train_n = 1000, test_n = 500;
    unsigned long long seed = 7;
    if (argc > 1) dir = argv[1];
    if (argc > 2) train_n = std::atoi(argv[2]);
    if (argc > 3) test_n = std::atoi(argv[3]);
    if (argc > 4) seed = std::strtoull(argv[4], nullptr, 10);
    try {
        zonocert::testsupport::ensure_glyph_dataset(dir, train_n, test_n, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << "dataset ready in " << dir << "\n";
    return 0;
}
