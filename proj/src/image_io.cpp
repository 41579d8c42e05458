#include "feddm/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "feddm/errors.hpp"

namespace feddm {

namespace {

unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void dump_synthetic_images(const std::vector<SyntheticSet>& sets, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const SyntheticSet& s : sets) {
        const Shape& sh = s.example_shape;
        int channels = 1, h = 1, w = s.input_dim();
        if (sh.size() == 2) {
            h = sh[0];
            w = sh[1];
        } else if (sh.size() == 3) {
            channels = sh[0];
            h = sh[1];
            w = sh[2];
        }
        if (channels != 1 && channels != 3) {
            throw DataError("dump_synthetic_images: only 1- or 3-channel examples supported");
        }
        const int dim = s.input_dim();
        std::vector<int> per_class_idx(s.classes.size(), 0);
        for (int i = 0; i < s.size(); ++i) {
            const int cls = s.labels[i];
            const int slot = static_cast<int>(
                std::lower_bound(s.classes.begin(), s.classes.end(), cls) - s.classes.begin());
            const int idx = per_class_idx[slot]++;
            const std::string path = dir + "/" + std::to_string(s.client_id) + "_" +
                                     std::to_string(cls) + "_" + std::to_string(idx) +
                                     (channels == 1 ? ".pgm" : ".ppm");
            std::ofstream f(path, std::ios::binary);
            if (!f) throw DataError("cannot write image file: " + path);
            f << (channels == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
            const double* row = s.values.data() + static_cast<std::size_t>(i) * dim;
            if (channels == 1) {
                for (int p = 0; p < h * w; ++p) f.put(static_cast<char>(to_byte(row[p])));
            } else {
                // channel-major storage -> interleaved RGB
                for (int p = 0; p < h * w; ++p)
                    for (int c = 0; c < 3; ++c)
                        f.put(static_cast<char>(to_byte(row[c * h * w + p])));
            }
        }
    }
}

}  // namespace feddm
