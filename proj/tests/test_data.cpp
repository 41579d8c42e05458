#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "doctest.h"
#include "feddm/data.hpp"
#include "feddm/errors.hpp"

using namespace feddm;
namespace fs = std::filesystem;

namespace {

fs::path tmp_path(const std::string& name) {
    return fs::temp_directory_path() / ("feddm_test_" + name);
}

double sign_disagreement(const Dataset& d) {
    int bad = 0;
    for (int i = 0; i < d.size(); ++i) {
        const int s = d.examples[i] >= 0.0 ? 1 : 0;
        if (s != d.labels[i]) ++bad;
    }
    return static_cast<double>(bad) / d.size();
}

void check_disjoint_cover(const Partition& p, int n) {
    std::vector<int> seen(n, 0);
    for (const auto& s : p.index_sets) {
        CHECK(!s.empty());
        for (int i : s) {
            REQUIRE(i >= 0);
            REQUIRE(i < n);
            ++seen[i];
        }
    }
    for (int c : seen) CHECK(c == 1);
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("gen_1d_binary basics") {
    const Dataset d = gen_1d_binary(100, 3);
    CHECK(d.size() == 100);
    CHECK(d.num_classes == 2);
    for (double x : d.examples) CHECK(std::isfinite(x));
    for (int y : d.labels) CHECK((y == 0 || y == 1));
    // deterministic
    const Dataset d2 = gen_1d_binary(100, 3);
    CHECK(d2.examples == d.examples);
    CHECK(d2.labels == d.labels);
    // ~10% of labels disagree with sign(x)
    double mean = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) mean += sign_disagreement(gen_1d_binary(100, s));
    mean /= 20.0;
    CHECK(mean == doctest::Approx(0.10).epsilon(0.6));
}

TEST_CASE("gen_blobs") {
    const Dataset d = gen_blobs(50, 4, 2, 0.5, 7);
    CHECK(d.size() == 200);
    std::vector<int> counts(4, 0);
    for (int y : d.labels) ++counts[y];
    for (int c : counts) CHECK(c == 50);

    // two tight 1-d blobs are separated by sign, so a steep negative weight
    // (class 0 sits at +3, class 1 at -3) classifies them perfectly
    const Dataset tight = gen_blobs(30, 2, 1, 1e-3, 11);
    for (int i = 0; i < tight.size(); ++i) {
        const double x = tight.examples[i];
        CHECK((tight.labels[i] == 0 ? x > 0.0 : x < 0.0));
    }
}

TEST_CASE("idx round-trip") {
    Dataset d;
    d.name = "mini";
    d.example_shape = {1, 2, 2};
    d.num_classes = 3;
    d.examples = {0.0, 1.0, 0.5, 0.25, 1.0, 0.0, 0.75, 0.5, 0.1, 0.2, 0.3, 0.4};
    d.labels = {0, 1, 2};
    const auto img = tmp_path("imgs.idx3"), lab = tmp_path("labs.idx1");
    write_idx(d, img.string(), lab.string());
    const Dataset r = load_idx(img.string(), lab.string());
    CHECK(r.size() == 3);
    CHECK(r.example_shape == d.example_shape);
    CHECK(r.labels == d.labels);
    for (std::size_t i = 0; i < d.examples.size(); ++i) {
        // byte quantization: exact to 1/255 rounding
        CHECK(r.examples[i] ==
              doctest::Approx(std::round(d.examples[i] * 255.0) / 255.0).epsilon(1e-12));
    }
    fs::remove(img);
    fs::remove(lab);
}

TEST_CASE("idx truncation reports a byte offset") {
    const auto img = tmp_path("trunc.idx3"), lab = tmp_path("trunc.idx1");
    {
        Dataset d;
        d.name = "mini";
        d.example_shape = {1, 2, 2};
        d.num_classes = 1;
        d.examples.assign(8, 0.5);
        d.labels = {0, 0};
        write_idx(d, img.string(), lab.string());
    }
    fs::resize_file(img, 18);  // cut inside the pixel payload
    try {
        (void)load_idx(img.string(), lab.string());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
    fs::remove(img);
    fs::remove(lab);
}

TEST_CASE("idx bad magic") {
    const auto img = tmp_path("magic.idx3");
    {
        std::ofstream f(img, std::ios::binary);
        const char junk[16] = {1, 2, 3, 4};
        f.write(junk, 16);
    }
    CHECK_THROWS_AS((void)load_idx(img.string(), img.string()), DataError);
    fs::remove(img);
}

TEST_CASE("cifar binary reader") {
    const auto path = tmp_path("cifar.bin");
    {
        std::ofstream f(path, std::ios::binary);
        for (int rec = 0; rec < 2; ++rec) {
            f.put(static_cast<char>(rec + 3));  // labels 3 and 4
            for (int j = 0; j < 3072; ++j) f.put(static_cast<char>((j + rec) % 256));
        }
    }
    const Dataset d = load_cifar_bin(path.string());
    CHECK(d.size() == 2);
    CHECK(d.example_shape == Shape{3, 32, 32});
    CHECK(d.labels == std::vector<int>{3, 4});
    for (double v : d.examples) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    fs::resize_file(path, 3073 * 2 - 10);
    CHECK_THROWS_AS((void)load_cifar_bin(path.string()), DataError);
    fs::remove(path);
}

TEST_CASE("dirichlet partition properties") {
    std::vector<int> labels;
    for (int c = 0; c < 10; ++c) labels.insert(labels.end(), 100, c);

    const Partition single = dirichlet_partition(labels, 1, 0.5, 1);
    CHECK(single.clients() == 1);
    CHECK(single.index_sets[0].size() == labels.size());

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        for (double alpha : {0.01, 0.5, 50.0}) {
            const Partition p = dirichlet_partition(labels, 10, alpha, seed);
            check_disjoint_cover(p, static_cast<int>(labels.size()));
        }
    }

    // determinism
    const Partition a = dirichlet_partition(labels, 10, 0.5, 9);
    const Partition b = dirichlet_partition(labels, 10, 0.5, 9);
    CHECK(a.index_sets == b.index_sets);

    // alpha=50 is near-iid: every client's class histogram is close to uniform
    Dataset d;
    d.name = "part";
    d.example_shape = {1};
    d.num_classes = 10;
    d.labels = labels;
    d.examples.assign(labels.size(), 0.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Partition p = dirichlet_partition(labels, 10, 50.0, seed);
        for (int k = 0; k < 10; ++k) {
            std::vector<double> hist(10, 0.0);
            for (int i : p.index_sets[k]) hist[labels[i]] += 1.0;
            const double nk = static_cast<double>(p.index_sets[k].size());
            double tv = 0.0;
            for (double h : hist) tv += std::abs(h / nk - 0.1);
            CHECK(tv / 2.0 <= 0.2);
        }
    }
}

TEST_CASE("sample_class_batch") {
    Dataset d;
    d.name = "batch";
    d.example_shape = {1};
    d.num_classes = 2;
    d.labels = {0, 1, 1, 0, 1};
    d.examples = {0, 1, 2, 3, 4};
    const DatasetView v = full_view(d);

    Rng r1(5), r2(5);
    const auto b1 = sample_class_batch(v, 1, 2, r1);
    const auto b2 = sample_class_batch(v, 1, 2, r2);
    CHECK(b1 == b2);
    for (int pos : b1) CHECK(v.label(pos) == 1);
    CHECK(std::set<int>(b1.begin(), b1.end()).size() == 2);  // without replacement

    // more requested than present: every class member appears, then padding
    Rng r3(7);
    const auto big = sample_class_batch(v, 0, 5, r3);
    CHECK(big.size() == 5);
    for (int pos : big) CHECK(v.label(pos) == 0);
    CHECK(std::set<int>(big.begin(), big.end()).size() == 2);

    Rng r4(8);
    CHECK_THROWS_AS((void)sample_class_batch(v, 9, 1, r4), DataError);
}

}  // TEST_SUITE
