#include <doctest.h>

#include <random>
#include <vector>

#include "ssfl/kernels.hpp"

namespace k = ssfl::kernels;

namespace {

std::vector<double> rvec(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

struct ThresholdGuard {
    std::size_t saved = k::parallel_threshold();
    int threads = k::max_threads();
    ~ThresholdGuard() {
        k::set_parallel_threshold(saved);
        k::set_num_threads(threads);
    }
};

}  // namespace

TEST_CASE("serial kernels compute the textbook formulas") {
    // x = [[1,2]], w = [[1,0],[0,1],[1,1]], b = [0.5, -1, 0]
    std::vector<double> x{1, 2}, w{1, 0, 0, 1, 1, 1}, b{0.5, -1, 0}, y(3);
    k::GemmDims d{1, 2, 3};
    k::serial::dense_forward(x, w, b, y, d);
    CHECK(y == std::vector<double>{1.5, 1, 3});

    std::vector<double> dy{1, 2, 3}, dw(6), db(3), dx(2);
    k::serial::weight_grad(dy, x, dw, d);
    CHECK(dw == std::vector<double>{1, 2, 2, 4, 3, 6});
    k::serial::bias_grad(dy, db, d);
    CHECK(db == dy);
    k::serial::input_grad(dy, w, dx, d);
    CHECK(dx == std::vector<double>{4, 5});
}

TEST_CASE("blend: weighted sum, and exact copy where every source agrees with base") {
    std::vector<double> base{1, 2, 3}, s1{1, 4, 0}, s2{1, 6, 3}, out(3);
    std::vector<std::span<const double>> src{s1, s2};
    std::vector<double> coef{0.25, 0.5};
    k::serial::blend(base, src, coef, 0.25, out);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == doctest::Approx(0.25 * 4 + 0.5 * 6 + 0.25 * 2));
    CHECK(out[2] == doctest::Approx(0.25 * 0 + 0.5 * 3 + 0.25 * 3));
}

TEST_CASE("parallel kernels match the serial reference bit for bit at several thread counts") {
    ThresholdGuard guard;
    k::set_parallel_threshold(0);
    std::mt19937_64 rng(31);
    for (int threads : {1, 2, 3, 4, 8}) {
        k::set_num_threads(threads);
        for (k::GemmDims d : {k::GemmDims{1, 1, 1}, k::GemmDims{7, 5, 3}, k::GemmDims{33, 17, 65}, k::GemmDims{64, 64, 64}}) {
            auto x = rvec(d.batch * d.in, rng), w = rvec(d.out * d.in, rng), b = rvec(d.out, rng);
            auto dy = rvec(d.batch * d.out, rng);
            std::vector<double> ys(d.batch * d.out), yp(ys.size());
            k::serial::dense_forward(x, w, b, ys, d);
            k::parallel::dense_forward(x, w, b, yp, d);
            CHECK(ys == yp);

            std::vector<double> gs(d.out * d.in), gp(gs.size());
            k::serial::weight_grad(dy, x, gs, d);
            k::parallel::weight_grad(dy, x, gp, d);
            CHECK(gs == gp);

            std::vector<double> bs(d.out), bp(d.out);
            k::serial::bias_grad(dy, bs, d);
            k::parallel::bias_grad(dy, bp, d);
            CHECK(bs == bp);

            std::vector<double> xs(d.batch * d.in), xp(xs.size());
            k::serial::input_grad(dy, w, xs, d);
            k::parallel::input_grad(dy, w, xp, d);
            CHECK(xs == xp);
        }
        for (std::size_t n : {std::size_t{1}, std::size_t{100}, std::size_t{5000}}) {
            auto base = rvec(n, rng);
            std::vector<std::vector<double>> data;
            std::vector<std::span<const double>> src;
            for (int j = 0; j < 5; ++j) data.push_back(rvec(n, rng));
            data[2] = base;  // one source equal to base
            for (const auto& v : data) src.emplace_back(v);
            auto coef = rvec(5, rng);
            std::vector<double> os(n), op(n);
            k::serial::blend(base, src, coef, 0.01, os);
            k::parallel::blend(base, src, coef, 0.01, op);
            CHECK(os == op);
        }
    }
}

TEST_CASE("parallel threshold round-trips") {
    ThresholdGuard guard;
    k::set_parallel_threshold(1234);
    CHECK(k::parallel_threshold() == 1234);
    CHECK(k::max_threads() >= 1);
}
