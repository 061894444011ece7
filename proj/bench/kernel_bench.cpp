// Serial vs OpenMP timing for the dense-layer kernels and the aggregation
// blend. Also checks that both paths produce identical bits.

#include <chrono>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "ssfl/kernels.hpp"

namespace k = ssfl::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const std::string& name, const std::string& shape, double serial_ms, double parallel_ms, bool same) {
    std::cout << std::left << std::setw(14) << name << std::setw(22) << shape << std::right << std::fixed
              << std::setprecision(3) << std::setw(12) << serial_ms << std::setw(12) << parallel_ms
              << std::setw(9) << std::setprecision(2) << serial_ms / parallel_ms << "x" << std::setw(8)
              << (same ? "yes" : "NO") << '\n';
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
    int reps = argc > 1 ? std::stoi(argv[1]) : 20;
    std::mt19937_64 rng(42);
    k::set_parallel_threshold(0);

    std::cout << "OpenMP " << (k::openmp_enabled() ? "on" : "off") << ", max threads " << k::max_threads()
              << ", " << reps << " reps\n";
    std::cout << std::left << std::setw(14) << "kernel" << std::setw(22) << "shape" << std::right << std::setw(12)
              << "serial ms" << std::setw(12) << "omp ms" << std::setw(10) << "speedup" << std::setw(8) << "same"
              << '\n';

    bool all_same = true;
    for (const k::GemmDims d : {k::GemmDims{32, 32, 32}, k::GemmDims{256, 256, 256}, k::GemmDims{512, 512, 512}}) {
        const auto x = random_vec(d.batch * d.in, rng);
        const auto w = random_vec(d.out * d.in, rng);
        const auto b = random_vec(d.out, rng);
        const auto dy = random_vec(d.batch * d.out, rng);
        const std::string shape = std::to_string(d.batch) + "x" + std::to_string(d.in) + "x" + std::to_string(d.out);

        std::vector<double> ys(d.batch * d.out), yp(ys.size());
        double s = time_ms([&] { k::serial::dense_forward(x, w, b, ys, d); }, reps);
        double p = time_ms([&] { k::parallel::dense_forward(x, w, b, yp, d); }, reps);
        row("forward", shape, s, p, bitwise_equal(ys, yp));
        all_same = all_same && bitwise_equal(ys, yp);

        std::vector<double> gs(d.out * d.in), gp(gs.size());
        s = time_ms([&] { k::serial::weight_grad(dy, x, gs, d); }, reps);
        p = time_ms([&] { k::parallel::weight_grad(dy, x, gp, d); }, reps);
        row("weight_grad", shape, s, p, bitwise_equal(gs, gp));
        all_same = all_same && bitwise_equal(gs, gp);

        std::vector<double> xs(d.batch * d.in), xp(xs.size());
        s = time_ms([&] { k::serial::input_grad(dy, w, xs, d); }, reps);
        p = time_ms([&] { k::parallel::input_grad(dy, w, xp, d); }, reps);
        row("input_grad", shape, s, p, bitwise_equal(xs, xp));
        all_same = all_same && bitwise_equal(xs, xp);
    }

    for (std::size_t n : {std::size_t{1} << 12, std::size_t{1} << 20}) {
        constexpr std::size_t sources = 16;
        const auto base = random_vec(n, rng);
        std::vector<std::vector<double>> src_data;
        std::vector<std::span<const double>> src;
        for (std::size_t j = 0; j < sources; ++j) src_data.push_back(random_vec(n, rng));
        for (const auto& v : src_data) src.emplace_back(v);
        const auto coef = random_vec(sources, rng);
        std::vector<double> os(n), op(n);
        const std::string shape = std::to_string(sources) + " x " + std::to_string(n);
        double s = time_ms([&] { k::serial::blend(base, src, coef, 0.01, os); }, reps);
        double p = time_ms([&] { k::parallel::blend(base, src, coef, 0.01, op); }, reps);
        row("blend", shape, s, p, bitwise_equal(os, op));
        all_same = all_same && bitwise_equal(os, op);
    }
    return all_same ? 0 : 1;
}
