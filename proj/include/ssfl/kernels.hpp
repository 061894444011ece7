#pragma once

// Dense-layer inner loops. Every kernel exists twice: a plain serial
// reference and an OpenMP version that splits work over independent output
// entries. Each output entry is accumulated in the same index order in both,
// so the two agree bit for bit at any thread count.

#include <cstddef>
#include <span>

namespace ssfl::kernels {

struct GemmDims {
    std::size_t batch;
    std::size_t in;
    std::size_t out;
};

namespace serial {

// y[b,o] = sum_i x[b,i] * w[o,i] + bias[o]
void dense_forward(std::span<const double> x, std::span<const double> w,
                   std::span<const double> bias, std::span<double> y, GemmDims d);

// dw[o,i] = sum_b dy[b,o] * x[b,i]
void weight_grad(std::span<const double> dy, std::span<const double> x,
                 std::span<double> dw, GemmDims d);

// db[o] = sum_b dy[b,o]
void bias_grad(std::span<const double> dy, std::span<double> db, GemmDims d);

// dx[b,i] = sum_o dy[b,o] * w[o,i]
void input_grad(std::span<const double> dy, std::span<const double> w,
                std::span<double> dx, GemmDims d);

// out[k] = sum_j coef[j] * src[j][k] + base_coef * base[k], except that an
// entry where every source equals base[k] is copied from base unchanged.
void blend(std::span<const double> base, std::span<const std::span<const double>> src,
           std::span<const double> coef, double base_coef, std::span<double> out);

}  // namespace serial

namespace parallel {

void dense_forward(std::span<const double> x, std::span<const double> w,
                   std::span<const double> bias, std::span<double> y, GemmDims d);
void weight_grad(std::span<const double> dy, std::span<const double> x,
                 std::span<double> dw, GemmDims d);
void bias_grad(std::span<const double> dy, std::span<double> db, GemmDims d);
void input_grad(std::span<const double> dy, std::span<const double> w,
                std::span<double> dx, GemmDims d);
void blend(std::span<const double> base, std::span<const std::span<const double>> src,
           std::span<const double> coef, double base_coef, std::span<double> out);

}  // namespace parallel

/// Multiply-add count below which the parallel kernels stay on one thread.
/// Thread start-up dominates for the small layers used at desk scale.
std::size_t parallel_threshold();
void set_parallel_threshold(std::size_t flops);

bool openmp_enabled();
int max_threads();
void set_num_threads(int n);

}  // namespace ssfl::kernels
