#include "ssfl/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ssfl::kernels {

namespace {
std::atomic<std::size_t> g_threshold{1u << 16};

bool go_parallel(std::size_t work) {
    return work >= g_threshold.load(std::memory_order_relaxed);
}
}  // namespace

std::size_t parallel_threshold() { return g_threshold.load(); }
void set_parallel_threshold(std::size_t flops) { g_threshold.store(flops); }

bool openmp_enabled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_num_threads([[maybe_unused]] int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
}

namespace serial {

void dense_forward(std::span<const double> x, std::span<const double> w,
                   std::span<const double> bias, std::span<double> y, GemmDims d) {
    for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t o = 0; o < d.out; ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d.in; ++i) acc += x[b * d.in + i] * w[o * d.in + i];
            y[b * d.out + o] = acc + bias[o];
        }
    }
}

void weight_grad(std::span<const double> dy, std::span<const double> x,
                 std::span<double> dw, GemmDims d) {
    for (std::size_t o = 0; o < d.out; ++o) {
        for (std::size_t i = 0; i < d.in; ++i) {
            double acc = 0.0;
            for (std::size_t b = 0; b < d.batch; ++b) acc += dy[b * d.out + o] * x[b * d.in + i];
            dw[o * d.in + i] = acc;
        }
    }
}

void bias_grad(std::span<const double> dy, std::span<double> db, GemmDims d) {
    for (std::size_t o = 0; o < d.out; ++o) {
        double acc = 0.0;
        for (std::size_t b = 0; b < d.batch; ++b) acc += dy[b * d.out + o];
        db[o] = acc;
    }
}

void input_grad(std::span<const double> dy, std::span<const double> w,
                std::span<double> dx, GemmDims d) {
    for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t i = 0; i < d.in; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < d.out; ++o) acc += dy[b * d.out + o] * w[o * d.in + i];
            dx[b * d.in + i] = acc;
        }
    }
}

void blend(std::span<const double> base, std::span<const std::span<const double>> src,
           std::span<const double> coef, double base_coef, std::span<double> out) {
    for (std::size_t k = 0; k < out.size(); ++k) {
        bool consensus = true;
        double acc = 0.0;
        for (std::size_t j = 0; j < src.size(); ++j) {
            consensus = consensus && src[j][k] == base[k];
            acc += coef[j] * src[j][k];
        }
        out[k] = consensus ? base[k] : acc + base_coef * base[k];
    }
}

}  // namespace serial

namespace parallel {

// The loop bodies below mirror the serial ones exactly; only the outer index
// is distributed. std::ptrdiff_t keeps older OpenMP runtimes happy.

void dense_forward(std::span<const double> x, std::span<const double> w,
                   std::span<const double> bias, std::span<double> y, GemmDims d) {
    const auto rows = static_cast<std::ptrdiff_t>(d.batch);
    const bool par = go_parallel(d.batch * d.in * d.out);
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t b = 0; b < rows; ++b) {
        for (std::size_t o = 0; o < d.out; ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d.in; ++i) acc += x[b * d.in + i] * w[o * d.in + i];
            y[b * d.out + o] = acc + bias[o];
        }
    }
}

void weight_grad(std::span<const double> dy, std::span<const double> x,
                 std::span<double> dw, GemmDims d) {
    const auto outs = static_cast<std::ptrdiff_t>(d.out);
    const bool par = go_parallel(d.batch * d.in * d.out);
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t o = 0; o < outs; ++o) {
        for (std::size_t i = 0; i < d.in; ++i) {
            double acc = 0.0;
            for (std::size_t b = 0; b < d.batch; ++b) acc += dy[b * d.out + o] * x[b * d.in + i];
            dw[o * d.in + i] = acc;
        }
    }
}

void bias_grad(std::span<const double> dy, std::span<double> db, GemmDims d) {
    const auto outs = static_cast<std::ptrdiff_t>(d.out);
    const bool par = go_parallel(d.batch * d.out);
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t o = 0; o < outs; ++o) {
        double acc = 0.0;
        for (std::size_t b = 0; b < d.batch; ++b) acc += dy[b * d.out + o];
        db[o] = acc;
    }
}

void input_grad(std::span<const double> dy, std::span<const double> w,
                std::span<double> dx, GemmDims d) {
    const auto rows = static_cast<std::ptrdiff_t>(d.batch);
    const bool par = go_parallel(d.batch * d.in * d.out);
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t b = 0; b < rows; ++b) {
        for (std::size_t i = 0; i < d.in; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < d.out; ++o) acc += dy[b * d.out + o] * w[o * d.in + i];
            dx[b * d.in + i] = acc;
        }
    }
}

void blend(std::span<const double> base, std::span<const std::span<const double>> src,
           std::span<const double> coef, double base_coef, std::span<double> out) {
    const auto n = static_cast<std::ptrdiff_t>(out.size());
    const bool par = go_parallel(out.size() * src.size());
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        bool consensus = true;
        double acc = 0.0;
        for (std::size_t j = 0; j < src.size(); ++j) {
            consensus = consensus && src[j][k] == base[k];
            acc += coef[j] * src[j][k];
        }
        out[k] = consensus ? base[k] : acc + base_coef * base[k];
    }
}

}  // namespace parallel

}  // namespace ssfl::kernels
