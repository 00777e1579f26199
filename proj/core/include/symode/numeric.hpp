#pragma once

#include <algorithm>
#include <cstddef>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace symode {

/// A trajectory or flow left the finite range.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, long step) : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

/// Classical fourth-order Runge-Kutta step for y' = f(y).
template <typename F>
Eigen::VectorXd rk4_step(const F& f, const Eigen::VectorXd& y, double h)
{
    const Eigen::VectorXd k1 = f(y);
    const Eigen::VectorXd k2 = f(y + 0.5 * h * k1);
    const Eigen::VectorXd k3 = f(y + 0.5 * h * k2);
    const Eigen::VectorXd k4 = f(y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Integrates y' = f(y) over time t with a fixed number of RK4 steps.
template <typename F>
Eigen::VectorXd rk4_flow(const F& f, Eigen::VectorXd y, double t, int steps)
{
    if (steps < 1) {
        throw std::invalid_argument("rk4_flow needs at least one step");
    }
    if (t == 0.0) {
        return y;
    }
    const double h = t / steps;
    for (int s = 0; s < steps; ++s) {
        y = rk4_step(f, y, h);
        if (!y.allFinite()) {
            throw DivergenceError("non-finite state during flow integration", s);
        }
    }
    return y;
}

/// Deterministic pairwise (tree) summation; result depends only on value order.
double pairwise_sum(std::span<const double> values);
Eigen::VectorXd pairwise_sum(std::span<const Eigen::VectorXd> values, Eigen::Index size);

/// Runs f(i) for i in [0, n) on up to `jobs` threads. Work is claimed in index order;
/// if any call throws, the exception from the lowest failing index is rethrown.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& f)
{
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            f(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = n;
    std::exception_ptr failure;
    auto body = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                f(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back(body);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

/// Worker count for "jobs = 0": the hardware concurrency, at least 1.
int default_jobs();

/// 64-bit mixing used to derive independent seeds from (master, index).
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index);

}  // namespace symode
