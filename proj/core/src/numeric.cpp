#include "symode/numeric.hpp"

#include <cstdint>

namespace symode {

double pairwise_sum(std::span<const double> values)
{
    if (values.empty()) {
        return 0.0;
    }
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) {
            s += v;
        }
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Eigen::VectorXd pairwise_sum(std::span<const Eigen::VectorXd> values, Eigen::Index size)
{
    if (values.empty()) {
        return Eigen::VectorXd::Zero(size);
    }
    if (values.size() <= 8) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(size);
        for (const auto& v : values) {
            s += v;
        }
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half), size) + pairwise_sum(values.subspan(half), size);
}

int default_jobs()
{
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// splitmix64 finalizer applied to a combination of the master seed and the stream index.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index)
{
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace symode
