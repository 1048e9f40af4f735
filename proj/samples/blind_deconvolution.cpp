// Recovers a sparse filter and a sparse message from their circular
// convolution and prints the recovered factors next to the truth.

#include <cstdio>

#include "hihtp/hihtp.hpp"

int main() {
    using namespace hihtp;
    const index_t n = 50, mu = 120, s = 2, sigma = 5;
    const std::uint64_t seed = 7;

    BlindConvOp op(gen_U(mu, n, stream_key(seed, Stream::spreading)));
    const auto h = gen_filter(mu, s, stream_key(seed, Stream::filter));
    const auto b = gen_message(n, sigma, stream_key(seed, Stream::message));
    const Eigen::VectorXd y = op.apply_factored(h, b);

    const auto report = hihtp_solve(y, op, SparsityLevels{s, sigma, std::nullopt});
    const auto truth = BlockVector::outer(h, b);
    std::printf("iterations: %d (%s)\n", report.iterations, std::string(to_string(report.stop_reason)).c_str());
    std::printf("relative error of h (x) b: %.3e\n", relative_error(report.estimate.data, truth));

    const auto f = rank_one_factor(report.estimate.data);
    std::printf("\nfilter taps (k: true / recovered, message normalised to unit norm)\n");
    const auto t = rank_one_factor(truth);
    for (index_t k = 0; k < mu; ++k)
        if (h[static_cast<std::size_t>(k)] != 0.0 || f.h[static_cast<std::size_t>(k)] != 0.0)
            std::printf("  %3td: % .6f / % .6f\n", k, t.h[static_cast<std::size_t>(k)], f.h[static_cast<std::size_t>(k)]);
    std::printf("message entries\n");
    for (index_t j = 0; j < n; ++j)
        if (b[static_cast<std::size_t>(j)] != 0.0 || f.b[static_cast<std::size_t>(j)] != 0.0)
            std::printf("  %3td: % .6f / % .6f\n", j, t.b[static_cast<std::size_t>(j)], f.b[static_cast<std::size_t>(j)]);
    return 0;
}
