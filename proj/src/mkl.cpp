#include <ksvarm/mkl.hpp>

namespace ksvarm {

KernelMatrixSet expand_dictionary(const KernelDictionary& dict, const LagAlignedView& view,
                                  const GramOptions& options) {
    return expand_dictionary(std::span<const KernelSpec>(dict.kernels()), view, options);
}

KernelMatrixSet expand_dictionary(std::span<const KernelSpec> kernels, const LagAlignedView& view,
                                  const GramOptions& options) {
    if (kernels.empty()) throw Error(ErrorCode::ShapeMismatch, "dictionary needs at least one kernel");
    return build_kernel_set(view, kernels, options);
}

std::vector<KernelAttribution> kernel_attribution(const MklCoefficientTensor& w) {
    std::vector<KernelAttribution> rows;
    for (int lag = 0; lag <= w.max_lag(); ++lag)
        for (Index i = 0; i < w.nodes(); ++i)
            for (Index j = 0; j < w.nodes(); ++j)
                for (int p = 0; p < w.kernels(); ++p) {
                    const double n = w.block_norm(i, j, lag, p);
                    if (n > 0.0) rows.push_back({i, j, lag, p, n});
                }
    return rows;
}

std::vector<double> kernel_mass_share(const MklCoefficientTensor& w) {
    std::vector<double> mass(static_cast<std::size_t>(w.kernels()), 0.0);
    for (const auto& row : kernel_attribution(w)) mass[static_cast<std::size_t>(row.kernel)] += row.block_norm;
    double total = 0.0;
    for (double m : mass) total += m;
    if (total > 0.0)
        for (double& m : mass) m /= total;
    return mass;
}

MklResult mkl_fit(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms, const SolverConfig& cfg,
                  std::vector<std::string> labels, const IterationObserver& observer) {
    AdmmResult fit = admm_fit(targets, kms, cfg, observer);
    EffectiveNetwork net = threshold_edges(fit.coefficients, cfg.tau, std::move(labels));
    auto attribution = kernel_attribution(fit.coefficients);
    auto share = kernel_mass_share(fit.coefficients);
    return MklResult{std::move(fit), std::move(net), std::move(attribution), std::move(share)};
}

} // namespace ksvarm
