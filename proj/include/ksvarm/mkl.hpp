#pragma once

#include <span>
#include <string>
#include <vector>

#include <ksvarm/kernels.hpp>
#include <ksvarm/network.hpp>
#include <ksvarm/solver.hpp>

namespace ksvarm {

/// A CoefficientTensor with P > 1 kernel blocks per (source, target, lag).
using MklCoefficientTensor = CoefficientTensor;

/**
 * Gram blocks for every dictionary kernel, stacked with the kernel index
 * fastest: b = (lag * N + node) * P + p. With P = 1 the layout is the plain
 * single-kernel one.
 */
KernelMatrixSet expand_dictionary(const KernelDictionary& dict, const LagAlignedView& view,
                                  const GramOptions& options = {});
/// Unchecked variant; repeated kernels simply produce repeated Gram stacks.
KernelMatrixSet expand_dictionary(std::span<const KernelSpec> kernels, const LagAlignedView& view,
                                  const GramOptions& options = {});

struct KernelAttribution {
    Index source = 0;
    Index target = 0;
    int lag = 0;
    int kernel = 0;
    double block_norm = 0.0;
};

struct MklResult {
    AdmmResult fit;
    EffectiveNetwork network;
    /// One row per (source, target, lag, kernel) with a nonzero block.
    std::vector<KernelAttribution> attribution;
    /// Fraction of the total block-norm mass carried by each kernel.
    std::vector<double> kernel_share;
};

MklResult mkl_fit(const Eigen::MatrixXd& targets, const KernelMatrixSet& kms, const SolverConfig& cfg,
                  std::vector<std::string> labels = {}, const IterationObserver& observer = {});

/// Per-kernel block-norm mass fractions; all zero when every block is zero.
std::vector<double> kernel_mass_share(const MklCoefficientTensor& w);

std::vector<KernelAttribution> kernel_attribution(const MklCoefficientTensor& w);

} // namespace ksvarm
