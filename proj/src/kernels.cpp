#include <ksvarm/kernels.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

namespace ksvarm {

bool KernelSpec::operator==(const KernelSpec& other) const {
    if (kind != other.kind) return false;
    switch (kind) {
    case KernelKind::Linear: return true;
    case KernelKind::Polynomial: return degree == other.degree && offset == other.offset;
    case KernelKind::Gaussian: return sigma == other.sigma;
    }
    return false;
}

namespace {

double parse_double(std::string_view text, std::string_view context) {
    std::string s(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size())
        throw Error(ErrorCode::ParseError, "bad number '" + s + "' in kernel spec " + std::string(context));
    return v;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    if (b == std::string_view::npos) return {};
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

KernelSpec parse_kernel_spec(std::string_view text) {
    const std::string t = trim(text);
    const auto colon = t.find(':');
    const std::string head = t.substr(0, colon);
    const std::string args = colon == std::string::npos ? std::string() : t.substr(colon + 1);

    std::vector<std::pair<std::string, std::string>> kv;
    std::stringstream ss(args);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "expected key=value in kernel spec: " + t);
        kv.emplace_back(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
    }

    KernelSpec spec;
    if (head == "linear") {
        if (!kv.empty()) throw Error(ErrorCode::ParseError, "linear kernel takes no parameters");
        spec = KernelSpec::linear();
    } else if (head == "poly" || head == "polynomial") {
        spec = KernelSpec::polynomial(2, 1.0);
        for (const auto& [k, v] : kv) {
            if (k == "d" || k == "degree") {
                const double d = parse_double(v, t);
                if (d != std::floor(d)) throw Error(ErrorCode::ParseError, "polynomial degree must be an integer");
                spec.degree = static_cast<int>(d);
            } else if (k == "c" || k == "offset") {
                spec.offset = parse_double(v, t);
            } else {
                throw Error(ErrorCode::ParseError, "unknown polynomial parameter '" + k + "'");
            }
        }
    } else if (head == "gaussian" || head == "rbf") {
        spec = KernelSpec::gaussian_median();
        for (const auto& [k, v] : kv) {
            if (k != "sigma") throw Error(ErrorCode::ParseError, "unknown gaussian parameter '" + k + "'");
            if (v == "median")
                spec.sigma.reset();
            else
                spec.sigma = parse_double(v, t);
        }
    } else {
        throw Error(ErrorCode::ParseError, "unknown kernel '" + head + "'");
    }
    try {
        validate(spec);
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, std::string(e.what()) + " in kernel spec: " + t);
    }
    return spec;
}

std::string to_string(const KernelSpec& spec) {
    std::ostringstream os;
    os.precision(17);
    switch (spec.kind) {
    case KernelKind::Linear: os << "linear"; break;
    case KernelKind::Polynomial: os << "poly:d=" << spec.degree << ",c=" << spec.offset; break;
    case KernelKind::Gaussian:
        os << "gaussian:sigma=";
        if (spec.sigma) os << *spec.sigma; else os << "median";
        break;
    }
    return os.str();
}

void validate(const KernelSpec& spec) {
    if (spec.kind == KernelKind::Polynomial) {
        if (spec.degree < 1) throw Error(ErrorCode::InvalidArgument, "polynomial degree must be >= 1");
        if (!(spec.offset >= 0.0) || !std::isfinite(spec.offset))
            throw Error(ErrorCode::InvalidArgument, "polynomial offset must be >= 0");
    }
    if (spec.kind == KernelKind::Gaussian && spec.sigma && (!(*spec.sigma > 0.0) || !std::isfinite(*spec.sigma)))
        throw Error(ErrorCode::InvalidArgument, "gaussian sigma must be positive");
}

double eval_kernel(const KernelSpec& spec, double y, double psi) {
    switch (spec.kind) {
    case KernelKind::Linear: return y * psi;
    case KernelKind::Polynomial: return std::pow(y * psi + spec.offset, spec.degree);
    case KernelKind::Gaussian: {
        if (!spec.sigma) throw Error(ErrorCode::InvalidArgument, "gaussian bandwidth not resolved");
        const double d = y - psi;
        return std::exp(-d * d / (2.0 * *spec.sigma * *spec.sigma));
    }
    }
    return 0.0;
}

bool has_feature_map(const KernelSpec& spec) {
    return spec.kind != KernelKind::Gaussian;
}

Eigen::MatrixXd feature_map(const KernelSpec& spec, const Eigen::VectorXd& x) {
    if (spec.kind == KernelKind::Linear) return x;
    if (spec.kind != KernelKind::Polynomial)
        throw Error(ErrorCode::InvalidArgument, "kernel has no finite feature map");
    // (y psi + c)^d = sum_k C(d,k) c^(d-k) (y psi)^k
    const int d = spec.degree;
    std::vector<int> powers;
    std::vector<double> weights;
    double binom = 1.0;
    for (int k = 0; k <= d; ++k) {
        if (k > 0) binom = binom * (d - k + 1) / k;
        const double w = binom * std::pow(spec.offset, d - k);
        if (w > 0.0) {
            powers.push_back(k);
            weights.push_back(std::sqrt(w));
        }
    }
    Eigen::MatrixXd phi(x.size(), static_cast<Index>(powers.size()));
    for (std::size_t c = 0; c < powers.size(); ++c)
        phi.col(static_cast<Index>(c)) = weights[c] * x.array().pow(powers[c]);
    return phi;
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::VectorXd& x) {
    return cross_gram(spec, x, x);
}

Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::VectorXd& rows, const Eigen::VectorXd& cols) {
    Eigen::MatrixXd k(rows.size(), cols.size());
    for (Index c = 0; c < cols.size(); ++c)
        for (Index r = 0; r < rows.size(); ++r) k(r, c) = eval_kernel(spec, rows(r), cols(c));
    return k;
}

Eigen::MatrixXd build_gram(const KernelSpec& spec, const LagAlignedView& view, Index node, int lag) {
    const KernelSpec resolved = resolve_bandwidth(spec, view.series(node));
    return gram_matrix(resolved, view.regressor(node, lag));
}

namespace {

void check_symmetric(const Eigen::MatrixXd& k) {
    if (k.rows() != k.cols()) throw Error(ErrorCode::ShapeMismatch, "Gram matrix must be square");
    const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
    if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw Error(ErrorCode::NotSymmetric, "matrix is not symmetric");
}

} // namespace

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& k, double eps) {
    check_symmetric(k);
    const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(eps).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double median_bandwidth(const Eigen::VectorXd& series, std::uint64_t seed) {
    const Index n = series.size();
    if (n < 2 || series.maxCoeff() == series.minCoeff())
        throw Error(ErrorCode::DegenerateSeries, "median bandwidth needs at least two distinct values");

    std::vector<double> diffs;
    const auto total_pairs = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1) / 2;
    if (total_pairs <= 1000) {
        for (Index a = 0; a < n; ++a)
            for (Index b = a + 1; b < n; ++b) diffs.push_back(std::abs(series(a) - series(b)));
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<Index> pick(0, n - 1);
        while (diffs.size() < 1000) {
            const Index a = pick(rng);
            const Index b = pick(rng);
            if (a != b) diffs.push_back(std::abs(series(a) - series(b)));
        }
    }

    auto median_of = [](std::vector<double> v) {
        const std::size_t m = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
        double hi = v[m];
        if (v.size() % 2 == 1) return hi;
        const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
        return 0.5 * (lo + hi);
    };

    double sigma = median_of(diffs);
    if (!(sigma > 0.0)) {
        std::vector<double> nonzero;
        for (double d : diffs)
            if (d > 0.0) nonzero.push_back(d);
        if (nonzero.empty()) {
            // sampled pairs all tied; fall back to the range
            return series.maxCoeff() - series.minCoeff();
        }
        sigma = median_of(std::move(nonzero));
    }
    return sigma;
}

KernelSpec resolve_bandwidth(const KernelSpec& spec, const Eigen::VectorXd& series, std::uint64_t seed) {
    if (spec.kind != KernelKind::Gaussian || spec.sigma) return spec;
    KernelSpec out = spec;
    out.sigma = median_bandwidth(series, seed);
    return out;
}

KernelDictionary::KernelDictionary(std::vector<KernelSpec> kernels, std::optional<std::vector<double>> weights)
    : kernels_(std::move(kernels)), weights_(std::move(weights)) {
    if (kernels_.empty()) throw Error(ErrorCode::InvalidArgument, "kernel dictionary must be non-empty");
    for (const auto& k : kernels_) validate(k);
    for (std::size_t a = 0; a < kernels_.size(); ++a)
        for (std::size_t b = a + 1; b < kernels_.size(); ++b)
            if (kernels_[a] == kernels_[b])
                throw Error(ErrorCode::InvalidArgument, "duplicate kernel in dictionary: " + to_string(kernels_[a]));
    if (weights_) {
        if (weights_->size() != kernels_.size())
            throw Error(ErrorCode::ShapeMismatch, "one weight per dictionary kernel required");
        double sum = 0.0;
        for (double w : *weights_) {
            if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "dictionary weights must be nonnegative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "dictionary weights must sum to 1");
    }
}

Eigen::MatrixXd GramFactor::sqrt() const {
    return basis * eigenvalues.cwiseSqrt().asDiagonal() * basis.transpose();
}

namespace {

GramFactor finish_factor(Eigen::MatrixXd basis, Eigen::VectorXd eigenvalues, double trace, Index samples,
                         double jitter) {
    const double floor = trace > 0.0 ? jitter * trace / static_cast<double>(samples) : 0.0;
    std::vector<Index> keep;
    for (Index k = 0; k < eigenvalues.size(); ++k)
        if (eigenvalues(k) > floor && trace > 0.0) keep.push_back(k);

    GramFactor f;
    f.basis.resize(samples, static_cast<Index>(keep.size()));
    f.eigenvalues.resize(static_cast<Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        f.basis.col(static_cast<Index>(c)) = basis.col(keep[c]);
        f.eigenvalues(static_cast<Index>(c)) = eigenvalues(keep[c]);
    }
    f.gram = f.basis * f.eigenvalues.asDiagonal() * f.basis.transpose();
    return f;
}

} // namespace

GramFactor factor_gram(const Eigen::MatrixXd& k, double jitter) {
    check_symmetric(k);
    const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::NonFinite, "eigendecomposition failed");
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double top = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
    if (ev.size() && ev.minCoeff() < -1e-8 * std::max(1.0, top))
        throw Error(ErrorCode::NotPsd, "Gram matrix has a significantly negative eigenvalue");
    return finish_factor(es.eigenvectors(), ev, sym.trace(), k.rows(), jitter);
}

GramFactor factor_features(const Eigen::MatrixXd& phi, double jitter) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi, Eigen::ComputeThinU);
    const Eigen::VectorXd ev = svd.singularValues().array().square();
    return finish_factor(svd.matrixU(), ev, phi.squaredNorm(), phi.rows(), jitter);
}

KernelMatrixSet::KernelMatrixSet(Index nodes, int max_lag, int kernels, Index samples, std::vector<GramFactor> blocks)
    : nodes_(nodes), max_lag_(max_lag), kernels_(kernels), samples_(samples), blocks_(std::move(blocks)) {
    if (nodes_ < 1 || max_lag_ < 0 || kernels_ < 1)
        throw Error(ErrorCode::ShapeMismatch, "invalid kernel set dimensions");
    if (block_count() != static_cast<Index>(max_lag_ + 1) * nodes_ * kernels_)
        throw Error(ErrorCode::ShapeMismatch, "kernel set needs (L+1)*N*P blocks");
    for (Index b = 0; b < block_count(); ++b) {
        auto& blk = blocks_[static_cast<std::size_t>(b)];
        if (blk.gram.rows() != samples_ || blk.gram.cols() != samples_ || blk.basis.rows() != samples_)
            throw Error(ErrorCode::ShapeMismatch, "Gram block has wrong size");
        const Index p = b % kernels_;
        const Index rest = b / kernels_;
        blk.kernel = static_cast<int>(p);
        blk.node = rest % nodes_;
        blk.lag = static_cast<int>(rest / nodes_);
    }
}

std::vector<Index> KernelMatrixSet::active_blocks(Index column) const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(block_count()));
    for (Index b = 0; b < block_count(); ++b)
        if (!is_deleted(column, b)) out.push_back(b);
    return out;
}

Eigen::MatrixXd KernelMatrixSet::kbar() const {
    Eigen::MatrixXd out(samples_, samples_ * block_count());
    for (Index b = 0; b < block_count(); ++b) out.middleCols(b * samples_, samples_) = block(b).gram;
    return out;
}

Eigen::MatrixXd KernelMatrixSet::kbar_lag(int lag) const {
    const Index per_lag = nodes_ * kernels_;
    return kbar().middleCols(static_cast<Index>(lag) * per_lag * samples_, per_lag * samples_);
}

Eigen::MatrixXd KernelMatrixSet::block_diag() const {
    const Index n = samples_ * block_count();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Index b = 0; b < block_count(); ++b) d.block(b * samples_, b * samples_, samples_, samples_) = block(b).gram;
    return d;
}

Eigen::MatrixXd KernelMatrixSet::block_diag_sqrt() const {
    const Index n = samples_ * block_count();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Index b = 0; b < block_count(); ++b)
        d.block(b * samples_, b * samples_, samples_, samples_) = block(b).sqrt();
    return d;
}

std::vector<Index> KernelMatrixSet::deleted_columns(Index column) const {
    std::vector<Index> out;
    for (Index b = 0; b < block_count(); ++b)
        if (is_deleted(column, b))
            for (Index t = 0; t < samples_; ++t) out.push_back(b * samples_ + t);
    return out;
}

namespace {

std::vector<Index> kept_indices(const KernelMatrixSet& kms, Index column) {
    std::vector<Index> keep;
    for (Index b : kms.active_blocks(column))
        for (Index t = 0; t < kms.samples(); ++t) keep.push_back(b * kms.samples() + t);
    return keep;
}

} // namespace

Eigen::MatrixXd KernelMatrixSet::kbar_deleted(Index column) const {
    const auto keep = kept_indices(*this, column);
    const Eigen::MatrixXd full = kbar();
    Eigen::MatrixXd out(samples_, static_cast<Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) out.col(static_cast<Index>(c)) = full.col(keep[c]);
    return out;
}

Eigen::MatrixXd KernelMatrixSet::block_diag_deleted(Index column) const {
    const auto keep = kept_indices(*this, column);
    const Eigen::MatrixXd full = block_diag();
    const auto n = static_cast<Index>(keep.size());
    Eigen::MatrixXd out(n, n);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) out(r, c) = full(keep[static_cast<std::size_t>(r)], keep[static_cast<std::size_t>(c)]);
    return out;
}

KernelMatrixSet assemble(const std::vector<Eigen::MatrixXd>& grams, Index nodes, int max_lag, int kernels,
                         double jitter) {
    const auto expected = static_cast<std::size_t>((max_lag + 1) * nodes * kernels);
    if (grams.size() != expected || grams.empty())
        throw Error(ErrorCode::ShapeMismatch, "expected (L+1)*N*P Gram matrices");
    const Index samples = grams.front().rows();
    std::vector<GramFactor> blocks;
    blocks.reserve(grams.size());
    for (const auto& g : grams) {
        if (g.rows() != samples || g.cols() != samples)
            throw Error(ErrorCode::ShapeMismatch, "all Gram matrices must be T' x T'");
        blocks.push_back(factor_gram(g, jitter));
    }
    return KernelMatrixSet(nodes, max_lag, kernels, samples, std::move(blocks));
}

KernelMatrixSet build_kernel_set(const LagAlignedView& view, std::span<const KernelSpec> kernels,
                                 const GramOptions& options, std::span<const Index> rows) {
    if (kernels.empty()) throw Error(ErrorCode::InvalidArgument, "at least one kernel required");
    const Index nodes = view.nodes();
    const int max_lag = view.max_lag();
    const auto P = static_cast<int>(kernels.size());

    std::vector<Index> row_list(rows.begin(), rows.end());
    if (row_list.empty()) {
        row_list.resize(static_cast<std::size_t>(view.effective_samples()));
        for (std::size_t t = 0; t < row_list.size(); ++t) row_list[t] = static_cast<Index>(t);
    }
    for (Index r : row_list)
        if (r < 0 || r >= view.effective_samples()) throw Error(ErrorCode::ShapeMismatch, "row index out of range");
    const auto samples = static_cast<Index>(row_list.size());

    std::vector<std::vector<KernelSpec>> resolved(static_cast<std::size_t>(nodes));
    for (Index i = 0; i < nodes; ++i)
        for (const auto& k : kernels) {
            validate(k);
            resolved[static_cast<std::size_t>(i)].push_back(resolve_bandwidth(k, view.series(i), options.bandwidth_seed));
        }

    std::vector<GramFactor> blocks;
    blocks.reserve(static_cast<std::size_t>((max_lag + 1) * nodes * P));
    for (int lag = 0; lag <= max_lag; ++lag) {
        const auto lagged = view.lagged(lag);
        for (Index i = 0; i < nodes; ++i) {
            Eigen::VectorXd x(samples);
            for (Index t = 0; t < samples; ++t) x(t) = lagged(row_list[static_cast<std::size_t>(t)], i);
            for (int p = 0; p < P; ++p) {
                const KernelSpec& spec = resolved[static_cast<std::size_t>(i)][static_cast<std::size_t>(p)];
                GramFactor f;
                double scale = 1.0;
                if (has_feature_map(spec)) {
                    Eigen::MatrixXd phi = feature_map(spec, x);
                    const double trace = phi.squaredNorm();
                    if (options.normalize && trace > 0.0) scale = static_cast<double>(samples) / trace;
                    phi *= std::sqrt(scale);
                    f = factor_features(phi, options.jitter);
                } else {
                    Eigen::MatrixXd k = gram_matrix(spec, x);
                    const double trace = k.trace();
                    if (options.normalize && trace > 0.0) scale = static_cast<double>(samples) / trace;
                    k *= scale;
                    f = factor_gram(k, options.jitter);
                }
                f.spec = spec;
                f.scale = scale;
                blocks.push_back(std::move(f));
            }
        }
    }
    return KernelMatrixSet(nodes, max_lag, P, samples, std::move(blocks));
}

Eigen::MatrixXd block_cross_gram(const GramFactor& block, const Eigen::VectorXd& new_values,
                                 const Eigen::VectorXd& train_values) {
    return block.scale * cross_gram(block.spec, new_values, train_values);
}

} // namespace ksvarm
