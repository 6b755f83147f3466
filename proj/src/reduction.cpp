#include "redgrid/reduction.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace redgrid {

Mat lyapunov_solve(const Mat& A, const Mat& Q, double eps_stab) {
    if (A.rows() != A.cols() || Q.rows() != Q.cols() || A.rows() != Q.rows())
        throw DimensionMismatch("lyapunov_solve needs square A and Q of equal size");
    const Eigen::Index n = A.rows();
    if (n == 0) return Mat(0, 0);

    Eigen::ComplexSchur<Mat> schur(A, true);
    if (schur.info() != Eigen::Success) throw ConvergenceFailure("Schur decomposition failed");
    const CMat& U = schur.matrixU();
    const CMat& T = schur.matrixT();

    double max_re = T(0, 0).real();
    for (Eigen::Index i = 1; i < n; ++i) max_re = std::max(max_re, T(i, i).real());
    if (max_re >= -eps_stab) throw UnstableA(max_re);

    CMat F = U.adjoint() * Q * U;
    CMat Y = CMat::Zero(n, n);
    CMat Tk = T;
    for (Eigen::Index k = n - 1; k >= 0; --k) {
        CVec rhs = -F.col(k);
        for (Eigen::Index j = k + 1; j < n; ++j) rhs -= Y.col(j) * std::conj(T(k, j));
        // (T + conj(T_kk) I) y = rhs, upper triangular back-substitution
        Tk.diagonal() = T.diagonal().array() + std::conj(T(k, k));
        Y.col(k) = Tk.triangularView<Eigen::Upper>().solve(rhs);
    }
    Mat X = (U * Y * U.adjoint()).real();
    return 0.5 * (X + X.transpose());
}

namespace {

/// Factor of a PSD matrix: X = L L^T, tolerant of small negative eigenvalues.
Mat psd_factor(const Mat& X) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (X + X.transpose()));
    Vec d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal();
}

}  // namespace

BalancedTruncation balanced_truncate(const Mat& A, const Mat& B, const Mat& C, double tol,
                                     ReducedLinearSystem* reduced, double cond_limit,
                                     double eps_stab) {
    const Eigen::Index n = A.rows();
    BalancedTruncation bt;
    if (n == 0) {
        bt.T.resize(0, 0);
        bt.Tinv.resize(0, 0);
        bt.hsv.resize(0);
        if (reduced) *reduced = {Mat(0, 0), Mat(0, B.cols()), Mat(C.rows(), 0)};
        return bt;
    }

    const Mat Wc = lyapunov_solve(A, B * B.transpose(), eps_stab);
    const Mat Wo = lyapunov_solve(A.transpose(), C.transpose() * C, eps_stab);
    const Mat Lc = psd_factor(Wc);
    const Mat Lo = psd_factor(Wo);

    Eigen::JacobiSVD<Mat> svd(Lo.transpose() * Lc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    bt.hsv = svd.singularValues();

    const double s1 = bt.hsv.size() > 0 ? bt.hsv(0) : 0.0;
    Eigen::Index r = 0;
    if (s1 > 0.0) {
        r = n;
        for (Eigen::Index k = 0; k < bt.hsv.size(); ++k) {
            if (bt.hsv(k) / s1 < tol) {
                r = k;
                break;
            }
        }
    }
    bt.order = r;
    bt.error_bound = 2.0 * bt.hsv.tail(bt.hsv.size() - r).sum();

    if (r == 0) {
        bt.T.resize(n, 0);
        bt.Tinv.resize(0, n);
        if (reduced) *reduced = {Mat(0, 0), Mat(0, B.cols()), Mat(C.rows(), 0)};
        return bt;
    }

    const Vec s_inv_sqrt = bt.hsv.head(r).cwiseSqrt().cwiseInverse();
    bt.T = Lc * svd.matrixV().leftCols(r) * s_inv_sqrt.asDiagonal();
    bt.Tinv = s_inv_sqrt.asDiagonal() * svd.matrixU().leftCols(r).transpose() * Lo.transpose();

    Eigen::JacobiSVD<Mat> tsvd(bt.T);
    const double smin = tsvd.singularValues()(tsvd.singularValues().size() - 1);
    bt.cond = smin > 0.0 ? tsvd.singularValues()(0) / smin : std::numeric_limits<double>::infinity();
    if (!(bt.cond <= cond_limit)) {
        bt.fell_back = true;
        bt.order = n;
        bt.error_bound = 0.0;
        bt.T = Mat::Identity(n, n);
        bt.Tinv = Mat::Identity(n, n);
        if (reduced) *reduced = {A, B, C};
        return bt;
    }

    if (reduced) *reduced = {bt.Tinv * A * bt.T, bt.Tinv * B, C * bt.T};
    return bt;
}

DeflatedReduction reduce_stable_subspace(const Mat& A, const Mat& B, const Mat& C, double bt_tol,
                                         double eps_stab, double cond_limit) {
    const Eigen::Index n = A.rows();
    DeflatedReduction out;

    auto identity_fallback = [&]() {
        out.Ar = A;
        out.Br = B;
        out.Cr = C;
        out.V = Mat::Identity(n, n);
        out.W = Mat::Identity(n, n);
        out.n_marginal = 0;
        out.truncation_applied = false;
        return out;
    };

    Eigen::EigenSolver<Mat> es(A, true);
    if (es.info() != Eigen::Success) return identity_fallback();

    // Real bases for the marginal and strictly stable invariant subspaces.
    std::vector<Vec> marg_cols, stab_cols;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Complex lam = es.eigenvalues()(i);
        if (lam.imag() < 0.0) continue;  // conjugate partner handled with Im > 0
        const bool marginal = lam.real() >= -eps_stab;
        auto& dst = marginal ? marg_cols : stab_cols;
        if (lam.imag() > 0.0) {
            Vec re = es.eigenvectors().col(i).real();
            Vec im = es.eigenvectors().col(i).imag();
            const double nrm = std::max(re.norm(), im.norm());
            dst.push_back(re / nrm);
            dst.push_back(im / nrm);
        } else {
            Vec re = es.eigenvectors().col(i).real();
            dst.push_back(re / re.norm());
        }
    }

    const auto nm = static_cast<Eigen::Index>(marg_cols.size());
    const auto ns = static_cast<Eigen::Index>(stab_cols.size());
    if (nm + ns != n) return identity_fallback();

    Mat V(n, n);
    for (Eigen::Index k = 0; k < nm; ++k) V.col(k) = marg_cols[static_cast<std::size_t>(k)];
    for (Eigen::Index k = 0; k < ns; ++k) V.col(nm + k) = stab_cols[static_cast<std::size_t>(k)];

    Eigen::FullPivLU<Mat> lu(V);
    if (!lu.isInvertible()) return identity_fallback();
    const Mat W = lu.inverse();

    const Mat Ablk = W * A * V;
    const double off = std::max(
        nm > 0 && ns > 0 ? Ablk.topRightCorner(nm, ns).cwiseAbs().maxCoeff() : 0.0,
        nm > 0 && ns > 0 ? Ablk.bottomLeftCorner(ns, nm).cwiseAbs().maxCoeff() : 0.0);
    const double scale = A.cwiseAbs().maxCoeff();
    if (off > 1e-6 * std::max(1.0, scale)) return identity_fallback();

    const Mat Am = Ablk.topLeftCorner(nm, nm);
    const Mat As = Ablk.bottomRightCorner(ns, ns);
    const Mat Bm = (W * B).topRows(nm);
    const Mat Bs = (W * B).bottomRows(ns);
    const Mat Cm = (C * V).leftCols(nm);
    const Mat Cs = (C * V).rightCols(ns);

    ReducedLinearSystem red;
    out.bt = balanced_truncate(As, Bs, Cs, bt_tol, &red, cond_limit, eps_stab);
    const Eigen::Index r = out.bt.fell_back ? ns : out.bt.order;

    out.n_marginal = nm;
    out.Ar = Mat::Zero(nm + r, nm + r);
    out.Ar.topLeftCorner(nm, nm) = Am;
    out.Ar.bottomRightCorner(r, r) = red.Ar;
    out.Br = Mat(nm + r, B.cols());
    out.Br.topRows(nm) = Bm;
    out.Br.bottomRows(r) = red.Br;
    out.Cr = Mat(C.rows(), nm + r);
    out.Cr.leftCols(nm) = Cm;
    out.Cr.rightCols(r) = red.Cr;

    out.V = Mat(n, nm + r);
    out.V.leftCols(nm) = V.leftCols(nm);
    out.V.rightCols(r) = V.rightCols(ns) * out.bt.T;
    out.W = Mat(nm + r, n);
    out.W.topRows(nm) = W.topRows(nm);
    out.W.bottomRows(r) = out.bt.Tinv * W.bottomRows(ns);
    out.truncation_applied = !out.bt.fell_back && r < ns;
    return out;
}

ExternalContext ExternalContext::build(const PowerSystem& sys, const Partition& part,
                                       const EquilibriumInit& init, const PowerFlowSolution& pf) {
    ExternalContext ctx{AreaModel::external(sys, part, init),
                        std::make_unique<ReducedNetwork>(build_external_network(sys, part, pf.v_mag)),
                        nullptr, Vec()};
    ctx.solver = std::make_unique<NetworkSolver>(
        ctx.net.get(), machine_interfaces_subset(sys, ctx.area.machine_indices()));

    // Equilibrium split of the monolithic x0 plus its machine currents.
    const auto& idx = ctx.area.machine_indices();
    Vec x0(static_cast<Eigen::Index>(idx.size()) * kSlotsPerGen);
    for (std::size_t g = 0; g < idx.size(); ++g)
        x0.segment(static_cast<Eigen::Index>(g) * kSlotsPerGen, kSlotsPerGen) =
            init.x0.segment(static_cast<Eigen::Index>(idx[g]) * kSlotsPerGen, kSlotsPerGen);
    const auto cur = ctx.solver->solve_with_boundary_voltages(
        ctx.area.emf_states(x0), ctx.area.boundary_voltages_from_inputs(init.u0));
    ctx.iq0 = cur.Iq;
    return ctx;
}

namespace {

std::vector<Eigen::Index> flat_indices(const std::vector<std::size_t>& gens) {
    std::vector<Eigen::Index> idx;
    idx.reserve(gens.size() * kSlotsPerGen);
    for (std::size_t g : gens)
        for (int s = 0; s < kSlotsPerGen; ++s)
            idx.push_back(static_cast<Eigen::Index>(g) * kSlotsPerGen + s);
    return idx;
}

}  // namespace

ReducedExternalModel ReducedExternalModel::linear(const LinearModel& lin, bool truncate,
                                                  double bt_tol) {
    ReducedExternalModel m;
    m.gen_count_ = static_cast<std::size_t>(lin.A.rows()) / kSlotsPerGen;
    for (std::size_t g = 0; g < m.gen_count_; ++g) m.linear_.push_back(g);
    m.lin_idx_ = flat_indices(m.linear_);
    m.x0_ = lin.x0;
    m.u0_ = lin.u0;
    m.y0_ = lin.y0;
    m.A_rows_ = lin.A;
    m.B_rows_ = lin.B;
    m.C_ = lin.C;
    m.D_ = lin.D;
    if (truncate) {
        m.deflation_ = reduce_stable_subspace(lin.A, lin.B, lin.C, bt_tol);
        m.truncated_ = m.deflation_->truncation_applied;
        if (!m.truncated_) m.deflation_.reset();  // identity fallback: use the plain path
    }
    return m;
}

ReducedExternalModel ReducedExternalModel::hybrid(const LinearModel& lin,
                                                  std::vector<std::size_t> nonlinear,
                                                  std::size_t gen_count, bool truncate_linear_block,
                                                  double bt_tol) {
    std::sort(nonlinear.begin(), nonlinear.end());
    nonlinear.erase(std::unique(nonlinear.begin(), nonlinear.end()), nonlinear.end());
    if (nonlinear.empty()) return linear(lin, truncate_linear_block, bt_tol);

    ReducedExternalModel m;
    m.gen_count_ = gen_count;
    m.nonlinear_ = std::move(nonlinear);
    for (std::size_t g = 0; g < gen_count; ++g)
        if (!std::binary_search(m.nonlinear_.begin(), m.nonlinear_.end(), g)) m.linear_.push_back(g);
    m.nl_idx_ = flat_indices(m.nonlinear_);
    m.lin_idx_ = flat_indices(m.linear_);
    m.x0_ = lin.x0;
    m.u0_ = lin.u0;
    m.y0_ = lin.y0;
    m.C_ = lin.C;
    m.D_ = lin.D;

    const auto nl = static_cast<Eigen::Index>(m.lin_idx_.size());
    m.A_rows_.resize(nl, lin.A.cols());
    m.B_rows_.resize(nl, lin.B.cols());
    for (Eigen::Index r = 0; r < nl; ++r) {
        m.A_rows_.row(r) = lin.A.row(m.lin_idx_[static_cast<std::size_t>(r)]);
        m.B_rows_.row(r) = lin.B.row(m.lin_idx_[static_cast<std::size_t>(r)]);
    }

    if (truncate_linear_block && nl > 0) {
        // Gramian inputs: boundary inputs plus the nonlinear block's states;
        // outputs: the block's influence on boundary currents and on the
        // nonlinear block's rows.
        const auto nn = static_cast<Eigen::Index>(m.nl_idx_.size());
        Mat A_LL(nl, nl), A_LN(nl, nn), A_NL(nn, nl), C_L(lin.C.rows(), nl);
        for (Eigen::Index r = 0; r < nl; ++r)
            for (Eigen::Index c = 0; c < nl; ++c)
                A_LL(r, c) = lin.A(m.lin_idx_[static_cast<std::size_t>(r)],
                                   m.lin_idx_[static_cast<std::size_t>(c)]);
        for (Eigen::Index r = 0; r < nl; ++r)
            for (Eigen::Index c = 0; c < nn; ++c)
                A_LN(r, c) = lin.A(m.lin_idx_[static_cast<std::size_t>(r)],
                                   m.nl_idx_[static_cast<std::size_t>(c)]);
        for (Eigen::Index r = 0; r < nn; ++r)
            for (Eigen::Index c = 0; c < nl; ++c)
                A_NL(r, c) = lin.A(m.nl_idx_[static_cast<std::size_t>(r)],
                                   m.lin_idx_[static_cast<std::size_t>(c)]);
        for (Eigen::Index c = 0; c < nl; ++c)
            C_L.col(c) = lin.C.col(m.lin_idx_[static_cast<std::size_t>(c)]);

        Mat B_L(nl, lin.B.cols() + nn);
        for (Eigen::Index r = 0; r < nl; ++r)
            B_L.row(r).head(lin.B.cols()) = lin.B.row(m.lin_idx_[static_cast<std::size_t>(r)]);
        B_L.rightCols(nn) = A_LN;
        Mat C_aug(lin.C.rows() + nn, nl);
        C_aug.topRows(lin.C.rows()) = C_L;
        C_aug.bottomRows(nn) = A_NL;

        DeflatedReduction red = reduce_stable_subspace(A_LL, B_L, C_aug, bt_tol);
        if (red.truncation_applied) {
            m.truncated_ = true;
            m.bt_ = red.bt;
            m.Vbt_ = red.V;
            m.Wbt_ = red.W;
        }
    }
    return m;
}

Eigen::Index ReducedExternalModel::state_size() const {
    const auto nl_states = static_cast<Eigen::Index>(nl_idx_.size());
    if (is_pure_linear())
        return deflation_ ? deflation_->V.cols() : static_cast<Eigen::Index>(lin_idx_.size());
    return nl_states + (truncated_ ? Vbt_.cols() : static_cast<Eigen::Index>(lin_idx_.size()));
}

Vec ReducedExternalModel::init_state(const Vec& x_ext) const {
    if (x_ext.size() != x0_.size()) throw DimensionMismatch("external state length mismatch");
    if (is_pure_linear()) {
        const Vec dx = x_ext - x0_;
        return deflation_ ? Vec(deflation_->W * dx) : dx;
    }
    Vec s(state_size());
    for (std::size_t k = 0; k < nl_idx_.size(); ++k)
        s(static_cast<Eigen::Index>(k)) = x_ext(nl_idx_[k]);
    Vec dxl(static_cast<Eigen::Index>(lin_idx_.size()));
    for (std::size_t k = 0; k < lin_idx_.size(); ++k)
        dxl(static_cast<Eigen::Index>(k)) = x_ext(lin_idx_[k]) - x0_(lin_idx_[k]);
    if (truncated_)
        s.tail(Vbt_.cols()) = Wbt_ * dxl;
    else
        s.tail(dxl.size()) = dxl;
    return s;
}

Vec ReducedExternalModel::reconstruct(const Vec& s) const {
    Vec x = x0_;
    if (is_pure_linear()) {
        x += deflation_ ? Vec(deflation_->V * s) : s;
        return x;
    }
    for (std::size_t k = 0; k < nl_idx_.size(); ++k)
        x(nl_idx_[k]) = s(static_cast<Eigen::Index>(k));
    const Vec dxl =
        truncated_ ? Vec(Vbt_ * s.tail(Vbt_.cols()))
                   : Vec(s.tail(static_cast<Eigen::Index>(lin_idx_.size())));
    for (std::size_t k = 0; k < lin_idx_.size(); ++k) x(lin_idx_[k]) += dxl(static_cast<Eigen::Index>(k));
    return x;
}

Vec ReducedExternalModel::deriv(const ExternalContext& ctx, const Vec& s, const Vec& tie_u) const {
    const Vec du = tie_u - u0_;
    if (is_pure_linear()) {
        if (deflation_) return deflation_->Ar * s + deflation_->Br * du;
        return A_rows_ * s + B_rows_ * du;
    }

    const Vec x_full = reconstruct(s);
    const auto cur = ctx.solver->solve_partial(ctx.area.emf_states(x_full),
                                               ctx.area.boundary_voltages_from_inputs(tie_u),
                                               nonlinear_, ctx.iq0);
    Vec ds(state_size());
    for (std::size_t k = 0; k < nonlinear_.size(); ++k) {
        const auto g = static_cast<Eigen::Index>(nonlinear_[k]);
        double block[kSlotsPerGen];
        gen_block_rhs(ctx.area.gens()[nonlinear_[k]], x_full.data() + g * kSlotsPerGen, cur.Id(g),
                      cur.Iq(g), cur.Vt(g), block);
        for (int j = 0; j < kSlotsPerGen; ++j)
            ds(static_cast<Eigen::Index>(k * kSlotsPerGen) + j) = block[j];
    }

    const Vec dx_full = x_full - x0_;
    const Vec dlin = A_rows_ * dx_full + B_rows_ * du;
    if (truncated_)
        ds.tail(Vbt_.cols()) = Wbt_ * dlin;
    else
        ds.tail(dlin.size()) = dlin;
    return ds;
}

CVec ReducedExternalModel::boundary_currents(const ExternalContext& ctx, const Vec& s,
                                             const Vec& tie_u) const {
    if (is_pure_linear()) {
        const Vec dx = deflation_ ? Vec(deflation_->V * s) : s;
        const Vec dy = C_ * dx + D_ * (tie_u - u0_);
        CVec ib = y0_;
        for (Eigen::Index k = 0; k < ib.size(); ++k) ib(k) += Complex(dy(2 * k), dy(2 * k + 1));
        return ib;
    }
    const Vec x_full = reconstruct(s);
    CVec ib;
    ctx.solver->solve_partial(ctx.area.emf_states(x_full),
                              ctx.area.boundary_voltages_from_inputs(tie_u), nonlinear_, ctx.iq0,
                              &ib);
    return -ib;  // same into-study convention as AreaModel::publish_boundary_currents
}

Mat ReducedExternalModel::selector_P() const {
    Mat P = Mat::Zero(static_cast<Eigen::Index>(lin_idx_.size()), x0_.size());
    for (std::size_t r = 0; r < lin_idx_.size(); ++r) P(static_cast<Eigen::Index>(r), lin_idx_[r]) = 1.0;
    return P;
}

Mat ReducedExternalModel::selector_T() const { return selector_P().transpose(); }

std::vector<std::size_t> select_by_participation(const PFTable& pf, const DominantModes& dominant,
                                                 double p_max) {
    std::vector<std::size_t> out;
    const Eigen::Index n_gen = pf.gen_aggregate.rows();
    for (Eigen::Index g = 0; g < n_gen; ++g) {
        for (const auto& mode : dominant.modes) {
            if (pf.gen_aggregate(g, mode.mode) >= p_max) {
                out.push_back(static_cast<std::size_t>(g));
                break;
            }
        }
    }
    return out;
}

std::vector<std::size_t> select_by_rotor_deviation(const Mat& delta_traj, const Vec& inertia,
                                                   double delta_threshold) {
    const Eigen::Index n_gen = delta_traj.cols();
    if (inertia.size() != n_gen) throw DimensionMismatch("inertia length mismatch");
    if (delta_traj.rows() < 1) throw DimensionMismatch("empty rotor trajectory");

    const double h_total = inertia.sum();
    std::vector<std::size_t> out;
    Vec max_dev = Vec::Zero(n_gen);
    for (Eigen::Index t = 0; t < delta_traj.rows(); ++t) {
        const Vec dev = delta_traj.row(t) - delta_traj.row(0);
        const double coi = inertia.dot(dev) / h_total;
        for (Eigen::Index g = 0; g < n_gen; ++g)
            max_dev(g) = std::max(max_dev(g), std::abs(dev(g) - coi));
    }
    for (Eigen::Index g = 0; g < n_gen; ++g)
        if (max_dev(g) > delta_threshold) out.push_back(static_cast<std::size_t>(g));
    return out;
}

}  // namespace redgrid
